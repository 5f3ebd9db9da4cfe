import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from hetqkd import PhysicalParams


@pytest.fixture
def balanced_ideal():
    """Lossless, noiseless, perfectly aligned link with an ideal receiver."""
    return PhysicalParams(
        eta=1.0, eps=0.0, theta=0.0, phi=0.0,
        eta_d=1.0, eta_bs=0.5, alpha=1.0, v_a=2.0, beta=0.95,
    )


@pytest.fixture
def lab_link():
    """3.5 dB channel, 0.005 SNU noise, 10 degree imbalance, 85% detector."""
    return PhysicalParams(
        eta=10 ** -0.35, eps=0.005, theta=math.radians(10.0), phi=0.0,
        eta_d=0.85, eta_bs=0.5, alpha=1.0, v_a=3.3, beta=0.95,
    )


def random_params(rng, allow_imbalance=True):
    """Random valid parameter set, broad but numerically tame."""
    theta = math.radians(rng.uniform(-25.0, 25.0)) if allow_imbalance else 0.0
    phi = math.radians(rng.uniform(-25.0, 25.0)) if allow_imbalance else 0.0
    return PhysicalParams(
        eta=rng.uniform(0.05, 1.0),
        eps=rng.uniform(0.0, 0.08),
        theta=theta,
        phi=phi,
        eta_d=rng.uniform(0.6, 1.0),
        eta_bs=rng.uniform(0.35, 0.65),
        alpha=rng.uniform(0.5, 2.0),
        v_a=rng.uniform(1.0, 6.0),
        beta=rng.uniform(0.85, 0.99),
    )
