"""Ground-truth physical parameters of the link and receiver."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalParams:
    """Parameters of a Gaussian-modulated coherent-state link with an
    imbalanced heterodyne receiver.

    Attributes
    ----------
    eta : float
        Channel transmittance, in (0, 1].
    eps : float
        Excess noise at the channel output reference, in SNU, >= 0.
    theta : float
        Phase imbalance of the x-quadrature measurement, radians.
    phi : float
        Phase imbalance of the p-quadrature measurement, radians.
    eta_d : float
        Detector efficiency, in (0, 1].
    eta_bs : float
        Heterodyne beamsplitter transmission, in (0, 1).
    alpha : float
        Modulation rescaling factor, > 0.
    v_a : float
        Gaussian modulation variance per quadrature (Alice's data), SNU, > 0.
    beta : float
        Reconciliation efficiency, in (0, 1).
    """

    eta: float
    eps: float
    theta: float
    phi: float
    eta_d: float = 1.0
    eta_bs: float = 0.5
    alpha: float = 1.0
    v_a: float = 2.0
    beta: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if self.eps < 0.0:
            raise ValueError(f"eps must be non-negative, got {self.eps}")
        if abs(self.theta) >= math.pi / 2:
            raise ValueError(f"|theta| must be below pi/2, got {self.theta}")
        if abs(self.phi) >= math.pi / 2:
            raise ValueError(f"|phi| must be below pi/2, got {self.phi}")
        if not 0.0 < self.eta_d <= 1.0:
            raise ValueError(f"eta_d must be in (0, 1], got {self.eta_d}")
        if not 0.0 < self.eta_bs < 1.0:
            raise ValueError(f"eta_bs must be in (0, 1), got {self.eta_bs}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.v_a <= 0.0:
            raise ValueError(f"v_a must be positive, got {self.v_a}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")

    @property
    def tau_x(self) -> float:
        """Total receiver transmission of the x-quadrature arm."""
        return self.eta_d * self.eta_bs

    @property
    def tau_p(self) -> float:
        """Total receiver transmission of the p-quadrature arm."""
        return self.eta_d * (1.0 - self.eta_bs)

    @property
    def v_mod(self) -> float:
        """Effective modulation variance alpha^2 * v_a (SNU)."""
        return self.alpha**2 * self.v_a

    @property
    def delta(self) -> float:
        """Total imbalance theta + phi."""
        return self.theta + self.phi
