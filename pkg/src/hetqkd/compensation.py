"""Local data transformations that re-align the measured quadratures.

Either side may apply a 2x2 linear map to its data pair,

    x_bar = cos(T) x + sin(T) p
    p_bar = sin(F) x + cos(F) p,

with the angles chosen so the aligned covariances with the other side are
maximized.  The map is the identity at T = F = 0 and degenerates when
T + F approaches +/- pi/2.  Transformed matrices are flagged: symmetrizing
them would overestimate the recoverable information, so security
evaluation refuses transformed input altogether.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .gaussian import CovMat4
from .simulator import QuadratureFrame

_DEGENERACY_TOL = 1e-9
_MIN_CORRELATION = 1e-12


class Side(enum.Enum):
    ALICE = "alice"
    BOB = "bob"


class DegenerateTransformError(ValueError):
    pass


@dataclass(frozen=True)
class TransformSpec:
    """Angles of the re-alignment map and the side it acts on.

    ``feasible`` is meaningful for Bob-side specs only: his transformation
    can increase the aligned MI only when the signs of both angles are
    opposite to the sign of the Bob-Bob cross-correlation.
    """

    side: Side
    theta_cap: float
    phi_cap: float
    feasible: bool = True

    def __post_init__(self):
        if abs(self.theta_cap) >= math.pi / 2 or abs(self.phi_cap) >= math.pi / 2:
            raise ValueError("transform angles must be below pi/2 in magnitude")

    @property
    def matrix(self) -> np.ndarray:
        m = np.array(
            [
                [math.cos(self.theta_cap), math.sin(self.theta_cap)],
                [math.sin(self.phi_cap), math.cos(self.phi_cap)],
            ]
        )
        if abs(np.linalg.det(m)) < _DEGENERACY_TOL:
            raise DegenerateTransformError(
                "degenerate transform: angles sum to +/- pi/2"
            )
        return m


def _require_correlations(gamma: CovMat4) -> None:
    if abs(gamma.sigma_x) < _MIN_CORRELATION or abs(gamma.sigma_p) < _MIN_CORRELATION:
        raise ValueError("no correlation to align")
    # Single-argument atan is valid because the aligned x-correlation is
    # positive for any imbalance below pi/2; a negative one signals data
    # outside the model rather than a wrapped angle.
    if gamma.sigma_x < 0:
        raise ValueError("no correlation to align: negative x co-variance")


def alice_transform_angles(gamma: CovMat4) -> TransformSpec:
    """Angles that re-align Alice's modulation with Bob's measured basis."""
    _require_correlations(gamma)
    theta_cap = math.atan(gamma.s_ap_bx / gamma.sigma_x)
    phi_cap = math.atan(gamma.s_ax_bp / gamma.sigma_p)
    return TransformSpec(side=Side.ALICE, theta_cap=theta_cap, phi_cap=phi_cap)


def bob_transform_angles(gamma: CovMat4) -> TransformSpec:
    """Angles for the receiver-side re-alignment, with the feasibility flag.

    The flag is true iff both angle signs are opposite to the sign of the
    cross-correlation between Bob's quadratures (zeros count as opposite).
    """
    _require_correlations(gamma)
    theta_cap = math.atan(gamma.s_ax_bp / gamma.sigma_x)
    phi_cap = math.atan(gamma.s_ap_bx / gamma.sigma_p)
    s_bb = gamma.s_bx_bp
    feasible = (theta_cap * s_bb <= 0.0) and (phi_cap * s_bb <= 0.0)
    return TransformSpec(
        side=Side.BOB, theta_cap=theta_cap, phi_cap=phi_cap, feasible=feasible
    )


def apply_transform_gamma(gamma: CovMat4, spec: TransformSpec) -> CovMat4:
    """Push the transformation onto the covariance matrix (full congruence)."""
    m = spec.matrix
    g = np.eye(4)
    if spec.side is Side.ALICE:
        g[:2, :2] = m
    else:
        g[2:, 2:] = m
    return CovMat4(g @ gamma.mat @ g.T, transformed=True)


def apply_transform_frame(frame: QuadratureFrame, spec: TransformSpec) -> QuadratureFrame:
    """Sample-wise application of the map to the chosen side's columns."""
    m = spec.matrix
    if spec.side is Side.ALICE:
        pair = np.vstack([frame.x_a, frame.p_a])
        new = m @ pair
        return QuadratureFrame(
            x_a=new[0], p_a=new[1], x_b=frame.x_b.copy(), p_b=frame.p_b.copy(),
            meta=frame.meta, transformed=True,
        )
    pair = np.vstack([frame.x_b, frame.p_b])
    new = m @ pair
    return QuadratureFrame(
        x_a=frame.x_a.copy(), p_a=frame.p_a.copy(), x_b=new[0], p_b=new[1],
        meta=frame.meta, transformed=True,
    )


def symmetrize(gamma: CovMat4) -> CovMat4:
    """Zero all four cross-correlations, keeping co-variances and diagonal.

    Idempotent.  The ``transformed`` flag is carried through so that
    downstream security evaluation can refuse symmetrized-after-transform
    matrices.
    """
    out = gamma.mat.copy()
    for i, j in ((0, 1), (0, 3), (1, 2), (2, 3)):
        out[i, j] = 0.0
        out[j, i] = 0.0
    return CovMat4(out, transformed=gamma.transformed)
