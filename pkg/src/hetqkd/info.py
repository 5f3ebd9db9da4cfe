"""Mutual-information quantities of the measured-data covariance matrix.

Two MI conventions coexist: the per-quadrature ("ignorant") value computed
after discarding all cross-correlations, and the full ("true") value from
the complete matrix.  The decomposition splits the true MI into an
SNR-like term and the MI between Bob's quadratures before and after
conditioning on Alice.  All results are in bits per channel use (base-2
logs throughout).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import CovMat4, schur_condition
from .params import PhysicalParams

_IDENTITY_TOL = 1e-9


@dataclass(frozen=True)
class MiBreakdown:
    """Decomposition of the true MI into Bob-side information terms.

    ``mi_true = snr_term - i_bb + i_bb_cond`` holds by construction;
    ``i_bb`` is the MI between Bob's quadratures, ``i_bb_cond`` the same
    after conditioning on Alice's data.
    """

    mi_true: float
    mi_ignorant: float
    snr_term: float
    i_bb: float
    i_bb_cond: float


def ignorant_mi(gamma: CovMat4) -> float:
    """Per-quadrature MI of the symmetrized matrix (all cross terms dropped).

    Returns ``0.5 (log2(V_A^x / V_A|B^x) + log2(V_A^p / V_A|B^p))`` with the
    conditional variances ``V_A - sigma^2 / V_B``.  Classical conditioning
    divides by V_B itself because the measured matrix already contains the
    detection vacuum.
    """
    if gamma.v_bx <= 0 or gamma.v_bp <= 0:
        raise ValueError("Bob variance must be positive for MI evaluation")
    v_ax_cond = gamma.v_ax - gamma.sigma_x**2 / gamma.v_bx
    v_ap_cond = gamma.v_ap - gamma.sigma_p**2 / gamma.v_bp
    if v_ax_cond <= 0 or v_ap_cond <= 0:
        raise ValueError("conditional variance is not positive")
    return 0.5 * (
        math.log2(gamma.v_ax / v_ax_cond) + math.log2(gamma.v_ap / v_ap_cond)
    )


def true_mi(gamma: CovMat4) -> float:
    """MI from the full covariance matrix, 0.5 log2(|gamma_A| / |gamma_A|B|).

    Invariant under any invertible local linear map of Alice's or Bob's
    data pair.
    """
    gamma_cond = schur_condition(gamma.mat, measured=(2, 3))
    det_a = float(np.linalg.det(gamma.gamma_a))
    det_cond = float(np.linalg.det(gamma_cond))
    if det_cond <= 0:
        raise ValueError("singular conditional matrix in true MI")
    return 0.5 * math.log2(det_a / det_cond)


def mi_decomposition(gamma: CovMat4) -> MiBreakdown:
    """All MI terms of the Bob-side decomposition of the true MI."""
    gamma_b = gamma.gamma_b
    gamma_b_cond = schur_condition(gamma.mat, measured=(0, 1))
    det_b = float(np.linalg.det(gamma_b))
    det_b_cond = float(np.linalg.det(gamma_b_cond))
    if det_b <= 0 or det_b_cond <= 0:
        raise ValueError("singular Bob block in MI decomposition")
    vbx, vbp = gamma.v_bx, gamma.v_bp
    cbx, cbp = float(gamma_b_cond[0, 0]), float(gamma_b_cond[1, 1])

    snr_term = 0.5 * math.log2((vbx * vbp) / (cbx * cbp))
    i_bb = 0.5 * math.log2((vbx * vbp) / det_b)
    i_bb_cond = 0.5 * math.log2((cbx * cbp) / det_b_cond)
    mi_t = 0.5 * math.log2(det_b / det_b_cond)

    out = MiBreakdown(
        mi_true=mi_t,
        mi_ignorant=ignorant_mi(gamma),
        snr_term=snr_term,
        i_bb=i_bb,
        i_bb_cond=i_bb_cond,
    )
    if abs(out.mi_true - (out.snr_term - out.i_bb + out.i_bb_cond)) > _IDENTITY_TOL:
        raise AssertionError("MI decomposition identity violated")
    return out


def lost_mi_approx(p: PhysicalParams) -> float:
    """Closed-form MI between Bob's quadratures induced by the imbalance.

    For a balanced ideal receiver this equals exactly

        log2[eta (V_m + eps + 2/eta)]
          - 0.5 log2[eta^2 (V_m + eps + 2/eta)^2 - (eta (eps + V_m) sin d)^2]

    with V_m the effective modulation variance and d = theta + phi; it is
    non-negative and vanishes when the measured quadratures stay canonically
    conjugate (d = 0).  With unequal receiver arms this is the small-noise
    approximation of the exact ``i_bb`` from :func:`mi_decomposition`.
    """
    v_m = p.v_mod
    d = p.eta * (v_m + p.eps) + 2.0
    s = p.eta * (p.eps + v_m) * math.sin(p.phi + p.theta)
    return math.log2(d) - 0.5 * math.log2(d * d - s * s)
