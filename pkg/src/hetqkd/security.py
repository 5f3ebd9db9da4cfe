"""Holevo bound and the four asymptotic key-rate variants.

The eavesdropper purifies the symmetric effective channel the measured
matrix implies - channel loss and noise plus the detector inefficiency
commuted back through the receiver splitter - while the receiver's
splitting ratio and measurement angles are characterized hardware.  Both
the mutual information and the Holevo bound can be evaluated from the full
matrix ("true") or after discarding the cross-correlations
("symmetrized"/"ignorant"), giving four rates.  Security is always
evaluated on pre-transformation data: a local re-alignment cannot change
the eavesdropper's information, and symmetrizing afterwards would
overestimate the key.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .channel import build_pm_covariance, eb_from_measured
from .compensation import symmetrize
from .gaussian import CovMat4, schur_condition, von_neumann_entropy
from .info import ignorant_mi, true_mi
from .params import PhysicalParams


class TransformOrderError(RuntimeError):
    """Raised when security evaluation receives a transformed matrix."""


class MiMode(enum.Enum):
    TRUE = "true"
    IGNORANT = "ignorant"


class HolevoMode(enum.Enum):
    TRUE = "true"
    SYMMETRIZED = "symmetrized"


class KeyRateVariant(enum.Enum):
    """The four (MI mode, Holevo mode) combinations.

    First letter: MI evaluation (T = true, I = ignorant).  Second letter:
    Holevo evaluation (T = full matrix, I = symmetrized).
    """

    TT = (MiMode.TRUE, HolevoMode.TRUE)
    IT = (MiMode.IGNORANT, HolevoMode.TRUE)
    TI = (MiMode.TRUE, HolevoMode.SYMMETRIZED)
    II = (MiMode.IGNORANT, HolevoMode.SYMMETRIZED)

    @property
    def mi_mode(self) -> MiMode:
        return self.value[0]

    @property
    def holevo_mode(self) -> HolevoMode:
        return self.value[1]

    @property
    def label(self) -> str:
        return f"K_{self.name}"


@dataclass(frozen=True)
class KeyRateReport:
    """Asymptotic rate components: rate = max(0, beta * mi - chi)."""

    variant: KeyRateVariant
    mi: float
    chi: float
    beta: float
    rate: float


def _check_transform_order(gamma: CovMat4, needs_symmetrization: bool) -> None:
    # Local transformations cannot change the eavesdropper's information,
    # so security is always evaluated on the pre-transformation matrix;
    # accepting transformed input would silently bias the channel
    # estimators and, with symmetrization, overestimate the key.
    if gamma.transformed:
        if needs_symmetrization:
            raise TransformOrderError(
                "symmetrization is not allowed after the transformation"
            )
        raise TransformOrderError(
            "security must be evaluated on the pre-transformation matrix"
        )


def holevo_from_gamma(gamma: CovMat4, p: PhysicalParams, mode: HolevoMode) -> float:
    """Holevo bound chi(E) in bits from a measured covariance matrix.

    Eve purifies the effective symmetric channel (including the detector
    loss) whose parameters the matrix implies, so her entropy is that of
    the entanglement-based state from :func:`eb_from_measured`.  Under
    reverse reconciliation her conditional entropy given Bob's outcomes
    equals Alice's: the receiver's arm homodynes are rank-one on
    everything outside the (Alice, Eve) pair, so S(E|b) = S(A|b), and
    S(A|b) follows from classically conditioning Alice's EB mode on the
    recorded data,

        gamma_A|b = V I - C gamma_B^-1 C^T,
        C = sqrt(V^2 - 1) / (alpha v_a) * gamma_C,

    where gamma_B, gamma_C are the measured blocks (they already contain
    every measurement vacuum, hence no extra regularizer).  In the
    symmetrized mode both terms are evaluated on the symmetrized matrix.
    """
    _check_transform_order(gamma, mode is HolevoMode.SYMMETRIZED)
    if mode is HolevoMode.SYMMETRIZED:
        gamma = symmetrize(gamma)
    gamma_eb = eb_from_measured(gamma, p)
    s_eve = von_neumann_entropy(gamma_eb)

    v_eb = p.v_mod + 1.0
    corr_scale = np.sqrt(v_eb**2 - 1.0) / (p.alpha * p.v_a)
    joint = np.zeros((4, 4))
    joint[:2, :2] = v_eb * np.eye(2)
    joint[:2, 2:] = corr_scale * gamma.gamma_c
    joint[2:, :2] = joint[:2, 2:].T
    joint[2:, 2:] = gamma.gamma_b
    gamma_cond = schur_condition(joint, measured=(2, 3))
    s_cond = von_neumann_entropy(gamma_cond)
    return s_eve - s_cond


def holevo_bound(p: PhysicalParams, mode: HolevoMode = HolevoMode.TRUE) -> float:
    """Holevo bound for ground-truth parameters."""
    return holevo_from_gamma(build_pm_covariance(p), p, mode)


def asymptotic_key_rate_from_gamma(
    gamma: CovMat4, p: PhysicalParams, variant: KeyRateVariant
) -> KeyRateReport:
    """Asymptotic collective-attack rate from a measured covariance matrix.

    Raises
    ------
    TransformOrderError
        If ``gamma`` carries the transformed flag: rates are evaluated on
        pre-transformation data (symmetrizing afterwards would overestimate
        the key; the channel estimators assume the untransformed model).
    """
    _check_transform_order(
        gamma,
        variant.mi_mode is MiMode.IGNORANT
        or variant.holevo_mode is HolevoMode.SYMMETRIZED,
    )
    mi = true_mi(gamma) if variant.mi_mode is MiMode.TRUE else ignorant_mi(gamma)
    chi = holevo_from_gamma(gamma, p, variant.holevo_mode)
    rate = max(0.0, p.beta * mi - chi)
    return KeyRateReport(variant=variant, mi=mi, chi=chi, beta=p.beta, rate=rate)


def asymptotic_key_rate(
    p: PhysicalParams, variant: KeyRateVariant, balance_bs: bool = False
) -> KeyRateReport:
    """Asymptotic collective-attack rate for ground-truth parameters.

    ``balance_bs`` forces the heterodyne splitting ratio to 0.5 in the
    security model, removing any residual quadrature-variance difference
    left after data normalization.
    """
    if balance_bs:
        p = replace(p, eta_bs=0.5)
    return asymptotic_key_rate_from_gamma(build_pm_covariance(p), p, variant)


def max_tolerable_noise(
    p: PhysicalParams,
    variant: KeyRateVariant,
    tol: float = 1e-6,
    max_iter: int = 60,
) -> float:
    """Largest excess noise with a positive rate, by bisection on eps.

    Returns 0 if the rate is already non-positive in a noiseless channel.
    Absolute tolerance ``tol`` in SNU.
    """
    if asymptotic_key_rate(replace(p, eps=0.0), variant).rate <= 0.0:
        return 0.0
    lo, hi = 0.0, 0.1
    while asymptotic_key_rate(replace(p, eps=hi), variant).rate > 0.0:
        hi *= 2.0
        if hi > 100.0:
            return hi
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if asymptotic_key_rate(replace(p, eps=mid), variant).rate > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class PhaseFluctuationSurface:
    """K_TT over a modulation-variance grid under Gaussian phase jitter.

    ``rate_exact`` uses the exact Gaussian mean of cos(theta),
    exp(-sigma2/2); ``rate_quartic`` the quartic variant exp(-sigma2^2/4)
    reported alongside for comparison.
    """

    sigma2: float
    v_mod_grid: np.ndarray
    factor_exact: float
    factor_quartic: float
    rate_exact: np.ndarray
    rate_quartic: np.ndarray


def phase_fluctuation_penalty(
    sigma2: float, p: PhysicalParams, v_mod_grid: np.ndarray | None = None
) -> PhaseFluctuationSurface:
    """K_TT versus modulation variance when the phase jitters per symbol.

    A zero-mean Gaussian jitter of variance ``sigma2`` on the measurement
    phase washes out the Alice-Bob correlations by E[cos(jitter)]; the
    covariance matrix is rescaled accordingly and K_TT recomputed over the
    grid of effective modulation variances.
    """
    if sigma2 < 0:
        raise ValueError("phase variance must be non-negative")
    if v_mod_grid is None:
        v_mod_grid = np.linspace(1.0, 10.0, 46)
    v_mod_grid = np.asarray(v_mod_grid, dtype=float)
    factor_exact = float(np.exp(-sigma2 / 2.0))
    factor_quartic = float(np.exp(-(sigma2**2) / 4.0))

    def rate_with_factor(v_mod: float, factor: float) -> float:
        pv = replace(p, v_a=v_mod / p.alpha**2)
        gamma = build_pm_covariance(pv)
        mat = gamma.mat.copy()
        mat[:2, 2:] *= factor
        mat[2:, :2] *= factor
        scaled = CovMat4(mat)
        return asymptotic_key_rate_from_gamma(scaled, pv, KeyRateVariant.TT).rate

    rate_exact = np.array([rate_with_factor(v, factor_exact) for v in v_mod_grid])
    rate_quartic = np.array([rate_with_factor(v, factor_quartic) for v in v_mod_grid])
    return PhaseFluctuationSurface(
        sigma2=sigma2,
        v_mod_grid=v_mod_grid,
        factor_exact=factor_exact,
        factor_quartic=factor_quartic,
        rate_exact=rate_exact,
        rate_quartic=rate_quartic,
    )
