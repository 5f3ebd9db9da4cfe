"""Parameter estimation from frames or covariance matrices.

Every estimator is exact on matrices produced by ``build_pm_covariance``
(machine-precision builder round-trip) and consistent on simulated frames.
Angles use the convention in which the builder round-trip is the identity:
the p-quadrature co-variance is negative, and both the ratio estimators and
the cross-check below are signed so that positive (theta, phi) come back
positive.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace, asdict

import numpy as np

from .gaussian import CovMat4, schur_condition
from .params import PhysicalParams
from .simulator import QuadratureFrame, empirical_covariance

_MIN_SIN_DELTA = 1e-3


class NormalizationError(ValueError):
    pass


@dataclass(frozen=True)
class EstimationReport:
    """Point estimates, variances and cross-checks recovered from data.

    ``delta_hat = theta_hat + phi_hat`` always; ``crosscheck_delta`` is the
    independent route through the correlation of Bob's quadratures, signed
    to agree with ``delta_hat`` on model-generated data.  Variances are
    ``None`` when no sample count was available.
    """

    theta_hat: float
    phi_hat: float
    delta_hat: float
    crosscheck_delta: float
    eta_bs_hat: float
    alpha_hat: float
    alpha_consistency: float
    eta_hat: float
    eps_hat: float
    m: int | None = None
    var_theta: float | None = None
    var_phi: float | None = None
    var_delta: float | None = None
    var_eta: float | None = None
    var_eps: float | None = None

    def to_text(self) -> str:
        """Flat key-value record, one field per line."""
        lines = []
        for key, value in asdict(self).items():
            lines.append(f"{key} {'' if value is None else repr(value)}".rstrip())
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "EstimationReport":
        return EstimationReport(**json.loads(text))


def _as_gamma(source: QuadratureFrame | CovMat4) -> CovMat4:
    if isinstance(source, CovMat4):
        return source
    return empirical_covariance(source)


def estimate_imbalance(gamma: CovMat4) -> tuple[float, float, float]:
    """Phase-imbalance angles plus the Bob-Bob cross-check.

    Returns ``(theta_hat, phi_hat, crosscheck_delta)`` where
    ``theta_hat = atan(<p_a x_B> / <x_a x_B>)``,
    ``phi_hat = atan(<x_a p_B> / <p_a p_B>)`` and the cross-check recovers
    theta + phi from ``asin(<x_B p_B> / sqrt((V_B^x - 1)(V_B^p - 1)))``,
    sign-flipped so it matches ``theta_hat + phi_hat`` on model data.
    """
    if gamma.sigma_x == 0.0 or gamma.sigma_p == 0.0:
        raise ValueError("vanishing co-variance, cannot estimate imbalance")
    theta_hat = math.atan(gamma.s_ap_bx / gamma.sigma_x)
    phi_hat = math.atan(gamma.s_ax_bp / gamma.sigma_p)
    ex_x, ex_p = gamma.v_bx - 1.0, gamma.v_bp - 1.0
    if ex_x <= 0.0 or ex_p <= 0.0:
        raise ValueError("Bob variances must exceed shot noise for the cross-check")
    arg = gamma.s_bx_bp / math.sqrt(ex_x * ex_p)
    if abs(arg) > 1.0:
        raise ValueError("inconsistent covariance for cross-check")
    crosscheck = -math.asin(arg)
    return theta_hat, phi_hat, crosscheck


def estimate_eta_bs(gamma: CovMat4) -> float:
    """Beamsplitter transmission from the conditional variance reduction.

    eta_bs = (V_B^x - V_B|A^x) / [(V_B^x - V_B|A^x) + (V_B^p - V_B|A^p)],
    with classically conditioned variances.
    """
    cond = schur_condition(gamma.mat, measured=(0, 1))
    red_x = gamma.v_bx - float(cond[0, 0])
    red_p = gamma.v_bp - float(cond[1, 1])
    den = red_x + red_p
    if den <= 0.0 or red_x < 0.0 or red_p < 0.0:
        raise ValueError("non-positive variance reduction, cannot estimate eta_bs")
    return red_x / den


def estimate_alpha(
    gamma: CovMat4, eta: float, v_a: float, tau_x: float, tau_p: float
) -> tuple[float, float]:
    """Modulation rescaling factor from both quadrature co-variances.

    Returns the average of the x- and p-quadrature quotients and their
    relative difference as a consistency metric (0 on model matrices).
    The p quotient is negated to undo the sign of the p co-variance.
    """
    theta_hat, phi_hat, _ = estimate_imbalance(gamma)
    a_x = gamma.sigma_x / (math.sqrt(eta * tau_x) * math.cos(theta_hat) * v_a)
    a_p = -gamma.sigma_p / (math.sqrt(eta * tau_p) * math.cos(phi_hat) * v_a)
    mean = 0.5 * (a_x + a_p)
    spread = abs(a_x - a_p) / max(abs(mean), 1e-300)
    return mean, spread


def _c_ab(source: QuadratureFrame | CovMat4) -> float:
    """Difference correlator (1/m) sum(x_a x_B - p_a p_B)."""
    if isinstance(source, QuadratureFrame):
        return float(np.mean(source.x_a * source.x_b - source.p_a * source.p_b))
    return source.sigma_x - source.sigma_p


def estimate_transmission(
    source: QuadratureFrame | CovMat4,
    alpha: float,
    v_a: float,
    tau_x: float,
    tau_p: float,
    theta: float | None = None,
    phi: float | None = None,
) -> float:
    """Channel transmittance from the difference correlator.

    T_hat = C_AB^2 / (alpha^2 v_a^2 (sqrt(tau_x) cos(theta)
    + sqrt(tau_p) cos(phi))^2).  Angles default to their own estimates.
    """
    if theta is None or phi is None:
        theta, phi, _ = estimate_imbalance(_as_gamma(source))
    c_ab = _c_ab(source)
    s = math.sqrt(tau_x) * math.cos(theta) + math.sqrt(tau_p) * math.cos(phi)
    return c_ab**2 / (alpha**2 * v_a**2 * s**2)


def estimate_excess_noise(
    source: QuadratureFrame | CovMat4,
    mode: str,
    eta: float,
    tau_x: float,
    tau_p: float,
) -> float:
    """Channel-referred excess noise, by either of two routes.

    ``conditional``: average of (V_B|A - 1) / (eta tau) over the two
    quadratures of the classically conditioned Bob block.  ``crosscorr``:
    from the conditional cross-correlation of Bob's quadratures,
    -V_B|A^{1,2} / (eta sqrt(tau_x tau_p) sin(theta + phi)), which needs a
    resolvable imbalance.
    """
    gamma = _as_gamma(source)
    cond = schur_condition(gamma.mat, measured=(0, 1))
    if mode == "conditional":
        eps_x = (float(cond[0, 0]) - 1.0) / (eta * tau_x)
        eps_p = (float(cond[1, 1]) - 1.0) / (eta * tau_p)
        return 0.5 * (eps_x + eps_p)
    if mode == "crosscorr":
        theta_hat, phi_hat, _ = estimate_imbalance(gamma)
        sin_delta = math.sin(theta_hat + phi_hat)
        if abs(sin_delta) <= _MIN_SIN_DELTA:
            raise ValueError("imbalance too small for cross-correlation route")
        return -float(cond[0, 1]) / (eta * math.sqrt(tau_x * tau_p) * sin_delta)
    raise ValueError(f"unknown excess-noise mode {mode!r}")


def residual_noise_variance(
    frame: QuadratureFrame,
    alpha: float,
    eta: float,
    tau_x: float,
    tau_p: float,
    theta: float,
    phi: float,
) -> float:
    """Channel-noise variance estimator from the summed residuals.

    V_eps_hat = (1/2m) sum (x_B + p_B - E[x_B + p_B | modulation])^2 - 1.
    Its expectation is eta (tau_mean - sqrt(tau_x tau_p) sin(theta + phi))
    times the excess noise; its sampling variance is 2 (t eps + 1)^2 / m.
    """
    st, ct = math.sin(theta), math.cos(theta)
    sf, cf = math.sin(phi), math.cos(phi)
    gain_x = math.sqrt(eta) * alpha * (math.sqrt(tau_x) * ct - math.sqrt(tau_p) * sf)
    gain_p = math.sqrt(eta) * alpha * (math.sqrt(tau_x) * st - math.sqrt(tau_p) * cf)
    resid = frame.x_b + frame.p_b - gain_x * frame.x_a - gain_p * frame.p_a
    return 0.5 * float(np.mean(resid**2)) - 1.0


def estimate_all(
    source: QuadratureFrame | CovMat4,
    known: PhysicalParams,
    m: int | None = None,
) -> EstimationReport:
    """Full estimation chain using the trusted receiver/modulation values.

    Only the known-by-construction fields of ``known`` are read (eta_d,
    eta_bs, alpha, v_a); channel transmittance, excess noise and the
    imbalance angles are estimated from the data.  Variances of the
    estimators are attached when a sample count is available (taken from
    the frame, or passed explicitly for a covariance input).
    """
    from . import finite_size  # runtime import; finite_size has no runtime dep on us

    gamma = _as_gamma(source)
    if m is None and isinstance(source, QuadratureFrame):
        m = source.m
    tau_x, tau_p = known.tau_x, known.tau_p

    theta_hat, phi_hat, crosscheck = estimate_imbalance(gamma)
    eta_bs_hat = estimate_eta_bs(gamma)
    eta_hat = estimate_transmission(
        source, known.alpha, known.v_a, tau_x, tau_p, theta_hat, phi_hat
    )
    eps_hat = estimate_excess_noise(gamma, "conditional", eta_hat, tau_x, tau_p)
    alpha_hat, alpha_consistency = estimate_alpha(
        gamma, eta_hat, known.v_a, tau_x, tau_p
    )

    var_theta = var_phi = var_delta = var_eta = var_eps = None
    if m is not None:
        p_hat = replace(
            known,
            eta=min(max(eta_hat, 1e-9), 1.0),
            eps=max(eps_hat, 0.0),
            theta=theta_hat,
            phi=phi_hat,
        )
        var_theta = finite_size.var_theta_hat(p_hat, m)
        var_phi = finite_size.var_phi_hat(p_hat, m)
        var_delta = var_theta + var_phi
        var_eta = finite_size.var_transmission_hat(p_hat, m)
        var_eps = finite_size.var_noise_hat(p_hat.eta * p_hat.eps, m)

    return EstimationReport(
        theta_hat=theta_hat,
        phi_hat=phi_hat,
        delta_hat=theta_hat + phi_hat,
        crosscheck_delta=crosscheck,
        eta_bs_hat=eta_bs_hat,
        alpha_hat=alpha_hat,
        alpha_consistency=alpha_consistency,
        eta_hat=eta_hat,
        eps_hat=eps_hat,
        m=m,
        var_theta=var_theta,
        var_phi=var_phi,
        var_delta=var_delta,
        var_eta=var_eta,
        var_eps=var_eps,
    )


def shot_noise_normalize(
    frame: QuadratureFrame,
    v_elec: float,
    theta: float,
    phi: float,
    tau_x: float,
    tau_p: float,
) -> tuple[QuadratureFrame, float, float]:
    """Normalize Bob's columns to shot-noise units via the imbalance itself.

    The cross-correlation of Bob's quadratures carries the signal-plus-noise
    power scaled by sin(theta + phi); subtracting it (and the electronic
    noise) from each measured variance leaves the shot-noise level

        V_N^x = V_B^x - eta tau_x (signal + noise) - V_elec,

    estimated as V_B^x + sqrt(tau_x / tau_p) sigma_BB / sin(theta + phi)
    - V_elec.  Bob's columns are divided by sqrt(V_N).  Requires a
    resolvable imbalance.
    """
    sin_delta = math.sin(theta + phi)
    if abs(sin_delta) <= _MIN_SIN_DELTA:
        raise NormalizationError("imbalance too small for shot-noise normalization")
    gamma = empirical_covariance(frame)
    power_x = -math.sqrt(tau_x / tau_p) * gamma.s_bx_bp / sin_delta
    power_p = -math.sqrt(tau_p / tau_x) * gamma.s_bx_bp / sin_delta
    v_n_x = gamma.v_bx - power_x - v_elec
    v_n_p = gamma.v_bp - power_p - v_elec
    if v_n_x <= 0.0 or v_n_p <= 0.0:
        raise NormalizationError(
            f"normalization failed: non-positive shot noise ({v_n_x:.6g}, {v_n_p:.6g})"
        )
    meta = replace(frame.meta, in_snu=True)
    normalized = QuadratureFrame(
        x_a=frame.x_a.copy(),
        p_a=frame.p_a.copy(),
        x_b=frame.x_b / math.sqrt(v_n_x),
        p_b=frame.p_b / math.sqrt(v_n_p),
        meta=meta,
        transformed=frame.transformed,
    )
    return normalized, v_n_x, v_n_p
