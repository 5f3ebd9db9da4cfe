"""Gaussian-state linear algebra: symplectic spectra, entropies, conditioning.

All covariance matrices are plain ``numpy`` arrays in shot-noise units
(vacuum variance = 1), quadrature ordering ``(x_1, p_1, x_2, p_2, ...)``.
The measured-data matrix of one Alice/Bob link gets a thin wrapper,
:class:`CovMat4`, with named block access.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Absolute tolerance for physicality checks (positive definiteness,
#: symplectic eigenvalues below 1).  Matrices here are 2x2/4x4/6x6 in SNU,
#: so double precision leaves ample headroom.
PHYSICALITY_TOL = 1e-9

_SYMMETRY_RTOL = 1e-12


class SingularConditioningError(ValueError):
    """Conditioning block is singular; carries the offending matrix."""

    def __init__(self, message: str, matrix: np.ndarray):
        super().__init__(message)
        self.matrix = matrix


def _as_sym_matrix(mat: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate a symmetric, even-dimensional real matrix and return float64."""
    arr = np.asarray(mat, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    dim = arr.shape[0]
    if dim % 2 != 0 or dim == 0:
        raise ValueError(f"{name} dimension must be a positive even number, got {dim}")
    scale = max(1.0, float(np.abs(arr).max()))
    if not np.allclose(arr, arr.T, rtol=0.0, atol=_SYMMETRY_RTOL * scale):
        raise ValueError(f"{name} is not symmetric within tolerance")
    return 0.5 * (arr + arr.T)


def symplectic_form(n_modes: int) -> np.ndarray:
    """Standard symplectic form, direct sum of [[0, 1], [-1, 0]] blocks."""
    omega = np.zeros((2 * n_modes, 2 * n_modes))
    for k in range(n_modes):
        omega[2 * k, 2 * k + 1] = 1.0
        omega[2 * k + 1, 2 * k] = -1.0
    return omega


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of a quantum covariance matrix.

    Parameters
    ----------
    cov : ndarray
        Positive-definite symmetric matrix of dimension 2N (N modes).

    Returns
    -------
    ndarray
        The N symplectic eigenvalues, sorted ascending, each >= 1.
        Values within ``PHYSICALITY_TOL`` below 1 are clipped to 1 so that
        numerically pure states do not produce NaN downstream.

    Raises
    ------
    ValueError
        If ``cov`` is not positive definite ("not a valid quantum
        covariance") or an eigenvalue falls below 1 beyond tolerance
        ("unphysical state").

    Notes
    -----
    Computed from the ordinary eigenvalues of ``Omega @ cov`` (purely real
    arithmetic): they come in +/- i*nu pairs, so the moduli are taken and
    deduplicated by averaging adjacent sorted pairs.
    """
    arr = _as_sym_matrix(cov, "covariance")
    dim = arr.shape[0]
    if np.linalg.eigvalsh(arr).min() <= 0.0:
        raise ValueError("not a valid quantum covariance (matrix is not positive definite)")
    omega = symplectic_form(dim // 2)
    moduli = np.sort(np.abs(np.linalg.eigvals(omega @ arr)))
    nus = 0.5 * (moduli[0::2] + moduli[1::2])
    if np.any(nus < 1.0 - PHYSICALITY_TOL):
        raise ValueError(
            f"unphysical state: symplectic eigenvalue {nus.min():.12g} < 1"
        )
    return np.maximum(nus, 1.0)


def g_entropy(x: float) -> float:
    """Bosonic entropy function (x+1)log2(x+1) - x log2(x), in bits.

    The x = 0 limit is 0.  Negative input is a domain error.
    """
    if x < 0:
        raise ValueError(f"g_entropy requires a non-negative argument, got {x}")
    if x == 0:
        return 0.0
    return float((x + 1.0) * np.log2(x + 1.0) - x * np.log2(x))


def von_neumann_entropy(cov: np.ndarray) -> float:
    """Von Neumann entropy (bits) of the Gaussian state with covariance ``cov``."""
    return sum(g_entropy((nu - 1.0) / 2.0) for nu in symplectic_eigenvalues(cov))


def schur_condition(
    cov: np.ndarray,
    measured: tuple[int, ...],
    regularizer: np.ndarray | None = None,
) -> np.ndarray:
    """Condition a covariance matrix on measurement of a subset of rows.

    Returns ``gamma_kept - gamma_C (gamma_meas + regularizer)^-1 gamma_C^T``.
    A zero regularizer performs classical (data) conditioning; an identity
    regularizer performs ideal dual-homodyne conditioning on a quantum mode.

    Parameters
    ----------
    cov : ndarray
        Full symmetric covariance matrix.
    measured : tuple of int
        Indices of the measured rows/columns.
    regularizer : ndarray, optional
        Symmetric matrix added to the measured block before inversion.
        Defaults to zero.

    Raises
    ------
    SingularConditioningError
        If the regularized measured block cannot be inverted; the exception
        carries the offending block as ``.matrix``.
    """
    arr = _as_sym_matrix(cov, "covariance")
    dim = arr.shape[0]
    measured = tuple(measured)
    if any(i < 0 or i >= dim for i in measured):
        raise ValueError(f"measured indices {measured} out of range for dim {dim}")
    kept = tuple(i for i in range(dim) if i not in measured)
    g_meas = arr[np.ix_(measured, measured)]
    if regularizer is not None:
        g_meas = g_meas + np.asarray(regularizer, dtype=float)
    g_kept = arr[np.ix_(kept, kept)]
    g_cross = arr[np.ix_(kept, measured)]
    try:
        solved = np.linalg.solve(g_meas, g_cross.T)
    except np.linalg.LinAlgError as exc:
        raise SingularConditioningError(
            f"singular conditioned block: {exc}", g_meas
        ) from exc
    if not np.all(np.isfinite(solved)):
        raise SingularConditioningError("singular conditioned block", g_meas)
    out = g_kept - g_cross @ solved
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class CovMat4:
    """4x4 measured-data covariance matrix, ordering (x_a, p_a, x_B, p_B).

    Attributes
    ----------
    mat : ndarray
        The symmetric positive-semidefinite matrix itself (read-only).
    transformed : bool
        True once a compensating local transformation has been pushed onto
        the matrix.  Security entry points use this to refuse symmetrizing
        after a transformation.
    """

    mat: np.ndarray
    transformed: bool = field(default=False)

    def __post_init__(self):
        arr = _as_sym_matrix(self.mat, "CovMat4")
        if arr.shape != (4, 4):
            raise ValueError(f"CovMat4 must be 4x4, got {arr.shape}")
        if np.any(np.diag(arr) < 0):
            raise ValueError("CovMat4 diagonal entries must be non-negative")
        scale = max(1.0, float(np.abs(arr).max()))
        if np.linalg.eigvalsh(arr).min() < -PHYSICALITY_TOL * scale:
            raise ValueError("CovMat4 must be positive semidefinite")
        arr.flags.writeable = False
        object.__setattr__(self, "mat", arr)

    # Block accessors: gamma_A rows/cols {0,1}, gamma_B {2,3}, gamma_C cross.
    @property
    def gamma_a(self) -> np.ndarray:
        return self.mat[:2, :2]

    @property
    def gamma_b(self) -> np.ndarray:
        return self.mat[2:, 2:]

    @property
    def gamma_c(self) -> np.ndarray:
        return self.mat[:2, 2:]

    # Named entries, following the (x_a, p_a, x_B, p_B) ordering.
    @property
    def v_ax(self) -> float:
        return float(self.mat[0, 0])

    @property
    def v_ap(self) -> float:
        return float(self.mat[1, 1])

    @property
    def v_bx(self) -> float:
        return float(self.mat[2, 2])

    @property
    def v_bp(self) -> float:
        return float(self.mat[3, 3])

    @property
    def sigma_x(self) -> float:
        """Co-variance <x_a x_B>."""
        return float(self.mat[0, 2])

    @property
    def sigma_p(self) -> float:
        """Co-variance <p_a p_B>."""
        return float(self.mat[1, 3])

    @property
    def s_ax_ap(self) -> float:
        """Cross-correlation <x_a p_a>."""
        return float(self.mat[0, 1])

    @property
    def s_ax_bp(self) -> float:
        """Cross-correlation <x_a p_B>."""
        return float(self.mat[0, 3])

    @property
    def s_ap_bx(self) -> float:
        """Cross-correlation <p_a x_B>."""
        return float(self.mat[1, 2])

    @property
    def s_bx_bp(self) -> float:
        """Cross-correlation <x_B p_B>."""
        return float(self.mat[2, 3])

    def replace_mat(self, mat: np.ndarray, transformed: bool | None = None) -> "CovMat4":
        """New CovMat4 with a different matrix, keeping the flag by default."""
        return CovMat4(mat, self.transformed if transformed is None else transformed)
