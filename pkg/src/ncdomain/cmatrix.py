"""Dense complex linear algebra.

Matrices are plain two-dimensional complex numpy arrays.  Everything here is
deterministic: LAPACK drivers are called with fixed options and no random
starting vectors are used.  ``psd_check`` cross-validates its eigenvalue
verdict with an independent pivoted Cholesky factorization.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    IndefiniteError,
    InternalInconsistencyError,
    NotHermitianError,
    ShapeError,
    SingularMatrixError,
    ValidationError,
)

EPS = np.finfo(float).eps
HERMITIAN_RTOL = 1e-10
PIVOT_RTOL = 1e-13
ABS_FLOOR = 1e-14
DEFAULT_TOL = 1e-9


def as_cmatrix(A) -> np.ndarray:
    M = np.array(A, dtype=complex)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise ShapeError("expected a two-dimensional matrix")
    if not np.all(np.isfinite(M)):
        raise ValidationError("matrix has non-finite entries")
    return M


def identity(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex)


def matmul(A, B) -> np.ndarray:
    A, B = as_cmatrix(A), as_cmatrix(B)
    if A.shape[1] != B.shape[0]:
        raise ShapeError(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def adjoint(A) -> np.ndarray:
    return as_cmatrix(A).conj().T


def _scale(A: np.ndarray) -> float:
    return float(np.max(np.abs(A))) if A.size else 0.0


def solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` by partial-pivoting LU, rejecting tiny pivots."""
    A = as_cmatrix(A)
    b = np.array(b, dtype=complex)
    if A.shape[0] != A.shape[1]:
        raise ShapeError("solve needs a square matrix")
    if b.shape[0] != A.shape[0]:
        raise ShapeError("right-hand side has the wrong length")
    if A.size == 0:
        return b.copy()
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrixError
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= PIVOT_RTOL * _scale(A):
        raise SingularMatrixError("matrix is singular to working precision")
    return sla.lu_solve((lu, piv), b, check_finite=False)


def inverse(A) -> np.ndarray:
    A = as_cmatrix(A)
    return solve(A, np.eye(A.shape[0], dtype=complex))


def operator_norm(A) -> float:
    """Largest singular value."""
    A = as_cmatrix(A)
    if A.size == 0:
        return 0.0
    return float(sla.svdvals(A, check_finite=False)[0])


def _hermitian_part(A: np.ndarray) -> np.ndarray:
    if A.shape[0] != A.shape[1]:
        raise ShapeError("expected a square matrix")
    asym = _scale(A - A.conj().T)
    if asym > max(HERMITIAN_RTOL * _scale(A), ABS_FLOOR):
        raise NotHermitianError(f"matrix is not Hermitian (asymmetry {asym:.3e})")
    return (A + A.conj().T) / 2


def hermitian_eigenvalues(A) -> np.ndarray:
    """Ascending real spectrum of a (numerically) Hermitian matrix."""
    H = _hermitian_part(as_cmatrix(A))
    if H.size == 0:
        return np.zeros(0)
    return sla.eigvalsh(H, check_finite=False)


def hermitian_eigh(A) -> tuple[np.ndarray, np.ndarray]:
    H = _hermitian_part(as_cmatrix(A))
    return sla.eigh(H, check_finite=False)


def pivoted_cholesky_psd(B: np.ndarray, atol: float) -> bool:
    """Semidefiniteness test by diagonally pivoted Cholesky.

    The factorization proceeds while the largest remaining diagonal entry
    exceeds ``atol``.  It then stops, and the remaining Schur complement
    must be negligible (for a PSD matrix its off-diagonal entries are bounded
    by its diagonal).
    """
    S = np.array(B, dtype=complex)
    S = (S + S.conj().T) / 2
    while S.shape[0]:
        d = S.diagonal().real
        j = int(np.argmax(d))
        if d[j] <= atol:
            return bool(d.min() >= -atol and np.max(np.abs(S)) <= 2 * atol)
        col = S[:, j].copy()
        keep = np.arange(S.shape[0]) != j
        S = S[np.ix_(keep, keep)] - np.outer(col[keep], col[keep].conj()) / d[j]
    return True


@dataclass(frozen=True)
class PSDResult:
    psd: bool
    min_eig: float
    max_eig: float
    threshold: float

    def __bool__(self) -> bool:
        return self.psd


def psd_check(A, tol: float = DEFAULT_TOL) -> PSDResult:
    """PSD verdict ``min_eig >= -tol * max(1, max_eig)``, double-checked.

    Raises
    ------
    NotHermitianError
        If ``A`` is not Hermitian within tolerance.
    InternalInconsistencyError
        If the eigenvalue and Cholesky routes disagree outside the
        ``+-tol`` band around the decision boundary.
    """
    A = as_cmatrix(A)
    ev = hermitian_eigenvalues(A)
    if ev.size == 0:
        return PSDResult(True, 0.0, 0.0, 0.0)
    lo, hi = float(ev[0]), float(ev[-1])
    tau = tol * max(1.0, hi)
    verdict = lo >= -tau
    n = A.shape[0]
    scale = max(1.0, float(np.max(np.abs(ev))))
    chol_tol = 64 * n * EPS * scale
    chol = pivoted_cholesky_psd(_hermitian_part(A) + tau * np.eye(n), chol_tol)
    if chol != verdict and abs(lo + tau) > tau + chol_tol:
        raise InternalInconsistencyError(
            f"eigenvalue and Cholesky PSD verdicts disagree (min_eig={lo:.3e})")
    return PSDResult(verdict, lo, hi, tau)


def sqrt_psd(A, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Hermitian PSD square root; slightly negative eigenvalues are clamped."""
    A = as_cmatrix(A)
    if A.size == 0:
        return A.copy()
    w, V = hermitian_eigh(A)
    hi = float(w[-1])
    if w[0] < -tol * max(1.0, abs(hi)):
        raise IndefiniteError(f"matrix is indefinite (min eigenvalue {w[0]:.3e})")
    r = np.sqrt(np.clip(w, 0, None))
    B = (V * r) @ V.conj().T
    return (B + B.conj().T) / 2


def psd_rank(A, tol: float = DEFAULT_TOL, scale: float | None = None) -> int:
    """Number of eigenvalues above ``tol * scale`` (``scale`` defaults to the top eigenvalue)."""
    ev = hermitian_eigenvalues(A)
    if ev.size == 0:
        return 0
    ref = float(ev[-1]) if scale is None else float(scale)
    return int(np.sum(ev > max(tol * ref, ABS_FLOOR)))
