"""Rank, curvature, characteristic functions and the factorization identity."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import cmatrix
from .errors import BoundaryError, NotInDomainError, ResolventError, ValidationError
from .evaluation import TupleInstance, apply_tuple, defects_of, eval_point, phi_iterates
from .freewords import basis_offset, check_capacity, count_words_upto
from .model import kernel_from_values, right_creations
from .ncseries import NCTuple

EPS = np.finfo(float).eps


def rank_f(f: NCTuple, T: TupleInstance, tol: float = cmatrix.DEFAULT_TOL,
           degree: int | None = None) -> int:
    """Rank of ``I - sum f_i(T) f_i(T)^*``, eigenvalues counted above ``tol``.

    The threshold is anchored to the identity term, so a defect that is zero
    up to roundoff has rank 0.
    """
    fT, _ = apply_tuple(f, T, degree)
    C = fT.row_matrix()
    return cmatrix.psd_rank(np.eye(T.d) - C @ C.conj().T, tol, scale=1.0)


def _denominators(n: int, m_max: int) -> list[int]:
    """``1 + n + ... + n^m`` by exact integer summation."""
    out, acc, p = [], 0, 1
    for _ in range(m_max + 1):
        acc += p
        out.append(acc)
        p *= n
    return out


@dataclass
class CurvatureReport:
    rank: int
    estimates: list[tuple[int, float]]
    extrapolated: float
    extrapolated_flag: bool
    traces: list[float]
    trace_limit: float | None
    agreement_gap: float
    via_theta: float | None = None
    via_theta_tail: float | None = None
    theta_gap: float | None = None
    notes: list[str] = field(default_factory=list)


def _dual_traces(A: TupleInstance, delta: np.ndarray, m_max: int) -> list[float]:
    """``sum_{|alpha| <= m} ||Delta A_alpha^*||_F^2`` via the dual recursion.

    ``Psi_k = sum_{|alpha|=k} A_alpha^* A_alpha`` obeys
    ``Psi_{k+1} = sum_i A_i^* Psi_k A_i``, and the Frobenius sum at level k is
    ``trace(Delta Psi_k Delta)``.
    """
    X = A.matrices
    Psi = np.eye(A.d, dtype=complex)
    out, acc = [], 0.0
    for _ in range(m_max + 1):
        acc += float(np.trace(delta @ Psi @ delta).real)
        out.append(acc)
        Psi = np.einsum("iba,bc,icd->ad", X.conj(), Psi, X)
        Psi = (Psi + Psi.conj().T) / 2
    return out


def _extrapolate(traces: list[float], d: int) -> tuple[float | None, bool, str]:
    """Fit ``t_m = c0 + c1 rho^m`` on the last five traces; returns ``(c0, ok, note)``."""
    if len(traces) < 5:
        return None, False, "fewer than five points"
    t = np.array(traces[-5:])
    diffs = np.diff(t)
    floor = 64 * EPS * max(1, d)
    if np.all(np.abs(diffs) <= floor):
        return float(t[-1]), True, "trace sequence has converged"
    if np.any(np.abs(diffs[:-1]) <= floor):
        return None, False, "irregular differences"
    ratios = diffs[1:] / diffs[:-1]
    if np.all((ratios >= 0) & (ratios < 1)) and np.ptp(ratios) <= 0.1 * max(ratios.max(), 1e-300):
        rho = float(ratios[-1])
        return float(t[-1] + diffs[-1] * rho / (1 - rho)), True, f"geometric fit rho={rho:.6g}"
    return None, False, "no stable ratio below 1"


def curvature(f: NCTuple, T: TupleInstance, m_max: int, tol: float = cmatrix.DEFAULT_TOL,
              degree: int | None = None, theta_degree: int | None = None) -> CurvatureReport:
    """Curvature quotients ``trace[I - Phi^{m+1}(I)] / (1 + n + ... + n^m)``.

    Two code paths produce the numerators: forward iteration of ``Phi`` on the
    identity, and the Poisson-kernel sums ``sum_{|alpha| <= m} ||Delta f(T)_alpha^*||^2``
    computed through the dual map.  In finite dimension the numerators are
    bounded by ``d`` so the limit is 0 whenever the fit is stable.
    """
    if m_max < 0:
        raise ValidationError("m_max must be nonnegative")
    fT, _ = apply_tuple(f, T, degree)
    if fT.row_norm > 1 + tol:
        raise NotInDomainError(f"f(T) is not a row contraction (norm {fT.row_norm:.6g})")
    n, d = fT.n, fT.d
    iters = phi_iterates(fT, m_max + 1)
    traces = [float(d - np.trace(iters[m + 1]).real) for m in range(m_max + 1)]
    delta, _ = defects_of(fT, tol)
    dual = _dual_traces(fT, delta, m_max)
    gap = max(abs(a - b) for a, b in zip(traces, dual))
    den = _denominators(n, m_max)
    estimates = [(m, traces[m] / den[m]) for m in range(m_max + 1)]
    c0, ok, note = _extrapolate(traces, d)
    if ok:
        extrapolated = 0.0
    else:
        extrapolated = estimates[-1][1]
    rank = rank_f(f, T, tol, degree)
    rep = CurvatureReport(rank, estimates, extrapolated, ok, traces, c0, gap,
                          notes=[note, "finite-dimensional evaluation"])
    if theta_degree is not None:
        v, tail = curvature_via_theta(f, T, theta_degree, tol, degree)
        rep.via_theta, rep.via_theta_tail = v, tail
        rep.theta_gap = abs(v - rep.extrapolated)
    return rep


@dataclass
class ThetaTruncation:
    matrix: np.ndarray
    N: int
    n: int
    d: int
    neumann_terms: int
    tail_bound: float
    fT: TupleInstance
    delta: np.ndarray
    delta_star: np.ndarray

    @property
    def dim(self) -> int:
        return count_words_upto(self.n, self.N)

    def range_rows(self, m: int) -> int:
        return count_words_upto(self.n, m) * self.d

    def domain_cols(self, m: int) -> int:
        return count_words_upto(self.n, m) * self.n * self.d


def theta_from_values(fT: TupleInstance, N: int, tol: float = cmatrix.DEFAULT_TOL) -> ThetaTruncation:
    """Assemble the characteristic function of the row contraction ``fT``."""
    n, d = fT.n, fT.d
    r = fT.row_norm
    if r >= 1 and not fT.is_nilpotent:
        raise ResolventError(f"resolvent not summable: row norm {r:.6g} >= 1")
    dim = count_words_upto(n, N)
    check_capacity(dim * d * dim * n * d, "theta entries")
    delta, delta_star = defects_of(fT, tol)
    R = right_creations(n, N)
    Id = sp.identity(dim, dtype=complex, format="csr")
    A = fT.matrices
    X = sp.csr_matrix((dim * d, dim * d), dtype=complex)
    L = sp.csr_matrix((dim * d, dim * n * d), dtype=complex)
    for i in range(n):
        X = X + sp.kron(R[i], sp.csr_matrix(A[i].conj().T), format="csr")
        sel = np.zeros((d, n * d), dtype=complex)
        sel[:, i * d:(i + 1) * d] = np.eye(d)
        L = L + sp.kron(R[i], sp.csr_matrix(sel), format="csr")
    Y = (L @ sp.kron(Id, sp.csr_matrix(delta_star), format="csr")).toarray()
    acc = Y.copy()
    term = Y
    base = max(np.linalg.norm(Y), 1e-300)
    used = 1
    for _ in range(N):
        term = X @ term
        nrm = np.linalg.norm(term)
        if nrm == 0:
            break
        acc += term
        used += 1
        if nrm <= 1e-14 * base:
            break
    row = np.concatenate(list(A), axis=1)
    theta = sp.kron(Id, sp.csr_matrix(delta), format="csr") @ acc
    theta = np.asarray(theta) - sp.kron(Id, sp.csr_matrix(row), format="csr").toarray()
    tail = 64 * EPS * dim * n * d * max(1.0, float(np.max(np.abs(theta))))
    return ThetaTruncation(theta, N, n, d, used, tail, fT, delta, delta_star)


def theta_truncation(f: NCTuple, T: TupleInstance, N: int, tol: float = cmatrix.DEFAULT_TOL,
                     degree: int | None = None) -> ThetaTruncation:
    """Characteristic function on the degree ``<= N`` truncation.

    The right creations and the factor ``I - sum R_i (x) f_i(T)^*`` raise
    degree, so the truncated assembly is the exact compression and the
    Neumann series terminates after at most ``N`` terms.
    """
    fT, _ = apply_tuple(f, T, degree)
    return theta_from_values(fT, N, tol)


def factorization_defect(f: NCTuple, T: TupleInstance, N: int, interior_degree: int,
                         tol: float = cmatrix.DEFAULT_TOL, degree: int | None = None) -> tuple[float, float]:
    """``||I - Theta Theta^* - K K^*||`` on the degree ``<= m`` corner.

    Returns ``(defect, tail_bound)``; the tail bound is a roundoff allowance
    because both factors are lower triangular in the degree grading and the
    corner is computed exactly.
    """
    m = interior_degree
    if m > N:
        raise ValidationError("interior degree exceeds N")
    th = theta_truncation(f, T, N, tol, degree)
    K = kernel_from_values(th.fT, th.delta, N)
    rows = th.range_rows(m)
    Tm = th.matrix[:rows]
    Km = K[:rows]
    D = np.eye(rows) - Tm @ Tm.conj().T - Km @ Km.conj().T
    defect = cmatrix.operator_norm(D)
    scale = max(1.0, cmatrix.operator_norm(Tm) ** 2 + cmatrix.operator_norm(Km) ** 2)
    return defect, 64 * EPS * th.matrix.shape[1] * scale


def curvature_via_theta(f: NCTuple, T: TupleInstance, N: int, tol: float = cmatrix.DEFAULT_TOL,
                        degree: int | None = None) -> tuple[float, float]:
    """``rank - sum_k n^{-k} trace(Q_k Theta (Q_0 (x) P_*) Theta^* Q_k)``.

    ``P_*`` projects onto the range of the column defect.  Returns the value
    and a one-sided tail: the true curvature lies in ``[value - tail, value]``.
    """
    th = theta_truncation(f, T, N, tol, degree)
    n, d = th.n, th.d
    w, V = cmatrix.hermitian_eigh(th.delta_star)
    keep = w > tol * max(w.max(initial=0.0), 1.0)
    P = V[:, keep]
    col0 = th.matrix[:, : n * d] @ P
    partial = 0.0
    mass = 0.0
    for k in range(N + 1):
        sl = slice(basis_offset(n, k) * d, basis_offset(n, k + 1) * d)
        blk = float(np.sum(np.abs(col0[sl]) ** 2))
        mass += blk
        partial += blk / n**k
    rank = rank_f(f, T, tol, degree)
    total = float(P.shape[1])
    tail = max(total - mass, 0.0) / n ** (N + 1) + 64 * EPS * th.matrix.shape[0]
    return rank - partial, tail


def characteristic_point(f: NCTuple, T: TupleInstance, z, tol: float = cmatrix.DEFAULT_TOL,
                         degree: int | None = None) -> np.ndarray:
    """Commutative symbol ``-f(T) + Delta (I - sum f_i(z) f_i(T)^*)^{-1} [f_1(z) I ... f_n(z) I] Delta_*``."""
    z = np.asarray(z, dtype=complex).reshape(-1)
    if z.size != f.n_vars:
        raise ValidationError("point has the wrong number of coordinates")
    w = np.array([eval_point(fi, z)[0] for fi in f])
    if float(np.vdot(w, w).real) >= 1:
        raise BoundaryError("point is not strictly inside the domain")
    fT, _ = apply_tuple(f, T, degree)
    delta, delta_star = defects_of(fT, tol)
    d = fT.d
    M = np.eye(d, dtype=complex) - np.einsum("i,iab->ab", w, fT.matrices.conj().transpose(0, 2, 1))
    try:
        Minv = cmatrix.inverse(M)
    except Exception as exc:
        raise ResolventError("resolvent singular at this point") from exc
    row = np.concatenate([wi * np.eye(d) for wi in w], axis=1)
    return -fT.row_matrix() + delta @ Minv @ row @ delta_star


def theta_multianalytic_defect(th: ThetaTruncation, m: int) -> float:
    """``max_i ||Theta (S_i (x) I) - (S_i (x) I) Theta||`` on the degree ``<= m`` corner."""
    from .model import left_creations
    n, d, N = th.n, th.d, th.N
    if m > N - 1:
        raise ValidationError("interior degree must be below N")
    S = left_creations(n, N)
    rows = th.range_rows(m)
    cols = th.domain_cols(m)
    worst = 0.0
    for Si in S:
        left = (sp.kron(Si, sp.identity(d), format="csr") @ th.matrix)
        right = (sp.kron(Si, sp.identity(n * d), format="csr").T @ th.matrix.T).T
        worst = max(worst, cmatrix.operator_norm(np.asarray(left - right)[:rows, :cols]))
    return worst
