"""Truncated universal model on the Hilbert space with orthonormal basis ``f_alpha``.

The basis is all words of length at most N in graded-lex order.  In this
basis ``M_{f_j}`` is the left creation operator ``e_beta -> e_{j beta}``,
``R_j`` the right creation operator ``e_beta -> e_{beta j}``, and
``M_{Z_i} = sum_alpha a^{(i)}_alpha M_{f_alpha}`` where ``a^{(i)}`` are the
coefficients of the inverse tuple ``g``.

All three families raise degree, so their compressions to the degree ``<= m``
corner are multiplicative: the corner of a product is the product of the
corners.  Identities that only involve these operators and their adjoints on
the right are therefore exact on the corner; identities with adjoints on the
left see the truncation and are reported with tail bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import cmatrix
from .errors import BoundaryError, ShapeError, ValidationError
from .evaluation import (
    TupleInstance,
    apply_tuple,
    defect_ops,
    eval_point,
    eval_series,
    geometric_tail,
    phi_iterates,
    word_products,
)
from .freewords import (
    Word,
    basis_offset,
    check_capacity,
    count_words_upto,
    words_upto,
)
from .nccalculus import invert
from .ncseries import NCTuple

EPS = np.finfo(float).eps


def _left_creation(n: int, N: int, j: int) -> sp.csr_matrix:
    rows, cols = [], []
    for k in range(N):
        size = n**k
        src = basis_offset(n, k) + np.arange(size)
        dst = basis_offset(n, k + 1) + (j - 1) * size + np.arange(size)
        rows.append(dst)
        cols.append(src)
    dim = count_words_upto(n, N)
    r = np.concatenate(rows) if rows else np.zeros(0, int)
    c = np.concatenate(cols) if cols else np.zeros(0, int)
    return sp.csr_matrix((np.ones(r.size, dtype=complex), (r, c)), shape=(dim, dim))


def _right_creation(n: int, N: int, j: int) -> sp.csr_matrix:
    rows, cols = [], []
    for k in range(N):
        size = n**k
        idx = np.arange(size)
        rows.append(basis_offset(n, k + 1) + idx * n + (j - 1))
        cols.append(basis_offset(n, k) + idx)
    dim = count_words_upto(n, N)
    r = np.concatenate(rows) if rows else np.zeros(0, int)
    c = np.concatenate(cols) if cols else np.zeros(0, int)
    return sp.csr_matrix((np.ones(r.size, dtype=complex), (r, c)), shape=(dim, dim))


def left_creations(n: int, N: int) -> list[sp.csr_matrix]:
    return [_left_creation(n, N, j) for j in range(1, n + 1)]


def right_creations(n: int, N: int) -> list[sp.csr_matrix]:
    return [_right_creation(n, N, j) for j in range(1, n + 1)]


@dataclass
class ModelMatrices:
    """Matrices of the truncated model.

    ``MZ`` is a dense ``(n, dim, dim)`` array; ``MF`` and ``R`` are lists of
    sparse 0/1 matrices.
    """

    n: int
    N: int
    g: NCTuple
    f: NCTuple
    MZ: np.ndarray
    MF: list
    R: list
    notes: list[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.MZ.shape[1]

    @property
    def basis(self) -> list[Word]:
        return words_upto(self.n, self.N)

    def degree_slice(self, k: int) -> slice:
        return slice(basis_offset(self.n, k), basis_offset(self.n, k + 1))

    def upto(self, m: int) -> int:
        """Number of basis vectors of degree at most ``m``."""
        return count_words_upto(self.n, m)

    def Q(self, k: int) -> sp.dia_matrix:
        """Orthogonal projection onto the degree-``k`` span."""
        diag = np.zeros(self.dim)
        diag[self.degree_slice(k)] = 1
        return sp.diags(diag)

    def gram(self) -> np.ndarray:
        """``G[i, j] = <Z_j, Z_i> = sum_alpha a^{(j)}_alpha conj(a^{(i)}_alpha)`` (stored part)."""
        cols = self.MZ[:, :, 0]  # column at g_0 holds the coefficients
        return cols.conj() @ cols.T


def build_model(g: NCTuple, N: int, f: NCTuple | None = None) -> ModelMatrices:
    """Assemble the degree-``N`` truncation of the model for ``g``.

    ``f`` (the inverse of ``g``) is computed by series inversion when not
    supplied; it is only needed for the shift relation.
    """
    n = g.n_vars
    if len(g) != n:
        raise ShapeError("g must have n components in n variables")
    if N < 0:
        raise ValidationError("N must be nonnegative")
    if np.any(g.constant_terms != 0):
        raise ValidationError("g(0) must be 0")
    if g.valid_degree < N:
        raise ValidationError(f"g known only through degree {g.valid_degree} < N={N}")
    dim = count_words_upto(n, N)
    check_capacity(dim * dim, "model matrix entries")
    MZ = np.zeros((n, dim, dim), dtype=complex)
    for i, gi in enumerate(g):
        for a in range(1, N + 1):
            if not gi.has_block(a):
                continue
            ga = gi.blocks[a]
            for b in range(0, N - a + 1):
                r0 = basis_offset(n, a + b)
                c0 = basis_offset(n, b)
                nb = n**b
                MZ[i, r0:r0 + n ** (a + b), c0:c0 + nb] = np.kron(ga[:, None], np.eye(nb))
    notes = []
    if f is None:
        if N >= 1:
            f = invert(g, N).inverse
        else:
            f = NCTuple.identity(n)
        notes.append("f obtained by inverting g")
    MZ.flags.writeable = False
    return ModelMatrices(n, N, g, f, MZ, left_creations(n, N), right_creations(n, N), notes)


def _coeff_tail_norm(gi, L: int) -> float:
    """``(sum_{|alpha| > L} |a_alpha|^2)^{1/2}``, extrapolating past the stored degree."""
    c = gi.degree_norms()
    sq = [x * x for x in c]
    if gi.polynomial:
        return math.sqrt(sum(sq[L + 1:]))
    return math.sqrt(geometric_tail(sq, L)) if L < len(sq) else math.sqrt(geometric_tail(sq, len(sq) - 1))


def _weighted_tail(gi, L: int, rho: float) -> float:
    """Bound on ``sum_{k > L} c_k rho^k`` for the coefficients of ``gi``."""
    c = gi.degree_norms()
    terms = [c[k] * rho**k for k in range(len(c))]
    if gi.polynomial:
        return float(sum(terms[L + 1:]))
    return geometric_tail(terms, min(L, len(terms) - 1))


@dataclass
class RelationDefects:
    cstar_defect: float
    shift_defect: float
    cstar_tail_bound: float
    shift_tail_bound: float
    interior_degree: int
    N: int
    gram: np.ndarray


def model_relation_defects(M: ModelMatrices, interior_degree: int) -> RelationDefects:
    """Defects of ``MZ_i^* MZ_j = <Z_j, Z_i> I`` and ``f_j(MZ) = MF_j`` on the degree ``<= m`` corner.

    The tail bound for the first relation bounds the difference between the
    truncated corner and the corner of the full operators:
    ``||P_m MZ_i^* (I - P_N) MZ_j P_m|| <= k tau_i tau_j`` with ``k`` the
    corner dimension and ``tau`` the coefficient mass beyond degree ``N - m``,
    plus the truncation error of the inner products.
    """
    m = interior_degree
    if m < 0 or m > M.N - 1:
        raise ValidationError(f"interior degree {m} too large for N={M.N}")
    k = M.upto(m)
    n = M.n
    G = M.gram()
    MZ = M.MZ
    cstar = 0.0
    for i in range(n):
        for j in range(n):
            prod = MZ[i].conj().T @ MZ[:, :, :k][j]
            corner = prod[:k, :] - G[i, j] * np.eye(k)
            cstar = max(cstar, cmatrix.operator_norm(corner))
    corner_tuple = TupleInstance(MZ[:, :k, :k])
    shift = 0.0
    for j, fj in enumerate(M.f):
        # the corner is nilpotent of index m + 1, so degree m + 1 is exact
        val = eval_series(fj, corner_tuple, None if fj.polynomial else min(m + 1, fj.max_degree)).value
        mf = M.MF[j][:k, :k].toarray()
        shift = max(shift, cmatrix.operator_norm(val - mf))
    tau_in = [_coeff_tail_norm(gi, M.N - m) for gi in M.g]
    tau_all = [_coeff_tail_norm(gi, M.N) for gi in M.g]
    scale = max(1.0, float(np.max(np.abs(G)))) if G.size else 1.0
    roundoff = 64 * EPS * M.dim * scale
    ct = max(k * tau_in[i] * tau_in[j] + tau_all[i] * tau_all[j]
             for i in range(n) for j in range(n)) + roundoff
    st = 64 * EPS * k * max(1.0, float(np.max(np.abs(MZ[:, :k, :k]))))
    return RelationDefects(cstar, shift, ct, st, m, M.N, G)


@dataclass
class PoissonVector:
    gamma: np.ndarray
    omega: np.ndarray
    s: float
    f_values: np.ndarray
    eval_tail: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.gamma))


def _conj_word_vector(w: np.ndarray, N: int) -> np.ndarray:
    """Entries ``conj(w_alpha)`` for all words ``|alpha| <= N`` in basis order."""
    wc = np.conj(w)
    parts = [np.ones(1, dtype=complex)]
    cur = parts[0]
    for _ in range(N):
        cur = np.multiply.outer(cur, wc).reshape(-1)
        parts.append(cur)
    return np.concatenate(parts)


def poisson_eigenvector(f: NCTuple, lam, N: int, tol: float = 1e-12) -> PoissonVector:
    """Truncated ``Gamma_lambda`` and ``Omega_lambda`` in basis order."""
    lam = np.asarray(lam, dtype=complex).reshape(-1)
    if lam.size != f.n_vars:
        raise ShapeError("point has the wrong number of coordinates")
    vals, tails = zip(*(eval_point(fi, lam) for fi in f))
    w = np.array(vals, dtype=complex)
    s = float(np.vdot(w, w).real)
    if s >= 1 - tol:
        raise BoundaryError(f"point not strictly inside: sum |f_i|^2 = {s:.6g}")
    check_capacity(count_words_upto(f.n_vars, N))
    omega = _conj_word_vector(w, N)
    gamma = math.sqrt(1 - s) * omega
    return PoissonVector(gamma, omega, s, w, max(tails))


@dataclass
class Defect:
    value: float
    tail_bound: float

    def __float__(self) -> float:
        return self.value

    @property
    def within(self) -> bool:
        return self.value <= self.tail_bound


def eigenvector_residual(M: ModelMatrices, lam, pv: PoissonVector | None = None) -> Defect:
    """``max_i ||MZ_i^* Gamma - conj(lam_i) Gamma|| / ||Gamma||`` over the whole truncation.

    Writing ``w`` for the computed ``f(lambda)``, the residual splits into a
    truncation part (rows of degree b miss the terms with ``|alpha| > N - b``,
    of size at most ``|Gamma_b| sum_{k > N-b} c_k rho^k`` with ``rho = |w|``)
    and ``|g_i(w) - lambda_i|``, which is evaluated directly.
    """
    lam = np.asarray(lam, dtype=complex).reshape(-1)
    if pv is None:
        pv = poisson_eigenvector(M.f, lam, M.N)
    gam = pv.gamma
    nrm = np.linalg.norm(gam)
    rho = math.sqrt(pv.s)
    worst, tail = 0.0, 0.0
    for i in range(M.n):
        r = M.MZ[i].conj().T @ gam - np.conj(lam[i]) * gam
        worst = max(worst, float(np.linalg.norm(r) / nrm))
        acc = 0.0
        for b in range(M.N + 1):
            acc += (1 - pv.s) * pv.s**b * _weighted_tail(M.g[i], M.N - b, rho) ** 2
        t = math.sqrt(acc) / nrm
        gw = eval_series(M.g[i], TupleInstance.scalar(pv.f_values),
                         None if M.g[i].polynomial else M.g[i].max_degree)
        t += abs(complex(gw.value[0, 0]) - lam[i]) + gw.tail_bound + 64 * EPS * M.dim
        tail = max(tail, t)
    return Defect(worst, tail)


def poisson_kernel_matrix(f: NCTuple, T: TupleInstance, N: int, degree: int | None = None) -> np.ndarray:
    """``K`` with block ``Delta [f(T)]_alpha^*`` at word ``alpha`` (rows grouped by word)."""
    fT, _ = apply_tuple(f, T, degree)
    delta, _ = defect_ops(f, T, degree)
    return kernel_from_values(fT, delta, N)


def kernel_from_values(fT: TupleInstance, delta: np.ndarray, N: int) -> np.ndarray:
    d = fT.d
    check_capacity(count_words_upto(fT.n, N) * d * d, "kernel entries")
    P = word_products(fT, N)
    blocks = [np.matmul(delta[None], Pk.conj().transpose(0, 2, 1)) for Pk in P]
    return np.concatenate(blocks, axis=0).reshape(-1, d)


def kernel_isometry_defect(f: NCTuple, T: TupleInstance, N: int, degree: int | None = None) -> float:
    """``||K^*K - (I - Phi^{N+1}(I))||``, an exact finite identity."""
    fT, _ = apply_tuple(f, T, degree)
    K = poisson_kernel_matrix(f, T, N, degree)
    target = np.eye(T.d) - phi_iterates(fT, N + 1)[-1]
    return cmatrix.operator_norm(K.conj().T @ K - target)


def intertwining_defect(f: NCTuple, g: NCTuple, T: TupleInstance, N: int,
                        m: int | None = None, degree: int | None = None) -> Defect:
    """``max_i ||K T_i^* - (MZ_i^* (x) I) K||`` on rows of degree ``<= m``.

    On row block ``beta`` the difference equals
    ``Delta f(T)_beta^* (T_i - g_i^{<= N-|beta|}(f(T)))^*``, so the tail bound
    is ``||K_beta||`` times the truncation error of ``g_i`` at ``f(T)``.
    """
    if m is None:
        m = N // 2
    if m > N - 1:
        raise ValidationError("interior degree must be below N")
    M = build_model(g, N, f)
    fT, _ = apply_tuple(f, T, degree)
    K = poisson_kernel_matrix(f, T, N, degree)
    d = T.d
    rows = M.upto(m) * d
    K3 = K.reshape(M.dim, d, d)
    r = fT.row_norm
    worst, tail = 0.0, 0.0
    for i in range(M.n):
        lhs = (K @ T[i].conj().T)[:rows]
        rhs = np.einsum("ab,akl->bkl", M.MZ[i].conj(), K3).reshape(-1, d)[:rows]
        worst = max(worst, cmatrix.operator_norm(lhs - rhs))
        gi_T = eval_series(g[i], fT, None if g[i].polynomial else g[i].max_degree)
        delta_i = cmatrix.operator_norm(T[i] - gi_T.value) + gi_T.tail_bound
        acc = 0.0
        for b in range(m + 1):
            sl = M.degree_slice(b)
            kb = K3[sl]
            nb = float(np.sqrt(np.sum(np.abs(kb) ** 2)))
            acc += (nb * (_weighted_tail(g[i], N - b, r) + delta_i)) ** 2
        tail = max(tail, math.sqrt(acc) + 64 * EPS * M.dim * d)
    return Defect(worst, tail)
