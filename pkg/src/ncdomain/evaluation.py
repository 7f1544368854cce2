"""Evaluation of series at matrix tuples, defect operators and domain membership.

All evaluation is plain norm-convergent summation in graded-lex order.
Each result carries a tail bound built from the Cauchy-Schwarz row estimate
``||sum_{|a|=k} a_a X_a|| <= c_k r^k`` where ``c_k`` is the l2 norm of the
degree-k coefficients and ``r`` the row norm of ``X``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import cmatrix
from .errors import NotInDomainError, ShapeError, ValidationError
from .freewords import check_capacity
from .ncseries import INF, NCSeries, NCTuple, radius_estimate

RATIO_CAP = 0.95
EPS = np.finfo(float).eps


class TupleInstance:
    """An n-tuple of d x d complex matrices.

    Parameters
    ----------
    matrices : array_like
        Shape ``(n, d, d)``, or a sequence of square matrices.
    """

    def __init__(self, matrices):
        mats = [cmatrix.as_cmatrix(M) for M in matrices]
        if len({M.shape for M in mats}) > 1:
            raise ShapeError("tuple components must be square matrices of equal size")
        arr = np.array(mats, dtype=complex)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ShapeError("tuple components must be square matrices of equal size")
        if arr.shape[0] < 1:
            raise ShapeError("tuple needs at least one component")
        arr.flags.writeable = False
        self._m = arr
        self._row_norm: float | None = None
        self._nilpotent: bool | None = None
        self._cache: dict = {}

    @classmethod
    def scalar(cls, point: Sequence[complex]) -> "TupleInstance":
        return cls([[[complex(z)]] for z in point])

    @classmethod
    def zeros(cls, n: int, d: int) -> "TupleInstance":
        return cls(np.zeros((n, d, d), dtype=complex))

    @property
    def matrices(self) -> np.ndarray:
        return self._m

    @property
    def n(self) -> int:
        return self._m.shape[0]

    @property
    def d(self) -> int:
        return self._m.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i) -> np.ndarray:
        return self._m[i]

    def row_matrix(self) -> np.ndarray:
        """The d x nd block row ``[X_1 ... X_n]``."""
        return np.concatenate(list(self._m), axis=1)

    @property
    def row_norm(self) -> float:
        if self._row_norm is None:
            self._row_norm = cmatrix.operator_norm(self.row_matrix())
        return self._row_norm

    @property
    def is_nilpotent(self) -> bool:
        """True when all words of length ``d`` vanish exactly."""
        if self._nilpotent is None:
            prods = word_products(self, self.d, stop_at_zero=True)
            self._nilpotent = not prods[-1].any()
        return self._nilpotent

    def cached(self, key, compute):
        if key not in self._cache:
            self._cache[key] = compute()
        return self._cache[key]


def row_norm(X: TupleInstance) -> float:
    return X.row_norm


def word_products(X: TupleInstance, degree: int, stop_at_zero: bool = False) -> list[np.ndarray]:
    """``P[k][idx]`` is the product ``X_w`` for the word of lex rank ``idx`` and length ``k``.

    With ``stop_at_zero`` the list is cut after the first degree whose products
    all vanish exactly (so all longer words vanish as well).
    """
    n, d = X.n, X.d
    P = [np.eye(d, dtype=complex)[None, :, :]]
    for k in range(1, degree + 1):
        check_capacity(n**k * d * d, "word products")
        prev = P[-1]
        nxt = np.matmul(prev[:, None, :, :], X.matrices[None, :, :, :]).reshape(n**k, d, d)
        P.append(nxt)
        if stop_at_zero and not nxt.any():
            break
    return P


@dataclass
class EvalReport:
    value: np.ndarray
    degree_used: int
    tail_bound: float
    convergent_flag: bool
    exact: bool = False
    notes: list[str] = field(default_factory=list)


def geometric_tail(terms: Sequence[float], start: int) -> float:
    """Bound ``sum_{k > K} t_k`` from the stored terms ``t_start .. t_K``.

    The stored terms after ``start`` are summed outright; the remainder is a
    geometric extrapolation with the per-degree ratio between the last
    stored term ``t_K`` and the last nonzero term before it.  A ratio above
    the cap gives ``inf``, as does a lone nonzero final term.
    """
    terms = list(terms)
    K = len(terms) - 1
    stored = float(sum(terms[start + 1:]))
    earlier = [k for k in range(K) if terms[k] > 0]
    if terms[K] == 0:
        # trailing zeros: the fitted ratio is 0
        return stored
    if not earlier:
        return INF
    a = earlier[-1]
    q = (terms[K] / terms[a]) ** (1.0 / (K - a))
    if q >= 1 or q > RATIO_CAP:
        return INF
    return stored + terms[K] * q / (1 - q)


def eval_series(F: NCSeries, X: TupleInstance, degree: int | None = None) -> EvalReport:
    """Partial sum of ``F`` at ``X`` through ``degree`` with a certified tail bound."""
    if F.n_vars != X.n:
        raise ShapeError(f"series in {F.n_vars} variables evaluated at a {X.n}-tuple")
    if degree is None:
        degree = max(F.degree, 0) if F.polynomial else F.max_degree
    if degree > F.max_degree and not F.polynomial:
        raise ValidationError(f"degree {degree} beyond the series truncation {F.max_degree}")
    top = min(degree, max(F.degree, 0))
    P = word_products(X, top, stop_at_zero=True)
    d = X.d
    value = np.zeros((d, d), dtype=complex)
    for k, Pk in enumerate(P):
        if F.has_block(k):
            value += np.tensordot(F.blocks[k], Pk, axes=1)
    nilpotent = len(P) <= top or (len(P) > 0 and not P[-1].any())
    notes = ["finite-dimensional evaluation"]
    if F.degree <= degree and F.polynomial:
        return EvalReport(value, degree, 0.0, True, True, notes)
    if nilpotent:
        notes.append("word products vanish beyond the evaluated degree")
        return EvalReport(value, degree, 0.0, True, True, notes)
    r = X.row_norm
    conv = r < radius_estimate(F)
    if not conv:
        notes.append("row norm not inside the estimated radius of convergence")
        return EvalReport(value, degree, INF, False, False, notes)
    c = F.degree_norms()
    terms = [c[k] * r**k for k in range(len(c))]
    if F.polynomial:
        tail = float(sum(terms[degree + 1:]))
    else:
        tail = geometric_tail(terms, degree)
    # roundoff of the summation itself
    tail += 16 * EPS * float(sum(terms[: degree + 1])) * max(1, d)
    return EvalReport(value, degree, tail, True, False, notes)


def eval_point(F: NCSeries, point: Sequence[complex], degree: int | None = None) -> tuple[complex, float]:
    """Scalar evaluation; returns ``(value, tail_bound)``."""
    rep = eval_series(F, TupleInstance.scalar(point), degree)
    return complex(rep.value[0, 0]), rep.tail_bound


def apply_tuple(f: NCTuple, T: TupleInstance, degree: int | None = None) -> tuple[TupleInstance, list[EvalReport]]:
    """``f(T)`` as a new tuple, cached on ``T`` per (f, degree)."""
    def compute():
        reps = [eval_series(fi, T, degree) for fi in f]
        return TupleInstance([r.value for r in reps]), reps
    return T.cached(("apply", id(f), degree), compute)


def _tail_row(reps: Sequence[EvalReport]) -> float:
    return math.sqrt(sum(r.tail_bound**2 for r in reps)) if all(
        math.isfinite(r.tail_bound) for r in reps) else INF


def phi_map(fT: TupleInstance, Y: np.ndarray) -> np.ndarray:
    """``Phi(Y) = sum_i A_i Y A_i^*``."""
    A = fT.matrices
    return np.einsum("iab,bc,idc->ad", A, Y, A.conj())


def phi_iterates(fT: TupleInstance, m: int) -> list[np.ndarray]:
    """``[Phi^0(I), Phi^1(I), ..., Phi^m(I)]``."""
    Y = np.eye(fT.d, dtype=complex)
    out = [Y]
    for _ in range(m):
        Y = phi_map(fT, Y)
        Y = (Y + Y.conj().T) / 2
        out.append(Y)
    return out


def purity_measure(f: NCTuple, T: TupleInstance, m: int, degree: int | None = None) -> float:
    """``||Phi^m(I)||`` for ``Phi(Y) = sum f_i(T) Y f_i(T)^*``."""
    fT, _ = apply_tuple(f, T, degree)
    return cmatrix.operator_norm(phi_iterates(fT, m)[-1])


def _defect_root(A: np.ndarray, slack: float, what: str) -> np.ndarray:
    w, V = cmatrix.hermitian_eigh(A)
    if w.size and w[0] < -slack:
        raise NotInDomainError(f"not in closed domain: {what} defect has eigenvalue {w[0]:.3e}")
    r = np.sqrt(np.clip(w, 0, None))
    B = (V * r) @ V.conj().T
    return (B + B.conj().T) / 2


def defect_ops(f: NCTuple, T: TupleInstance, degree: int | None = None,
               tol: float = cmatrix.DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Row defect ``(I - sum f_i f_i^*)^{1/2}`` (d x d) and column defect (nd x nd)."""
    fT, reps = apply_tuple(f, T, degree)
    return defects_of(fT, tol, _tail_row(reps))


def defects_of(A: TupleInstance, tol: float = cmatrix.DEFAULT_TOL, tail: float = 0.0):
    """Defect operators of a row contraction given directly."""
    d, n = A.d, A.n
    C = A.row_matrix()
    r = cmatrix.operator_norm(C)
    slack = tol * max(1.0, r * r) + (2 * r * tail + tail * tail if math.isfinite(tail) else INF)
    row = np.eye(d, dtype=complex) - C @ C.conj().T
    col = np.eye(n * d, dtype=complex) - C.conj().T @ C
    return _defect_root(row, slack, "row"), _defect_root(col, slack, "column")


@dataclass
class MembershipReport:
    in_domain: bool | None
    strict: bool | None
    pure: bool
    residual_gfT: float
    norm_fT: float
    tails: dict
    purity: float
    verdict: str
    notes: list[str] = field(default_factory=list)


def _ternary_le(value: float, tail: float, bound: float) -> bool | None:
    if value + tail <= bound:
        return True
    if value - tail > bound:
        return False
    return None


def _lipschitz(g: NCTuple, r: float, eps: float) -> float:
    """Bound on ``||g(Y + E) - g(Y)||`` for ``||Y|| <= r``, ``||E|| <= eps``."""
    if eps == 0:
        return 0.0
    if not math.isfinite(eps):
        return INF
    s = r + eps
    worst = 0.0
    for gi in g:
        c = gi.degree_norms()
        terms = [k * c[k] * s ** (k - 1) for k in range(1, len(c))]
        tail = geometric_tail([0.0] + terms, len(terms)) if not gi.polynomial else 0.0
        worst = max(worst, (sum(terms) + tail) * eps)
    return worst


def domain_membership(f: NCTuple, g: NCTuple, T: TupleInstance, degree: int | None = None,
                      tol: float = cmatrix.DEFAULT_TOL) -> MembershipReport:
    """Check ``g(f(T)) = T`` and ``||f(T)|| <= 1`` with ternary verdicts.

    ``pure`` is true when ``||Phi^m(I)||`` at ``m = degree`` is below ``tol``
    or when ``f(T)`` is a strict row contraction, which forces
    ``Phi^m(I) -> 0``.
    """
    if len(f) != T.n or len(g) != T.n:
        raise ShapeError("f, g and T must have the same number of components")
    fT, reps_f = apply_tuple(f, T, degree)
    tail_f = _tail_row(reps_f)
    norm_fT = fT.row_norm
    reps_g = [eval_series(gi, fT, degree) for gi in g]
    resid = max(cmatrix.operator_norm(rg.value - T[i]) for i, rg in enumerate(reps_g))
    tail_g = max(rg.tail_bound for rg in reps_g)
    tail_res = tail_g + _lipschitz(g, norm_fT, tail_f)
    norm_ok = _ternary_le(norm_fT, tail_f, 1 + tol)
    if tail_res <= tol:
        resid_ok = resid <= tol + tail_res
    else:
        resid_ok = False if resid - tail_res > tol else None
    if norm_ok is False or resid_ok is False:
        in_domain = False
    elif norm_ok and resid_ok:
        in_domain = True
    else:
        in_domain = None
    strict_norm = _ternary_le(norm_fT, tail_f, 1 - tol)
    if in_domain is False:
        strict = False
    elif in_domain is True and strict_norm is True:
        strict = True
    elif strict_norm is False:
        strict = False
    else:
        strict = None
    m = degree if degree is not None else 6
    purity = cmatrix.operator_norm(phi_iterates(fT, m)[-1])
    pure = purity < tol or (norm_fT + tail_f < 1)
    verdict = {True: "in", False: "out", None: "inconclusive"}[in_domain]
    tails = {"f_of_T": tail_f, "g_of_f_of_T": tail_g, "residual": tail_res}
    return MembershipReport(in_domain, strict, pure, resid, norm_fT, tails, purity, verdict,
                            ["finite-dimensional evaluation"])
