"""Composition, Jacobians and compositional inversion of series tuples.

Composition uses a Horner scheme over the word trie, batched over all
prefixes of a given length: with ``H_p[u] = f_u + sum_i G_i * H_{p+1}[u i]``
for every word ``u`` of length ``p``, the composition is ``H_0``.  When
``G(0) = 0`` each level multiplies by series of order at least one, so the
level-``p`` partial results only need degrees ``<= D - p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConstantTermError,
    NotInvertibleError,
    ShapeError,
    ValidationError,
)
from .freewords import check_capacity, count_words_upto, word_from_index
from .ncseries import INF, NCSeries, NCTuple, free_partial
from .cmatrix import sqrt_psd

SINGULAR_DET_RTOL = 1e-12


def _component_stack(G: NCTuple, D: int) -> list[np.ndarray | None]:
    """``out[a]`` is the ``(len(G), m**a)`` array of degree-a blocks, or None."""
    m = G.n_vars
    out: list[np.ndarray | None] = []
    for a in range(D + 1):
        if not any(g.has_block(a) for g in G):
            out.append(None)
            continue
        arr = np.zeros((len(G), m**a), dtype=complex)
        for i, g in enumerate(G):
            if g.has_block(a):
                arr[i] = g.blocks[a]
        out.append(arr)
    return out


def _horner(Gs, m: int, n_out: int, levels: dict, top: int, D: int, shifted: bool) -> dict:
    """Batched trie Horner evaluation.

    ``levels[p]`` maps an output degree ``b`` to an array of shape
    ``(n_out**p, m**b)``: the series attached to every word of length ``p``.
    Returns the level-0 dict ``{b: array(1, m**b)}``.
    """
    def cap(p):
        return D - p if shifted else D

    H = {b: arr for b, arr in sorted(levels.get(top, {}).items()) if b <= cap(top)}
    for p in range(top - 1, -1, -1):
        c = cap(p)
        new: dict[int, np.ndarray] = {}
        for b, arr in sorted(levels.get(p, {}).items()):
            if b <= c:
                new[b] = arr.astype(complex, copy=True)
        for b in sorted(H):
            Hr = H[b].reshape(n_out**p, n_out, m**b)
            for a, Ga in enumerate(Gs):
                if Ga is None or a + b > c:
                    continue
                # contrib[u, x, y] = sum_i Ga[i, x] * Hr[u, i, y]
                contrib = np.matmul(Ga.T[None, :, :], Hr).reshape(n_out**p, m ** (a + b))
                k = a + b
                if k in new:
                    new[k] += contrib
                else:
                    new[k] = contrib
        H = new
    return H


def _check_inner(F_n_vars: int, G: NCTuple) -> None:
    if len(G) != F_n_vars:
        raise ShapeError(f"outer series has {F_n_vars} variables but inner tuple has {len(G)} components")


def compose(F: NCSeries, G: NCTuple, degree: int) -> NCSeries:
    """Substitute ``G_i`` for ``Z_i`` in ``F`` and return the result through ``degree``.

    If any ``G_i`` has a nonzero constant term, ``F`` must be an exact
    polynomial; otherwise the substitution is not a finite computation.
    """
    _check_inner(F.n_vars, G)
    if degree < 0:
        raise ValidationError("degree must be nonnegative")
    m = G.n_vars
    shifted = not np.any(G.constant_terms != 0)
    if not shifted and not F.polynomial:
        raise ConstantTermError(
            "constant-term violation: inner tuple has G(0) != 0 and the outer series is not a polynomial")
    if shifted:
        valid = min(degree, F.valid_degree, G.valid_degree)
    else:
        valid = min(degree, G.valid_degree)
    D = int(valid)
    check_capacity(count_words_upto(m, D))
    n = F.n_vars
    fdeg = F.degree
    if fdeg < 0:
        return NCSeries.zero(m, D, polynomial=False)
    top = min(fdeg, D) if shifted else fdeg
    levels = {}
    for p in range(top + 1):
        if F.has_block(p):
            levels[p] = {0: F.blocks[p].reshape(n**p, 1)}
    Gs = _component_stack(G, D)
    H = _horner(Gs, m, n, levels, top, D, shifted)
    blocks: list = [None] * (D + 1)
    for b, arr in H.items():
        blocks[b] = arr.reshape(-1)
    exact_deg = max(fdeg, 0) * max((g.degree for g in G), default=0)
    poly = F.polynomial and G.polynomial and D >= exact_deg
    if poly:
        return NCSeries(m, blocks, D, True, prune=True).as_polynomial()
    return NCSeries(m, blocks, D, False, prune=True)


def compose_tuple(F: NCTuple, G: NCTuple, degree: int) -> NCTuple:
    return NCTuple([compose(f, G, degree) for f in F])


def substitute_directional(H: NCSeries, k: int, Y: NCSeries, G: NCTuple, degree: int) -> NCSeries:
    """``{(dH/dW_k)[Y]}`` evaluated at ``W = G``.

    Each occurrence of ``W_k`` in a word of ``H`` is replaced by ``Y`` while
    every other letter ``W_j`` is replaced by ``G_j``.  Requires ``G(0) = 0``.
    """
    _check_inner(H.n_vars, G)
    if np.any(G.constant_terms != 0):
        raise ConstantTermError("substitution requires G(0) = 0")
    n = H.n_vars
    m = G.n_vars
    if Y.n_vars != m:
        raise ShapeError("direction must live in the inner variables")
    valid_h = H.valid_degree - 1 + (Y.order if Y.order != INF else 0)
    D = int(min(degree, valid_h, Y.valid_degree, G.valid_degree + (Y.order if Y.order != INF else 0)))
    D = int(min(D, degree))
    check_capacity(count_words_upto(m, D))
    Gs = _component_stack(G, D)
    total: list = [None] * (D + 1)
    for length in range(1, min(H.degree, D + 1) + 1):
        if not H.has_block(length):
            continue
        T = H.blocks[length].reshape((n,) * length)
        for p in range(length):
            Tp = np.take(T, k - 1, axis=p).reshape(n**p, n ** (length - 1 - p))
            if not Tp.any():
                continue
            tail_len = length - 1 - p
            # S_u = sum_v Tp[u, v] G_v, batched over u: Horner with prefixes u
            # treated as extra batch rows.
            levels_v = {tail_len: {0: Tp.reshape(n**p * n**tail_len, 1)}}
            S = _horner_batched(Gs, m, n, levels_v, tail_len, D - p, n**p)
            # W_u = Y * S_u
            W: dict[int, np.ndarray] = {}
            for c in range(min(Y.max_degree, D - p) + 1):
                if not Y.has_block(c):
                    continue
                yb = Y.blocks[c]
                for s, arr in S.items():
                    if c + s > D - p:
                        continue
                    prod = np.einsum("x,uy->uxy", yb, arr).reshape(arr.shape[0], m ** (c + s))
                    W[c + s] = W[c + s] + prod if (c + s) in W else prod
            # sum_u G_u W_u
            R = _horner(Gs, m, n, {p: W}, p, D, True)
            for b, arr in R.items():
                v = arr.reshape(-1)
                total[b] = v if total[b] is None else total[b] + v
    return NCSeries(m, total, D, False, prune=True)


def _horner_batched(Gs, m, n_out, levels, top, D, batch):
    """Run :func:`_horner` independently for ``batch`` stacked leaf sets.

    Leaves have shape ``(batch * n_out**top, ...)``; returns per-batch
    level-0 arrays of shape ``(batch, m**b)``.
    """
    H = {b: arr for b, arr in levels[top].items() if b <= D - top}
    for p in range(top - 1, -1, -1):
        c = D - p
        new: dict[int, np.ndarray] = {}
        for b in sorted(H):
            Hr = H[b].reshape(batch * n_out**p, n_out, m**b)
            for a, Ga in enumerate(Gs):
                if Ga is None or a + b > c:
                    continue
                contrib = np.matmul(Ga.T[None, :, :], Hr).reshape(batch * n_out**p, m ** (a + b))
                k = a + b
                new[k] = new[k] + contrib if k in new else contrib
        H = new
    return {b: arr.reshape(batch, m**b) for b, arr in H.items()}


def chain_rule_rhs(H: NCSeries, G: NCTuple, i: int, degree: int) -> NCSeries:
    """``sum_k {(dH/dW_k)[dG_k/dZ_i]}`` at ``W = G``."""
    parts = []
    for k in range(1, H.n_vars + 1):
        Y = free_partial(G[k - 1], i)
        parts.append(substitute_directional(H, k, Y, G, degree))
    D = min(p.max_degree for p in parts)
    out = parts[0].truncate(D)
    for p in parts[1:]:
        out = out + p.truncate(D)
    return out


def jacobian0(F: NCTuple) -> np.ndarray:
    """Matrix of linear coefficients: entry ``(i, j)`` is the coefficient of ``Z_j`` in ``F_i``."""
    n = F.n_vars
    if len(F) != n:
        raise ShapeError(f"Jacobian needs {n} components, got {len(F)}")
    J = np.zeros((n, n), dtype=complex)
    for i, f in enumerate(F):
        if f.max_degree < 1 and not f.polynomial:
            raise ValidationError("component truncated below degree 1")
        if f.has_block(1):
            J[i] = f.blocks[1]
    return J


def _singular(J: np.ndarray) -> bool:
    n = J.shape[0]
    scale = float(np.max(np.linalg.norm(J, axis=1))) if n else 0.0
    if scale == 0.0:
        return True
    return abs(np.linalg.det(J)) < SINGULAR_DET_RTOL * scale**n


@dataclass
class InverseResult:
    """Compositional inverse together with its verification data."""

    inverse: NCTuple
    residual_fg: np.ndarray
    residual_gf: np.ndarray
    jacobian0: np.ndarray
    jacobian0_inverse: np.ndarray
    degree: int
    method: str
    notes: list[str] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return float(max(self.residual_fg.max(initial=0.0), self.residual_gf.max(initial=0.0)))


def identity_residuals(H: NCTuple, degree: int) -> np.ndarray:
    """Per-degree max |coefficient| of ``H - id``."""
    out = np.zeros(degree + 1)
    for i, h in enumerate(H):
        for k in range(degree + 1):
            b = h.block(k).copy()
            if k == 1:
                b[i] -= 1
            if b.size:
                out[k] = max(out[k], float(np.max(np.abs(b))))
    return out


def _invert_fixed_point(F: NCTuple, Jinv: np.ndarray, D: int) -> NCTuple:
    n = F.n_vars
    Q = NCTuple([NCSeries(n, [None, None] + list(f.blocks[2:D + 1]), D, False) for f in F])
    G = NCTuple([NCSeries(n, [None, Jinv[i]], D, False) for i in range(n)])
    if all(q.is_zero() for q in Q):
        return G
    for _ in range(D - 1):
        QG = compose_tuple(Q, G, D)
        blocks_per = [[None] * (D + 1) for _ in range(n)]
        for k in range(1, D + 1):
            stack = np.zeros((n, n**k), dtype=complex)
            for j, q in enumerate(QG):
                if q.has_block(k):
                    stack[j] = -q.blocks[k]
            if k == 1:
                stack += np.eye(n)
            newb = Jinv @ stack
            for i in range(n):
                blocks_per[i][k] = newb[i]
        G = NCTuple([NCSeries(n, blocks_per[i], D, False, prune=True) for i in range(n)])
    return G


def _invert_recursion(F: NCTuple, Jinv: np.ndarray, D: int) -> NCTuple:
    """The coefficient recursion, all words of one degree at a time.

    With ``B[m]`` the ``n x n**m`` matrix of degree-m coefficients of the
    inverse and ``A_k`` the ``n x n**k`` degree-k coefficients of ``F``,
    ``B[m] = -J^{-1} sum_{k=2}^{m} A_k W_k[m]`` where ``W_k[m]`` collects
    the degree-m parts of all k-fold products ``G_{j1} ... G_{jk}``.
    """
    n = F.n_vars
    fdeg = max(f.degree for f in F)
    A = {}
    for k in range(2, min(fdeg, D) + 1):
        Ak = np.zeros((n, n**k), dtype=complex)
        for i, f in enumerate(F):
            if f.has_block(k):
                Ak[i] = f.blocks[k]
        if Ak.any():
            A[k] = Ak
    kmax = max(A, default=1)
    B = {1: Jinv.copy()}
    W: dict[tuple[int, int], np.ndarray] = {(1, 1): B[1]}
    for m in range(2, D + 1):
        for k in range(2, min(m, kmax) + 1):
            acc = None
            for a in range(1, m - k + 2):
                prev = W.get((k - 1, m - a))
                if prev is None:
                    continue
                term = np.einsum("ia,jb->ijab", B[a], prev).reshape(n**k, n**m)
                acc = term if acc is None else acc + term
            if acc is not None:
                W[(k, m)] = acc
        S = np.zeros((n, n**m), dtype=complex)
        for k, Ak in A.items():
            if (k, m) in W:
                S += Ak @ W[(k, m)]
        B[m] = -Jinv @ S
        W[(1, m)] = B[m]
    comps = []
    for i in range(n):
        comps.append(NCSeries(n, [None] + [B[m][i] for m in range(1, D + 1)], D, False, prune=True))
    return NCTuple(comps)


def invert(F: NCTuple, degree: int, method: str = "fixed_point") -> InverseResult:
    """Compositional inverse of ``F`` through ``degree``.

    Parameters
    ----------
    F : NCTuple
        n components in n variables with ``F(0) = 0`` and invertible
        linear part.
    degree : int
        Truncation degree of the inverse.
    method : {"fixed_point", "recursion"}
        ``fixed_point`` iterates ``G <- J^{-1}(Z - Q(G))`` where ``Q`` is
        the nonlinear part of ``F``; ``recursion`` solves for the
        coefficients degree by degree.

    Raises
    ------
    NotInvertibleError
        If ``F(0) != 0`` or the linear part is singular.
    """
    n = F.n_vars
    if len(F) != n:
        raise ShapeError("inversion needs as many components as variables")
    if degree < 1:
        raise ValidationError("degree must be at least 1")
    if np.any(F.constant_terms != 0):
        raise NotInvertibleError("not invertible: F(0) != 0")
    J = jacobian0(F)
    if _singular(J):
        raise NotInvertibleError("not invertible: singular Jacobian")
    notes = []
    D = int(min(degree, F.valid_degree))
    if D < degree:
        notes.append(f"input known only through degree {D}; inverse truncated there")
    check_capacity(count_words_upto(n, D))
    Jinv = np.linalg.solve(J, np.eye(n))
    if method == "fixed_point":
        G = _invert_fixed_point(F, Jinv, D)
    elif method == "recursion":
        G = _invert_recursion(F, Jinv, D)
    else:
        raise ValidationError(f"unknown inversion method {method!r}")
    res_fg = identity_residuals(compose_tuple(F, G, D), D)
    res_gf = identity_residuals(compose_tuple(G, F, D), D)
    return InverseResult(G, res_fg, res_gf, J, Jinv, D, method, notes)


@dataclass
class PropertyAResult:
    verdict: str  # "holds" | "fails" | "inconclusive"
    degree_bound: int
    residuals: list[float]
    witness: dict | None
    reason: str


def property_A_check(p: NCTuple, degree_bound: int, tol: float = 1e-10) -> PropertyAResult:
    """Decide whether each ``Z_i`` lies in the span of ``{p_alpha : |alpha| <= D}``.

    A singular linear part certifies failure at every degree bound, because
    any polynomial inverse would force ``J_q(0) J_p(0) = I``.
    """
    n = p.n_vars
    if len(p) != n:
        raise ShapeError("property (A) needs an n-tuple in n variables")
    if not p.polynomial:
        raise ValidationError("property (A) check requires exact polynomials")
    if degree_bound < 0:
        raise ValidationError("degree bound must be nonnegative")
    J = jacobian0(p)
    if _singular(J):
        return PropertyAResult("fails", degree_bound, [], None,
                               "linear part is singular; no polynomial inverse can exist")
    pdeg = max(max(c.degree for c in p), 1)
    K = pdeg * degree_bound
    rows = count_words_upto(n, max(K, 1))
    check_capacity(rows)
    check_capacity(count_words_upto(n, degree_bound), "products p_alpha")
    layer = [NCSeries.constant(1, n)]
    products = list(layer)
    for _ in range(degree_bound):
        layer = [q * c for q in layer for c in p]
        products.extend(layer)
    Kmax = max(K, 1)
    M = np.zeros((rows, len(products)), dtype=complex)
    for j, q in enumerate(products):
        col = np.concatenate([q.block(k) if k <= q.max_degree else np.zeros(n**k, complex)
                              for k in range(Kmax + 1)])
        M[:, j] = col
    residuals = []
    witness = {}
    alphas = [()]
    for L in range(1, degree_bound + 1):
        alphas.extend(word_from_index(idx, n, L) for idx in range(n**L))
    for i in range(n):
        target = np.zeros(rows, dtype=complex)
        target[1 + i] = 1
        x, *_ = np.linalg.lstsq(M, target, rcond=None)
        r = float(np.max(np.abs(M @ x - target)))
        residuals.append(r)
        witness[i + 1] = {alphas[j]: complex(x[j]) for j in range(len(x)) if abs(x[j]) > 1e-12}
    if max(residuals) <= tol:
        return PropertyAResult("holds", degree_bound, residuals, witness,
                               "every Z_i is in the span")
    return PropertyAResult("inconclusive", degree_bound, residuals, None,
                           "span test failed at this degree bound")


def _ball_parts(lam: Sequence[complex]):
    lam = np.asarray(lam, dtype=complex).reshape(-1)
    s = float(np.vdot(lam, lam).real)
    if s >= 1:
        raise ValidationError("ball automorphism needs ||lambda|| < 1")
    delta = math.sqrt(1 - s)
    delta_star = sqrt_psd(np.eye(lam.size) - np.outer(lam.conj(), lam))
    return lam, delta, delta_star


def ball_automorphism_series(lam: Sequence[complex], degree: int) -> NCTuple:
    """Power series of the involutive automorphism exchanging ``0`` and ``lambda``."""
    lam, delta, delta_star = _ball_parts(lam)
    n = lam.size
    Z = NCTuple.identity(n, degree, polynomial=False)
    return ball_automorphism_apply(lam, Z, degree)


def ball_automorphism_apply(lam: Sequence[complex], G: NCTuple, degree: int) -> NCTuple:
    """Evaluate the automorphism on a series tuple ``G`` (any constant term).

    The resolvent ``(1 - sum conj(lam_i) G_i)^{-1}`` is expanded around its
    constant term, which is a nonzero scalar because ``|<G(0), lam>| < 1``
    whenever ``G(0)`` lies in the open ball.
    """
    from .ncseries import series_inverse, series_linear_combo

    lam, delta, delta_star = _ball_parts(lam)
    n = lam.size
    if len(G) != n:
        raise ShapeError("tuple length must match lambda")
    D = int(min(degree, G.valid_degree))
    Gt = [g.truncate(D) if g.max_degree > D or not g.polynomial else g for g in G]
    m = G.n_vars
    L = series_linear_combo([(lam[i].conjugate(), Gt[i]) for i in range(n)])
    one = NCSeries.constant(1, m)
    denom = (one - L)
    if abs(denom.constant_term) < 1e-14:
        raise NotInvertibleError("resolvent singular at the constant term")
    R = series_inverse(denom, D)
    out = []
    for j in range(n):
        row = series_linear_combo([(delta_star[i, j], Gt[i]) for i in range(n)])
        term = (R * row).truncate(D)
        out.append((NCSeries.constant(lam[j], m) - delta * term).truncate(D).as_truncated())
    return NCTuple(out)
