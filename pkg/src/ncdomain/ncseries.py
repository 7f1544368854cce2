"""Truncated formal power series in noncommuting indeterminates.

Storage is dense per degree: the degree-k part of a series in n variables is
a complex vector of length ``n**k`` indexed by the lexicographic rank of the
word.  With this layout the coefficient block of a product ``u v`` is simply
the raveled outer product of the two blocks, and deleting or replacing a
letter at position p is an axis operation on the block reshaped as a
k-dimensional tensor.  The word-keyed view required by callers is exposed
through :attr:`NCSeries.coeffs`.

Truncation semantics: a series carries ``max_degree``; coefficients beyond it
are unknown, not zero.  A series flagged ``polynomial`` is exact, so its
valid degree is infinite and it may be substituted with tuples having a
nonzero constant term.
"""
from __future__ import annotations

import math
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ShapeError, ValidationError
from .freewords import (
    Word,
    as_word,
    check_capacity,
    count_words_upto,
    format_word,
    word_from_index,
    word_index,
)

PRUNE_RTOL = 1e-15
INF = math.inf


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class NCSeries:
    """A truncated noncommutative power series with complex coefficients.

    Parameters
    ----------
    n_vars : int
        Number of indeterminates.
    blocks : sequence
        ``blocks[k]`` is ``None`` (all zero) or an array of length ``n_vars**k``.
    max_degree : int
        Truncation degree.  For polynomials this is the stored degree bound.
    polynomial : bool
        Whether the stored coefficients are the complete series.
    prune : bool
        Apply the relative prune threshold.  Arithmetic results are pruned;
        directly supplied coefficients are retained as given.
    """

    __slots__ = ("_n", "_D", "_poly", "_blocks")

    def __init__(self, n_vars: int, blocks: Sequence, max_degree: int,
                 polynomial: bool = False, prune: bool = False):
        if n_vars < 1:
            raise ShapeError("n_vars must be at least 1")
        if max_degree < 0:
            raise ShapeError("max_degree must be nonnegative")
        self._n = int(n_vars)
        self._D = int(max_degree)
        self._poly = bool(polynomial)
        if len(blocks) > self._D + 1:
            extra = blocks[self._D + 1:]
            if any(b is not None and np.any(b) for b in extra):
                raise ShapeError("coefficients beyond max_degree")
            blocks = blocks[: self._D + 1]
        out: list[np.ndarray | None] = []
        for k, b in enumerate(blocks):
            if b is None:
                out.append(None)
                continue
            arr = np.array(b, dtype=complex).reshape(-1)
            if arr.shape[0] != self._n**k:
                raise ShapeError(f"degree-{k} block must have {self._n**k} entries")
            if not np.all(np.isfinite(arr)):
                raise ValidationError("non-finite coefficient")
            out.append(arr)
        out.extend([None] * (self._D + 1 - len(out)))
        if prune:
            scale = max((np.max(np.abs(b)) for b in out if b is not None), default=0.0)
            thr = PRUNE_RTOL * scale
            for k, b in enumerate(out):
                if b is None:
                    continue
                small = np.abs(b) < thr
                if small.any():
                    b[small] = 0
        self._blocks = tuple(None if (b is None or not b.any()) else _freeze(b) for b in out)

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_terms(cls, n_vars: int, terms: Mapping[Sequence[int], complex] | Iterable,
                   max_degree: int | None = None, polynomial: bool = False) -> "NCSeries":
        """Build from ``{word: coeff}`` or an iterable of ``(word, coeff)`` pairs.

        Repeated words are summed.  ``max_degree`` defaults to the longest word.
        """
        items = terms.items() if isinstance(terms, Mapping) else terms
        pairs = [(as_word(w, n_vars), complex(c)) for w, c in items]
        top = max((len(w) for w, _ in pairs), default=0)
        if max_degree is None:
            max_degree = top
        elif top > max_degree:
            raise ShapeError(f"word of length {top} exceeds max_degree {max_degree}")
        check_capacity(count_words_upto(n_vars, top))
        blocks: list[np.ndarray | None] = [None] * (max_degree + 1)
        for w, c in pairs:
            k = len(w)
            if blocks[k] is None:
                blocks[k] = np.zeros(n_vars**k, dtype=complex)
            blocks[k][word_index(w, n_vars)] += c
        return cls(n_vars, blocks, max_degree, polynomial)

    @classmethod
    def poly(cls, n_vars: int, terms) -> "NCSeries":
        """An exact polynomial."""
        return cls.from_terms(n_vars, terms, None, polynomial=True)

    @classmethod
    def zero(cls, n_vars: int, max_degree: int = 0, polynomial: bool = True) -> "NCSeries":
        return cls(n_vars, [], max_degree, polynomial)

    @classmethod
    def constant(cls, c: complex, n_vars: int, max_degree: int = 0,
                 polynomial: bool = True) -> "NCSeries":
        return cls(n_vars, [np.array([c], dtype=complex)], max_degree, polynomial)

    @classmethod
    def variable(cls, i: int, n_vars: int, max_degree: int = 1,
                 polynomial: bool = True) -> "NCSeries":
        if not 1 <= i <= n_vars:
            raise ValidationError(f"variable index {i} out of range")
        b = np.zeros(n_vars, dtype=complex)
        b[i - 1] = 1
        return cls(n_vars, [None, b], max(max_degree, 1), polynomial)

    # -- basic views ------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return self._n

    @property
    def max_degree(self) -> int:
        return self._D

    @property
    def polynomial(self) -> bool:
        return self._poly

    @property
    def valid_degree(self) -> float:
        """Highest degree through which the stored coefficients are exact."""
        return INF if self._poly else self._D

    @property
    def blocks(self) -> tuple:
        return self._blocks

    def block(self, k: int) -> np.ndarray:
        """Degree-``k`` coefficient vector (zeros when absent)."""
        if 0 <= k <= self._D and self._blocks[k] is not None:
            return self._blocks[k]
        if k > self._D and not self._poly:
            raise ValidationError(f"degree {k} beyond truncation {self._D}")
        return np.zeros(self._n**k, dtype=complex)

    def has_block(self, k: int) -> bool:
        return 0 <= k <= self._D and self._blocks[k] is not None

    @property
    def coeffs(self) -> dict[Word, complex]:
        """Nonzero coefficients keyed by word, in graded-lex order."""
        out: dict[Word, complex] = {}
        for k, b in enumerate(self._blocks):
            if b is None:
                continue
            for idx in np.flatnonzero(b):
                out[word_from_index(int(idx), self._n, k)] = complex(b[idx])
        return out

    def coeff(self, w: Sequence[int]) -> complex:
        w = as_word(w, self._n)
        k = len(w)
        if k > self._D:
            if self._poly:
                return 0j
            raise ValidationError(f"word of length {k} beyond truncation {self._D}")
        b = self._blocks[k]
        return 0j if b is None else complex(b[word_index(w, self._n)])

    @property
    def constant_term(self) -> complex:
        b = self._blocks[0]
        return 0j if b is None else complex(b[0])

    @property
    def degree(self) -> int:
        """Largest degree with a nonzero coefficient, or -1 for the zero series."""
        for k in range(self._D, -1, -1):
            if self._blocks[k] is not None:
                return k
        return -1

    @property
    def order(self) -> float:
        """Smallest degree with a nonzero coefficient (``inf`` for zero)."""
        for k, b in enumerate(self._blocks):
            if b is not None:
                return k
        return INF

    def is_zero(self) -> bool:
        return all(b is None for b in self._blocks)

    def degree_norms(self) -> np.ndarray:
        """``c_k = (sum_{|a|=k} |a_a|^2)^{1/2}`` for ``k = 0..max_degree``."""
        return np.array([0.0 if b is None else float(np.linalg.norm(b)) for b in self._blocks])

    def degree_max_abs(self) -> np.ndarray:
        return np.array([0.0 if b is None else float(np.max(np.abs(b))) for b in self._blocks])

    # -- reshaping --------------------------------------------------------

    def truncate(self, D: int) -> "NCSeries":
        """Drop degrees above ``D``.  Exact polynomials of degree ``<= D`` stay exact."""
        if D < 0:
            raise ValidationError("truncation degree must be nonnegative")
        if self._poly and self.degree <= D:
            return NCSeries(self._n, self._blocks[: D + 1], D, True, prune=False)
        if D > self._D:
            raise ValidationError(f"cannot extend a degree-{self._D} truncation to {D}")
        return NCSeries(self._n, self._blocks[: D + 1], D, False, prune=False)

    def as_truncated(self) -> "NCSeries":
        """Same coefficients, but forget exactness."""
        return NCSeries(self._n, self._blocks, self._D, False, prune=False)

    def as_polynomial(self) -> "NCSeries":
        """Declare the stored coefficients to be the whole series."""
        return NCSeries(self._n, self._blocks, max(self.degree, 0), True, prune=False)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, NCSeries):
            return series_linear_combo([(1, self), (1, other)])
        return series_linear_combo([(1, self), (1, NCSeries.constant(other, self._n))])

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, NCSeries):
            return series_linear_combo([(1, self), (-1, other)])
        return series_linear_combo([(1, self), (-1, NCSeries.constant(other, self._n))])

    def __rsub__(self, other):
        return series_linear_combo([(-1, self), (1, NCSeries.constant(other, self._n))])

    def __neg__(self):
        return self.scale(-1)

    def __mul__(self, other):
        if isinstance(other, NCSeries):
            return series_product(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, c):
        return self.scale(1 / complex(c))

    def scale(self, c: complex) -> "NCSeries":
        c = complex(c)
        return NCSeries(self._n, [None if b is None else c * b for b in self._blocks],
                        self._D, self._poly, prune=True)

    def conj_coeffs(self) -> "NCSeries":
        return NCSeries(self._n, [None if b is None else b.conj() for b in self._blocks],
                        self._D, self._poly, prune=False)

    # -- comparison / display ---------------------------------------------

    def max_abs_diff(self, other: "NCSeries", upto: int | None = None) -> float:
        """Largest coefficient difference through degree ``upto``."""
        if other.n_vars != self._n:
            raise ShapeError("n_vars mismatch")
        if upto is None:
            upto = int(min(self.valid_degree, other.valid_degree,
                           max(self._D, other.max_degree)))
        worst = 0.0
        for k in range(upto + 1):
            d = self.block(k) - other.block(k)
            if d.size:
                worst = max(worst, float(np.max(np.abs(d))))
        return worst

    def __repr__(self) -> str:
        return f"NCSeries({self})"

    def __str__(self) -> str:
        parts = []
        for w, c in self.coeffs.items():
            if c.imag == 0:
                cs = f"{c.real:g}"
            else:
                cs = f"({c.real:g}{c.imag:+g}j)"
            parts.append(f"{cs}*{format_word(w)}" if w else cs)
        body = " + ".join(parts) if parts else "0"
        return body if self._poly else f"{body} + O({self._D + 1})"


def _result_degree(valids: Iterable[float], exact_degree: int) -> tuple[int, bool]:
    v = min(valids, default=INF)
    if v == INF:
        return max(exact_degree, 0), True
    return int(v), False


def _check_same_n(series: Sequence[NCSeries]) -> int:
    ns = {s.n_vars for s in series}
    if len(ns) != 1:
        raise ShapeError(f"mismatched n_vars {sorted(ns)}")
    return ns.pop()


def series_linear_combo(terms: Sequence[tuple[complex, NCSeries]]) -> NCSeries:
    """Coefficientwise linear combination ``sum c_j F_j``."""
    if not terms:
        raise ValidationError("empty linear combination")
    series = [s for _, s in terms]
    n = _check_same_n(series)
    D, poly = _result_degree((s.valid_degree for s in series),
                             max(s.max_degree for s in series))
    blocks: list[np.ndarray | None] = [None] * (D + 1)
    for c, s in terms:
        c = complex(c)
        for k in range(min(D, s.max_degree) + 1):
            b = s.blocks[k]
            if b is None:
                continue
            if blocks[k] is None:
                blocks[k] = c * b
            else:
                blocks[k] = blocks[k] + c * b
    return NCSeries(n, blocks, D, poly, prune=True)


def series_product(F: NCSeries, G: NCSeries) -> NCSeries:
    """Noncommutative Cauchy product, truncated at the smaller valid degree."""
    n = _check_same_n([F, G])
    D, poly = _result_degree((F.valid_degree, G.valid_degree),
                             max(F.degree, 0) + max(G.degree, 0))
    check_capacity(count_words_upto(n, D))
    blocks: list[np.ndarray | None] = [None] * (D + 1)
    for a in range(min(F.max_degree, D) + 1):
        fa = F.blocks[a]
        if fa is None:
            continue
        for b in range(min(G.max_degree, D - a) + 1):
            gb = G.blocks[b]
            if gb is None:
                continue
            prod = np.multiply.outer(fa, gb).reshape(-1)
            k = a + b
            blocks[k] = prod if blocks[k] is None else blocks[k] + prod
    return NCSeries(n, blocks, D, poly, prune=True)


def series_power(F: NCSeries, k: int) -> NCSeries:
    out = NCSeries.constant(1, F.n_vars)
    for _ in range(k):
        out = series_product(out, F)
    return out


def series_inverse(F: NCSeries, degree: int | None = None) -> NCSeries:
    """Multiplicative inverse of a series with nonzero constant term."""
    c = F.constant_term
    if c == 0:
        raise ValidationError("multiplicative inverse needs a nonzero constant term")
    D = int(min(F.valid_degree, degree if degree is not None else F.max_degree))
    # 1/F = (1/c) sum_k (1 - F/c)^k, and 1 - F/c has no constant term
    H = (NCSeries.constant(1, F.n_vars) - F.truncate(D) / c).truncate(D).as_truncated()
    total = NCSeries.constant(1, F.n_vars, D, polynomial=False)
    power = total
    for _ in range(D):
        power = series_product(power, H)
        total = total + power
    return total / c


def free_partial(F: NCSeries, i: int) -> NCSeries:
    """Free partial derivative: delete each occurrence of ``Z_i``."""
    n = F.n_vars
    if not 1 <= i <= n:
        raise ValidationError(f"variable index {i} out of range 1..{n}")
    if not F.polynomial and F.max_degree < 1:
        raise ValidationError("derivative of a degree-0 truncation carries no information")
    D = max(F.max_degree - 1, 0)
    blocks: list[np.ndarray | None] = [None] * (D + 1)
    for k in range(1, F.max_degree + 1):
        b = F.blocks[k]
        if b is None:
            continue
        T = b.reshape((n,) * k)
        acc = np.zeros((n,) * (k - 1), dtype=complex)
        for p in range(k):
            acc += np.take(T, i - 1, axis=p)
        blocks[k - 1] = acc.reshape(-1)
    return NCSeries(n, blocks, D, F.polynomial, prune=True)


def directional_derivative(F: NCSeries, i: int, Y: NCSeries) -> NCSeries:
    """Replace each occurrence of ``Z_i`` in turn by ``Y`` and sum.

    If ``F`` is exact through ``M`` and ``Y`` has order ``o`` and is exact
    through ``V``, the result is exact through ``min(M - 1 + o, V)``.
    """
    n = _check_same_n([F, Y])
    if not 1 <= i <= n:
        raise ValidationError(f"variable index {i} out of range 1..{n}")
    if not F.polynomial and F.max_degree < 1:
        raise ValidationError("derivative of a degree-0 truncation carries no information")
    o = Y.order
    valid_f = F.valid_degree - 1 + (o if o != INF else 0)
    D, poly = _result_degree((valid_f, Y.valid_degree),
                             max(F.degree - 1, 0) + max(Y.degree, 0))
    check_capacity(count_words_upto(n, D))
    blocks: list[np.ndarray | None] = [None] * (D + 1)
    for k in range(1, F.max_degree + 1):
        b = F.blocks[k]
        if b is None:
            continue
        T = b.reshape((n,) * k)
        for p in range(k):
            Tp = np.take(T, i - 1, axis=p).reshape(n**p, n ** (k - 1 - p))
            if not Tp.any():
                continue
            for bd in range(min(Y.max_degree, D - (k - 1)) + 1):
                yb = Y.blocks[bd]
                if yb is None:
                    continue
                contrib = np.einsum("uv,w->uwv", Tp, yb).reshape(-1)
                t = k - 1 + bd
                blocks[t] = contrib if blocks[t] is None else blocks[t] + contrib
    return NCSeries(n, blocks, D, poly, prune=True)


def radius_estimate(F: NCSeries) -> float:
    """Finite-window estimate of the radius of convergence.

    The estimate fits ``log c_k`` against ``k`` over the upper half of the
    nonzero stored degrees (at least two) and returns ``exp(-slope)``; this
    is exact for geometric coefficient sequences.  With a single nonzero
    degree the root test ``c_k^{-1/k}`` is used.  Exact polynomials return
    ``inf``.
    """
    if F.polynomial:
        return INF
    c = F.degree_norms()
    ks = [k for k in range(1, len(c)) if c[k] > 0]
    if not ks:
        return INF
    if len(ks) == 1:
        k = ks[0]
        return float(c[k] ** (-1.0 / k))
    take = max(2, (len(ks) + 1) // 2)
    ks = ks[-take:]
    x = np.array(ks, dtype=float)
    y = np.log(c[ks])
    slope = np.polyfit(x, y, 1)[0]
    return float(math.exp(-slope))


def root_test_radius(F: NCSeries) -> float:
    """Conservative bound ``1 / max_k c_k^{1/k}`` over the stored window."""
    if F.polynomial:
        return INF
    c = F.degree_norms()
    vals = [c[k] ** (1.0 / k) for k in range(1, len(c)) if c[k] > 0]
    if not vals:
        return INF
    return float(1.0 / max(vals))


class NCTuple:
    """An ordered tuple of series in the same variables."""

    __slots__ = ("_components",)

    def __init__(self, components: Sequence[NCSeries]):
        comps = tuple(components)
        if not comps:
            raise ShapeError("a tuple needs at least one component")
        _check_same_n(comps)
        self._components = comps

    @classmethod
    def identity(cls, n: int, max_degree: int = 1, polynomial: bool = True) -> "NCTuple":
        return cls([NCSeries.variable(i, n, max_degree, polynomial) for i in range(1, n + 1)])

    @property
    def components(self) -> tuple[NCSeries, ...]:
        return self._components

    @property
    def n_vars(self) -> int:
        return self._components[0].n_vars

    @property
    def max_degree(self) -> int:
        return min(c.max_degree for c in self._components)

    @property
    def valid_degree(self) -> float:
        return min(c.valid_degree for c in self._components)

    @property
    def polynomial(self) -> bool:
        return all(c.polynomial for c in self._components)

    @property
    def constant_terms(self) -> np.ndarray:
        return np.array([c.constant_term for c in self._components])

    def __len__(self) -> int:
        return len(self._components)

    def __getitem__(self, i):
        return self._components[i]

    def __iter__(self):
        return iter(self._components)

    def truncate(self, D: int) -> "NCTuple":
        return NCTuple([c.truncate(D) for c in self._components])

    def max_abs_diff(self, other: "NCTuple", upto: int | None = None) -> float:
        if len(other) != len(self):
            raise ShapeError("tuple length mismatch")
        return max(a.max_abs_diff(b, upto) for a, b in zip(self, other))

    def __repr__(self) -> str:
        return "NCTuple(" + ", ".join(str(c) for c in self._components) + ")"
