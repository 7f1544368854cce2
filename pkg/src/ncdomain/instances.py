"""Built-in example instances and seeded random generators."""
from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .freewords import words_upto
from .nccalculus import ball_automorphism_series
from .ncseries import NCSeries, NCTuple


def _var(i: int, n: int) -> NCSeries:
    return NCSeries.variable(i, n)


def ex2(a=(0.5, 1.0, 2.0, 1.0), b=(-1.0, 1.0, 0.5, 3.0), c=(0.25, 1.0)) -> NCTuple:
    """Triangular polynomial triple in three variables.

    ``p1 = a0 + a1 Z1 + a2 Z2 + a3 Z3 Z2``, ``p2 = b0 + b1 Z2 + b2 Z3 + b3 Z3^2``,
    ``p3 = c0 + c1 Z3``.
    """
    n = 3
    p1 = NCSeries.poly(n, {(): a[0], (1,): a[1], (2,): a[2], (3, 2): a[3]})
    p2 = NCSeries.poly(n, {(): b[0], (2,): b[1], (3,): b[2], (3, 3): b[3]})
    p3 = NCSeries.poly(n, {(): c[0], (3,): c[1]})
    return NCTuple([p1, p2, p3])


def ex22_p() -> NCTuple:
    """``(Z1 - Z2 - Z1 Z2 / 2, Z2)``."""
    return NCTuple([
        NCSeries.poly(2, {(1,): 1, (2,): -1, (1, 2): -0.5}),
        NCSeries.poly(2, {(2,): 1}),
    ])


def ex22_g(degree: int) -> NCTuple:
    """Inverse of :func:`ex22_p`: ``((Z1 + Z2) sum_j (Z2/2)^j, Z2)`` through ``degree``."""
    terms = {}
    for j in range(degree):
        terms[(1,) + (2,) * j] = 0.5**j
        terms[(2,) * (j + 1)] = 0.5**j
    g1 = NCSeries.from_terms(2, terms, degree)
    g2 = NCSeries.variable(2, 2, degree, polynomial=True)
    return NCTuple([g1, g2])


def single_var_f(a: complex, degree: int) -> NCSeries:
    """``Z (1 + Z/a)^{-1} = sum_{k>=1} (-1/a)^{k-1} Z^k``."""
    if a == 0:
        raise ValidationError("a must be nonzero")
    return NCSeries(1, [None] + [(-1 / a) ** (k - 1) for k in range(1, degree + 1)], degree)


def single_var_g(a: complex, degree: int) -> NCSeries:
    """``Z (1 - Z/a)^{-1}``, the inverse of :func:`single_var_f`."""
    if a == 0:
        raise ValidationError("a must be nonzero")
    return NCSeries(1, [None] + [(1 / a) ** (k - 1) for k in range(1, degree + 1)], degree)


def ex3_f(gamma: float, a: complex, degree: int) -> NCTuple:
    """``f1 = Z1/gamma - sum_{j>=1} (Z2/gamma)^j``, ``f2 = a Z2 / gamma``."""
    if gamma <= 0 or abs(a) <= 1:
        raise ValidationError("need gamma > 0 and |a| > 1")
    terms = {(1,): 1 / gamma}
    for j in range(1, degree + 1):
        terms[(2,) * j] = -(1 / gamma) ** j
    f1 = NCSeries.from_terms(2, terms, degree)
    f2 = NCSeries.from_terms(2, {(2,): a / gamma}, degree, polynomial=True)
    return NCTuple([f1, f2])


def ex3_g(gamma: float, a: complex, degree: int) -> NCTuple:
    """Inverse of :func:`ex3_f`: ``(gamma Z1 + gamma sum_{j>=1} (Z2/a)^j, gamma Z2 / a)``."""
    terms = {(1,): gamma}
    for j in range(1, degree + 1):
        terms[(2,) * j] = gamma * (1 / a) ** j
    g1 = NCSeries.from_terms(2, terms, degree)
    g2 = NCSeries.from_terms(2, {(2,): gamma / a}, degree, polynomial=True)
    return NCTuple([g1, g2])


def psi(lam, degree: int) -> NCTuple:
    return ball_automorphism_series(lam, degree)


def _random_poly(n: int, lo: int, hi: int, rng: np.random.Generator, density: float,
                 variables=None, scale: float = 1.0) -> dict:
    terms = {}
    for w in words_upto(n, hi):
        if len(w) < lo:
            continue
        if variables is not None and any(x not in variables for x in w):
            continue
        if rng.random() < density:
            terms[w] = scale * complex(rng.normal(), rng.normal())
    return terms


def _unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return Q * (np.diagonal(R) / np.abs(np.diagonal(R)))


def random_polynomial_tuple(n: int, deg: int, rng: np.random.Generator,
                            min_det: float = 0.1, density: float = 0.5,
                            sv_range: tuple[float, float] = (0.5, 2.0), scale: float = 0.3) -> NCTuple:
    """Random ``F`` with ``F(0) = 0``, components of degree at most ``deg`` and ``|det J| >= min_det``.

    The linear part is ``U diag(s) V`` with Haar unitaries and singular values
    drawn from ``sv_range``, which keeps the inverse coefficients of moderate
    size so absolute residual checks stay meaningful.
    """
    lo, hi = sv_range
    while True:
        sv = rng.uniform(lo, hi, size=n)
        J = _unitary(n, rng) @ np.diag(sv) @ _unitary(n, rng)
        if abs(np.linalg.det(J)) >= min_det:
            break
    comps = []
    for i in range(n):
        terms = _random_poly(n, 2, deg, rng, density, scale=scale)
        for j in range(n):
            terms[(j + 1,)] = J[i, j]
        comps.append(NCSeries.poly(n, terms))
    return NCTuple(comps)


def random_series_tuple(n: int, deg: int, D: int, rng: np.random.Generator,
                        constant: bool = False, density: float = 0.6, components: int | None = None) -> NCTuple:
    """Random truncated series (not flagged polynomial) with optional constant terms."""
    comps = []
    for _ in range(components or n):
        terms = _random_poly(n, 0 if constant else 1, deg, rng, density)
        comps.append(NCSeries.from_terms(n, terms, D))
    return NCTuple(comps)


def proposition_family(n: int, rng: np.random.Generator, qdeg: int = 2,
                       shift=None) -> NCTuple:
    """``[p] = [a] + ([Z] + [q_1(Z_2..Z_n), ..., q_{n-1}(Z_n), 0]) A`` with random invertible ``A``."""
    while True:
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        if abs(np.linalg.det(A)) > 0.1:
            break
    if shift is None:
        shift = rng.normal(size=n)
    inner = []
    for i in range(1, n + 1):
        base = NCSeries.variable(i, n)
        if i < n:
            q = _random_poly(n, 1, qdeg, rng, 0.7, variables=set(range(i + 1, n + 1)), scale=0.5)
            base = base + NCSeries.poly(n, q) if q else base
        inner.append(base)
    comps = []
    for j in range(n):
        pj = NCSeries.constant(shift[j], n)
        for i in range(n):
            pj = pj + A[i, j] * inner[i]
        comps.append(pj)
    return NCTuple(comps)


def schwarz_problem(s: complex, r: float = 0.5):
    """``f = Z``, points ``0`` and ``r``, scalar targets ``0`` and ``s``."""
    f = NCTuple.identity(1)
    points = np.array([[0.0], [r]], dtype=complex)
    targets = np.array([[[0.0]], [[s]]], dtype=complex)
    return f, points, targets
