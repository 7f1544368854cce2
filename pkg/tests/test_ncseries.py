import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncdomain.errors import ShapeError, ValidationError
from ncdomain.freewords import words_upto
from ncdomain.ncseries import (
    INF, NCSeries, NCTuple, directional_derivative, free_partial, radius_estimate,
    root_test_radius, series_inverse, series_power,
)
from ncdomain import instances

from conftest import d_add, d_max_diff, d_mul, d_of


coef = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@st.composite
def polys(draw, n=2, deg=3):
    words = words_upto(n, deg)
    chosen = draw(st.lists(st.sampled_from(words), max_size=8, unique=True))
    return {w: draw(coef) for w in chosen}


def test_construction_and_views():
    F = NCSeries.from_terms(2, {(1,): 2, (2, 1): -1j, (): 3}, 4)
    assert F.constant_term == 3
    assert F.coeff((2, 1)) == -1j
    assert F.coeff((1, 2)) == 0
    assert F.degree == 2 and F.order == 0
    assert F.valid_degree == 4
    assert list(F.coeffs) == [(), (1,), (2, 1)]
    with pytest.raises(ValidationError):
        F.coeff((1, 1, 1, 1, 1))


def test_polynomial_flag():
    P = NCSeries.poly(2, {(1, 2): 1})
    assert P.valid_degree == INF
    assert P.coeff((1, 1, 1, 1, 1)) == 0
    assert "O(" not in str(P)
    assert "O(3)" in str(P.as_truncated())


def test_direct_construction_keeps_small_coefficients():
    F = NCSeries.from_terms(1, {(1,): 1.0, (1, 1): 1e-20})
    assert F.coeff((1, 1)) == 1e-20


def test_operation_results_are_pruned():
    F = NCSeries.from_terms(1, {(1,): 1.0, (1, 1): 1e-20})
    G = F + NCSeries.zero(1, 2, polynomial=False)
    assert G.coeff((1, 1)) == 0


def test_shape_errors():
    with pytest.raises(ShapeError):
        NCSeries(2, [None, np.ones(3)], 1)
    with pytest.raises(ShapeError):
        NCSeries.from_terms(2, {(1, 1, 1): 1}, 2)
    with pytest.raises(ShapeError):
        NCTuple([NCSeries.variable(1, 1), NCSeries.variable(1, 2)])


@given(polys(), polys())
def test_product_matches_word_concatenation(p, q):
    P, Q = NCSeries.poly(2, p), NCSeries.poly(2, q)
    got = d_of(P * Q)
    ref = d_mul(p, q, 99)
    assert d_max_diff(got, ref) <= 1e-12 * (1 + max(map(abs, ref.values()), default=0))


@given(polys(), polys(), polys())
@settings(max_examples=30)
def test_product_associative_and_distributive(p, q, r):
    P, Q, R = (NCSeries.poly(2, x) for x in (p, q, r))
    lhs, rhs = (P * Q) * R, P * (Q * R)
    scale = 1 + max((abs(c) for c in lhs.coeffs.values()), default=0)
    assert lhs.max_abs_diff(rhs) <= 1e-12 * scale
    d = P * (Q + R) - (P * Q + P * R)
    assert all(abs(c) <= 1e-12 * scale for c in d.coeffs.values())


def test_truncated_product_degree():
    F = NCSeries.from_terms(2, {(1,): 1}, 3)
    G = NCSeries.poly(2, {(2, 2): 1})
    H = F * G
    assert H.max_degree == 3 and not H.polynomial
    assert H.coeff((1, 2, 2)) == 1


def test_noncommutativity():
    Z1, Z2 = NCSeries.variable(1, 2), NCSeries.variable(2, 2)
    assert (Z1 * Z2 - Z2 * Z1).coeff((1, 2)) == 1


def test_power_and_inverse():
    F = NCSeries.from_terms(2, {(): 2.0, (1,): 0.5, (2, 1): -1.0}, 6)
    inv = series_inverse(F, 6)
    one = F * inv
    assert abs(one.constant_term - 1) < 1e-14
    assert max((abs(c) for w, c in one.coeffs.items() if w), default=0.0) < 1e-13
    assert series_power(NCSeries.variable(1, 1), 4).coeff((1,) * 4) == 1
    with pytest.raises(ValidationError):
        series_inverse(NCSeries.variable(1, 1, 3, False))


def test_free_partial_by_letter_deletion():
    F = NCSeries.poly(2, {(1, 2, 1): 2, (2, 2): 3, (1,): 5})
    dF = free_partial(F, 1)
    assert dF.coeff((2, 1)) == 2 and dF.coeff((1, 2)) == 2
    assert dF.constant_term == 5
    assert dF.coeff((2,)) == 0
    d2 = free_partial(F, 2)
    assert d2.coeff((1, 1)) == 2 and d2.coeff((2,)) == 6


@given(polys(), polys(deg=2))
@settings(max_examples=40)
def test_directional_derivative_reference(p, y):
    # reference: replace each occurrence of Z1 in turn by Y
    F, Y = NCSeries.poly(2, p), NCSeries.poly(2, y)
    ref = {}
    for w, c in p.items():
        for pos, x in enumerate(w):
            if x != 1:
                continue
            left, right = {w[:pos]: c}, {w[pos + 1:]: 1}
            ref = d_add(ref, d_mul(d_mul(left, y, 99), right, 99))
    got = d_of(directional_derivative(F, 1, Y))
    assert d_max_diff(got, ref) <= 1e-10 * (1 + max(map(abs, ref.values()), default=0))


def test_directional_derivative_validity():
    F = NCSeries.from_terms(2, {(1, 1): 1}, 4)
    Y = NCSeries.poly(2, {(2, 2): 1})
    H = directional_derivative(F, 1, Y)
    # exact through 4 - 1 + 2
    assert H.max_degree == 5


def test_radius_estimate_single_variable_family():
    f = instances.single_var_f(3, 30)
    assert abs(radius_estimate(f) - 3) < 1e-9
    assert root_test_radius(f) <= 3 + 1e-9
    assert radius_estimate(NCSeries.poly(1, {(1, 1): 1})) == INF


def test_radius_estimate_geometric_two_variables():
    # sum over words of (Z1 + Z2)^k / 2^k has c_k = sqrt(2^k) / 2^k
    D = 12
    blocks = [np.full(2**k, 0.5**k) for k in range(D + 1)]
    F = NCSeries(2, blocks, D)
    assert math.isclose(radius_estimate(F), math.sqrt(2), rel_tol=1e-9)


def test_tuple_views():
    T = NCTuple([NCSeries.variable(1, 2, 3, False), NCSeries.poly(2, {(): 1, (2,): 1})])
    assert T.max_degree == 1
    assert T.valid_degree == 3
    assert not T.polynomial
    assert np.allclose(T.constant_terms, [0, 1])
    I = NCTuple.identity(2)
    assert I.max_abs_diff(I) == 0
