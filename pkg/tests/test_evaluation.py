import math

import numpy as np
import pytest

from ncdomain import instances
from ncdomain.errors import NotInDomainError, ShapeError, ValidationError
from ncdomain.evaluation import (
    TupleInstance, apply_tuple, defect_ops, domain_membership, eval_point, eval_series,
    geometric_tail, phi_iterates, purity_measure, word_products,
)
from ncdomain.nccalculus import invert
from ncdomain.ncseries import INF, NCSeries, NCTuple

from conftest import d_of, matrix_eval, random_matrices


def test_word_products_order(rng):
    X = random_matrices(rng, 2, 3, 0.7)
    P = word_products(X, 2)
    assert np.allclose(P[2][1], X[0] @ X[1])  # word (1, 2)
    assert np.allclose(P[2][2], X[1] @ X[0])  # word (2, 1)


def test_polynomial_eval_is_exact(rng):
    X = random_matrices(rng, 2, 4, 1.5)
    p = instances.ex22_p()[0]
    rep = eval_series(p, X)
    assert rep.exact and rep.tail_bound == 0
    assert np.allclose(rep.value, matrix_eval(d_of(p), X), atol=1e-13)


def test_series_eval_within_tail(rng):
    X = random_matrices(rng, 2, 3, 0.5)
    g = instances.ex22_g(18)
    ref = instances.ex22_g(12)
    rep_hi = eval_series(g[0], X)
    rep = eval_series(ref[0], X)
    assert np.isfinite(rep.tail_bound)
    assert np.linalg.norm(rep.value - rep_hi.value, 2) <= rep.tail_bound + rep_hi.tail_bound
    assert np.allclose(rep.value, matrix_eval(d_of(ref[0]), X), atol=1e-13)


def test_single_variable_closed_form():
    a = 3.0
    f = instances.single_var_f(a, 40)
    for x in (0.5, 1.2, -2.0):
        val, tail = eval_point(f, [x])
        exact = x / (1 + x / a)
        assert abs(val - exact) <= tail + 1e-14


def test_outside_radius_flags_divergence():
    f = instances.single_var_f(3.0, 20)
    rep = eval_series(f, TupleInstance.scalar([3.5]))
    assert not rep.convergent_flag and rep.tail_bound == INF


def test_nilpotent_evaluation_is_exact():
    N = np.diag(np.ones(2), 1)
    X = TupleInstance([N, 0.5 * N])
    assert X.is_nilpotent
    rep = eval_series(instances.ex22_g(10)[0], X)
    assert rep.exact and rep.tail_bound == 0


def test_geometric_tail_rules():
    assert geometric_tail([1, 0.5, 0.25], 2) == pytest.approx(0.25)
    assert geometric_tail([1, 0.5, 0.0], 1) == 0.0
    assert geometric_tail([0, 0, 1.0], 2) == INF
    assert geometric_tail([1, 0.99, 0.98], 2) == INF


def test_shape_errors():
    with pytest.raises(ShapeError):
        eval_series(NCSeries.variable(1, 2), TupleInstance.scalar([1.0]))
    with pytest.raises(ShapeError):
        TupleInstance([np.eye(2), np.eye(3)])
    with pytest.raises(ValidationError):
        eval_series(instances.ex22_g(4)[0], TupleInstance.scalar([0.1, 0.1]), 6)


def test_phi_iterates_and_purity(rng):
    X = random_matrices(rng, 2, 3, 0.6)
    its = phi_iterates(X, 3)
    A = X.matrices
    manual = sum(A[i] @ A[j] @ A[j].conj().T @ A[i].conj().T for i in range(2) for j in range(2))
    assert np.allclose(its[2], manual)
    f = NCTuple.identity(2)
    assert purity_measure(f, X, 30) < 1e-5


def test_defect_identities(rng):
    X = random_matrices(rng, 2, 3, 0.8)
    f = NCTuple.identity(2)
    row, col = defect_ops(f, X)
    C = X.row_matrix()
    assert np.allclose(row @ row, np.eye(3) - C @ C.conj().T)
    assert np.allclose(col @ col, np.eye(6) - C.conj().T @ C)
    with pytest.raises(NotInDomainError):
        defect_ops(f, random_matrices(rng, 2, 3, 1.5))


def test_apply_tuple_cached(rng):
    X = random_matrices(rng, 2, 2, 0.3)
    f = instances.ex22_p()
    a, _ = apply_tuple(f, X)
    b, _ = apply_tuple(f, X)
    assert a is b


def test_membership_single_variable():
    a = 3.0
    D = 40
    f, g = NCTuple([instances.single_var_f(a, D)]), NCTuple([instances.single_var_g(a, D)])
    rep = domain_membership(f, g, TupleInstance.scalar([1.4]), D)
    assert rep.verdict == "in" and rep.strict
    # f(x) = x / (1 + x/3) has modulus above 1 here
    rep = domain_membership(f, g, TupleInstance.scalar([-1.0 + 0.5j]), D)
    assert rep.verdict == "out"


def test_membership_nilpotent_and_ex22(rng):
    p = instances.ex22_p()
    g = invert(p, 16).inverse
    N = np.diag(np.ones(3), 1) * 0.4
    rep = domain_membership(p, g, TupleInstance([N, N @ N]), 16)
    assert rep.verdict == "in" and rep.pure
    X = random_matrices(rng, 2, 3, 0.3)
    rep = domain_membership(p, g, X, 16)
    assert rep.in_domain is True
    assert rep.residual_gfT <= rep.tails["residual"] + 1e-9
    assert math.isfinite(rep.norm_fT)
