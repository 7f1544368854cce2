from __future__ import annotations

import numpy as np
import pytest

from ncdomain.evaluation import TupleInstance


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_matrices(rng, n: int, d: int, row_norm: float) -> TupleInstance:
    """Random complex n-tuple of d x d matrices scaled to the given row norm."""
    X = rng.normal(size=(n, d, d)) + 1j * rng.normal(size=(n, d, d))
    row = np.concatenate(list(X), axis=1)
    X *= row_norm / np.linalg.norm(row, 2)
    return TupleInstance(list(X))


# Dict-based reference algebra: a polynomial is {word: coeff}.  Everything
# below is deliberately naive and shares no code with the package.

def d_add(*ps):
    out = {}
    for p in ps:
        for w, c in p.items():
            out[w] = out.get(w, 0) + c
    return out


def d_scale(p, s):
    return {w: s * c for w, c in p.items()}


def d_mul(p, q, D):
    out = {}
    for u, a in p.items():
        for v, b in q.items():
            if len(u) + len(v) <= D:
                out[u + v] = out.get(u + v, 0) + a * b
    return out


def d_compose(p, gs, D):
    """Substitute ``gs[i-1]`` for letter ``i`` in ``p``, keep degrees <= D."""
    out = {}
    for w, c in p.items():
        term = {(): c}
        for x in w:
            term = d_mul(term, gs[x - 1], D)
        out = d_add(out, term)
    return out


def d_of(series):
    return dict(series.coeffs)


def d_max_diff(p, q):
    keys = set(p) | set(q)
    return max((abs(p.get(w, 0) - q.get(w, 0)) for w in keys), default=0.0)


def matrix_eval(p, X):
    """Sum of c_w X_w by explicit matrix products."""
    d = X[0].shape[0]
    out = np.zeros((d, d), dtype=complex)
    for w, c in p.items():
        M = np.eye(d, dtype=complex)
        for x in w:
            M = M @ X[x - 1]
        out += c * M
    return out


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None) if mod else None
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
