"""Acceptance criteria 1-11.

Each test prints one ``criterion N: PASS|FAIL`` line with the measured
numbers; the lines are repeated in the pytest terminal summary.  Run
``python3 tests/test_acceptance.py`` to get only the summary lines.
"""
from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from ncdomain import cli, instances, interp, invariants, model
from ncdomain.evaluation import TupleInstance, eval_point
from ncdomain.nccalculus import (
    ball_automorphism_apply, ball_automorphism_series, chain_rule_rhs, compose, compose_tuple,
    invert, jacobian0,
)
from ncdomain.ncseries import NCTuple, free_partial

RESULTS: dict[int, str] = {}


def _random_tuple(rng, n, d, row_norm):
    X = rng.normal(size=(n, d, d)) + 1j * rng.normal(size=(n, d, d))
    X *= row_norm / np.linalg.norm(np.concatenate(list(X), axis=1), 2)
    return TupleInstance(list(X))


def _record(k: int, ok: bool, detail: str, elapsed: float, limit: float | None):
    timing_ok = limit is None or elapsed < limit
    status = "PASS" if ok and timing_ok else "FAIL"
    lim = f" (limit {limit:g} s)" if limit is not None else ""
    line = f"criterion {k}: {status} - {detail}; {elapsed:.2f} s{lim}"
    RESULTS[k] = line
    print(line)
    return ok and timing_ok


# 1 ---------------------------------------------------------------------------

def check_1():
    t0 = time.perf_counter()
    res = invert(instances.ex22_p(), 6)
    g1 = res.inverse[0]
    expected = instances.ex22_g(6)[0]
    coeff_err = g1.max_abs_diff(expected, 6)
    named = max(abs(g1.coeff((1, 2)) - 0.5), abs(g1.coeff((2, 2)) - 0.5),
                abs(g1.coeff((1, 2, 2)) - 0.25), abs(g1.coeff((2, 2, 2)) - 0.25))
    g2_err = res.inverse[1].max_abs_diff(instances.ex22_g(6)[1], 6)
    r_fg, r_gf = float(np.max(res.residual_fg)), float(np.max(res.residual_gf))
    ok = max(coeff_err, named, g2_err) <= 1e-12 and max(r_fg, r_gf) <= 1e-12
    detail = f"coeff err {max(coeff_err, named, g2_err):.2e}, residuals {r_fg:.2e}/{r_gf:.2e}"
    return _record(1, ok, detail, time.perf_counter() - t0, 1.0)


# 2 ---------------------------------------------------------------------------

def check_2():
    t0 = time.perf_counter()
    a, D = 3.0, 12
    f = instances.single_var_f(a, D)
    res = invert(NCTuple([f]), D)
    g = res.inverse[0]
    err = max(abs(g.coeff((1,) * k) - a ** (-(k - 1))) for k in range(1, D + 1))
    ok = err <= 1e-12
    return _record(2, ok, f"max |g_k - 3^-(k-1)| = {err:.2e}", time.perf_counter() - t0, 1.0)


# 3 ---------------------------------------------------------------------------

def check_3():
    t0 = time.perf_counter()
    worst_res, worst_agree, worst_det = 0.0, 0.0, np.inf
    for s in range(100):
        rng = np.random.default_rng(s)
        n, deg = 1 + s % 3, 1 + (s // 3) % 3
        F = instances.random_polynomial_tuple(n, deg, rng)
        worst_det = min(worst_det, abs(np.linalg.det(jacobian0(F))))
        a = invert(F, 6, "fixed_point")
        b = invert(F, 6, "recursion")
        worst_res = max(worst_res, a.max_residual, b.max_residual)
        worst_agree = max(worst_agree, a.inverse.max_abs_diff(b.inverse, 6))
    ok = worst_res <= 1e-9 and worst_agree <= 1e-12 and worst_det >= 0.1
    detail = (f"100 tuples, max residual {worst_res:.2e}, path agreement {worst_agree:.2e}, "
              f"min |det J| {worst_det:.3f}")
    return _record(3, ok, detail, time.perf_counter() - t0, 10.0)


# 4 ---------------------------------------------------------------------------

def check_4():
    t0 = time.perf_counter()
    jac, chain = 0.0, 0.0
    for s in range(50):
        rng = np.random.default_rng(1000 + s)
        n = 1 + s % 3
        F = instances.random_polynomial_tuple(n, 3, rng)
        G = instances.random_series_tuple(n, 3, 5, rng)
        FG = compose_tuple(F, G, 3)
        jac = max(jac, float(np.max(np.abs(jacobian0(FG) - jacobian0(F) @ jacobian0(G)))))
        D = 4
        H = F[0]
        HG = compose(H, G, D + 1)
        for i in range(1, n + 1):
            lhs = free_partial(HG, i).truncate(D)
            rhs = chain_rule_rhs(H, G, i, D).truncate(D)
            chain = max(chain, lhs.max_abs_diff(rhs, D))
    ok = jac <= 1e-12 and chain <= 1e-10
    return _record(4, ok, f"50 instances, Jacobian {jac:.2e}, chain rule {chain:.2e}",
                   time.perf_counter() - t0, 5.0)


# 5 ---------------------------------------------------------------------------

def check_5():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = 0.0
    ident = NCTuple.identity(2, 5, polynomial=False)
    for _ in range(10):
        lam = rng.normal(size=2) + 1j * rng.normal(size=2)
        lam *= rng.uniform(0.05, 0.9) / np.linalg.norm(lam)
        psi = ball_automorphism_series(lam, 5)
        twice = ball_automorphism_apply(lam, psi, 5)
        worst = max(worst, twice.max_abs_diff(ident, 5))
    ok = worst <= 1e-10
    return _record(5, ok, f"10 points, max |Psi(Psi) - id| = {worst:.2e}", time.perf_counter() - t0, 2.0)


# 6 ---------------------------------------------------------------------------

def check_6():
    t0 = time.perf_counter()
    ident = NCTuple.identity(2)
    idd = model.model_relation_defects(model.build_model(ident, 6, ident), 2)
    id_ok = idd.cstar_defect == 0 and idd.shift_defect == 0
    p = instances.ex22_p()
    rows = []
    for N in (4, 6, 8):
        M = model.build_model(invert(p, N).inverse, N, p)
        rows.append(model.model_relation_defects(M, 2))
    below = all(r.cstar_defect <= r.cstar_tail_bound and r.shift_defect <= r.shift_tail_bound for r in rows)
    mono = all(b.cstar_defect <= a.cstar_defect and b.shift_defect <= a.shift_defect
               for a, b in zip(rows, rows[1:]))
    cs = ", ".join(f"N={r.N}: {r.cstar_defect:.3f} (tail {r.cstar_tail_bound:.2e})" for r in rows)
    sh = max(r.shift_defect for r in rows)
    detail = (f"id defects {idd.cstar_defect:.1e}/{idd.shift_defect:.1e}; Ex22 cstar {cs}; "
              f"Ex22 shift max {sh:.1e}; below tail {below}, monotone {mono}")
    return _record(6, id_ok and below and mono, detail, time.perf_counter() - t0, 20.0)


# 7 ---------------------------------------------------------------------------

def check_7():
    t0 = time.perf_counter()
    worst = 0.0
    for fname, f in (("id", NCTuple.identity(2)), ("ex22", instances.ex22_p())):
        for s in range(20):
            T = _random_tuple(np.random.default_rng(700 + s), 2, 4, 0.5)
            worst = max(worst, model.kernel_isometry_defect(f, T, 6))
    p = instances.ex22_p()
    lam = np.array([0.2, 0.1])
    res = []
    for N in (4, 6, 8):
        M = model.build_model(invert(p, N).inverse, N, p)
        res.append(model.eigenvector_residual(M, lam))
    eig_ok = res[-1].within and all(b.value < a.value for a, b in zip(res, res[1:]))
    ok = worst <= 1e-10 and eig_ok
    er = ", ".join(f"N={N}: {d.value:.2e} (tail {d.tail_bound:.2e})" for N, d in zip((4, 6, 8), res))
    return _record(7, ok, f"K*K identity {worst:.2e} over 40 instances; eigenvector {er}",
                   time.perf_counter() - t0, 20.0)


# 8 ---------------------------------------------------------------------------

def check_8():
    t0 = time.perf_counter()
    bl, _ = invariants.factorization_defect(NCTuple.identity(1), TupleInstance([[[0.5]]]), 12, 6)
    p = instances.ex22_p()
    zero, _ = invariants.factorization_defect(p, TupleInstance.zeros(2, 3), 6, 3)
    T = _random_tuple(np.random.default_rng(8), 2, 3, 0.4)
    ex, ex_tail = invariants.factorization_defect(p, T, 6, 3)
    ok = bl <= 1e-8 and zero <= 1e-12 and ex <= ex_tail
    detail = f"Blaschke {bl:.2e}, f(T)=0 {zero:.2e}, Ex22 {ex:.2e} (tail {ex_tail:.2e})"
    return _record(8, ok, detail, time.perf_counter() - t0, 15.0)


# 9 ---------------------------------------------------------------------------

def check_9():
    t0 = time.perf_counter()
    d = 3
    rep = invariants.curvature(NCTuple.identity(2), TupleInstance.zeros(2, d), 12, theta_degree=6)
    seq_err = max(abs(q - d / (2 ** (m + 1) - 1)) for m, q in rep.estimates)
    zero_ok = seq_err <= 1e-15 and rep.extrapolated <= 1e-6 and abs(rep.via_theta) <= 1e-10
    gap = 0.0
    for f in (NCTuple.identity(2), instances.ex22_p()):
        for s, (dd, r) in enumerate(((2, 0.3), (3, 0.5), (4, 0.6), (3, 0.0))):
            T = _random_tuple(np.random.default_rng(900 + s), 2, dd, r) if r else TupleInstance.zeros(2, dd)
            gap = max(gap, invariants.curvature(f, T, 12).agreement_gap)
    r1 = invariants.curvature(NCTuple.identity(1), TupleInstance.zeros(1, 1), 10)
    n1_ok = all(q == 1 / (m + 1) for m, q in r1.estimates)
    ok = zero_ok and gap <= 1e-10 and n1_ok
    detail = (f"zero tuple seq err {seq_err:.1e}, extrapolated {rep.extrapolated:.1e}, "
              f"via theta {rep.via_theta:.1e}; dual gap {gap:.1e}; n=1 quotients 1/(m+1) {n1_ok}")
    return _record(9, ok, detail, time.perf_counter() - t0, 10.0)


# 10 --------------------------------------------------------------------------

def check_10():
    t0 = time.perf_counter()
    bad = []
    grid = [s for s in np.linspace(0, 1, 41) if s != 0.5] + [0.5 - 1e-6, 0.5 + 1e-6]
    for s in grid:
        for phase in (1, 1j, np.exp(0.7j)):
            f, pts, tg = instances.schwarz_problem(s * phase)
            v = interp.pick_feasible(interp.PickProblem(f, pts, tg))
            if v.feasible is not bool(s < 0.5):
                bad.append(("schwarz", float(s)))
    rng = np.random.default_rng(10)
    fs = (NCTuple.identity(2), instances.ex22_p())
    for f in fs:
        for k in (1, 2, 4):
            for nrm in (0.3, 1 - 1e-6, 1 + 1e-6, 2.0):
                A = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
                A *= nrm / np.linalg.norm(A, 2)
                pt = 0.2 * (rng.normal(size=(1, 2)) + 1j * rng.normal(size=(1, 2)))
                v = interp.pick_feasible(interp.PickProblem(f, pt, A[None]))
                if v.feasible is not (nrm <= 1):
                    bad.append(("single", nrm))
    gram_min = np.inf
    for f in fs:
        for m in range(1, 9):
            pts = 0.12 * (rng.normal(size=(m, 2)) + 1j * rng.normal(size=(m, 2)))
            G = interp.gram_matrix(f, pts)
            w = np.linalg.eigvalsh(G)
            gram_min = min(gram_min, w[0] / max(1.0, w[-1]))
            tg = np.array([eval_point(f[0], p)[0] for p in pts])
            if interp.pick_feasible(interp.PickProblem(f, pts, tg)).feasible is not True:
                bad.append(("multiplier", m))
    ok = not bad and gram_min >= -1e-10
    detail = f"{len(grid) * 3} Schwarz cases, 24 single-point cases, min scaled Gram eig {gram_min:.2e}, mismatches {bad}"
    return _record(10, ok, detail, time.perf_counter() - t0, 5.0)


# 11 --------------------------------------------------------------------------

def check_11(tmp: Path):
    t0 = time.perf_counter()
    ex = tmp / "ex"
    assert cli.run(["examples", "--outdir", str(ex), "--degree", "8", "-o", str(tmp / "examples.json")]) == 0
    T = tmp / "T.json"
    from ncdomain import jsonio
    rng = np.random.default_rng(11)
    T.write_text(jsonio.dumps(jsonio.matrices_to_json(_random_tuple(rng, 2, 3, 0.4).matrices)))
    runs = [
        ["invert", "-i", str(ex / "ex22_p.json"), "--degree", "6"],
        ["model", "--f", str(ex / "ex22_p.json"), "--N", "5"],
        ["curvature", "--f", str(ex / "ex22_p.json"), "--tuple", str(T), "--N", "4"],
        ["pick", "--f", str(ex / "schwarz_f.json"), "--points", str(ex / "schwarz_points.json"),
         "--targets", str(ex / "schwarz_targets.json")],
    ]
    same = True
    for k, argv in enumerate(runs):
        out = tmp / f"out{k}.json"
        assert cli.run(argv + ["-o", str(out)]) == 0
        first = out.read_bytes()
        manifest = json.loads((tmp / f"out{k}.json.manifest.json").read_text())
        assert cli.run(manifest["argv"]) == 0
        second = out.read_bytes()
        manifest2 = json.loads((tmp / f"out{k}.json.manifest.json").read_text())
        same &= first == second and manifest["inputs"] == manifest2["inputs"]
        same &= manifest["outputs"] == manifest2["outputs"]
    return _record(11, same, f"{len(runs)} commands re-run from their manifests, byte-identical {same}",
                   time.perf_counter() - t0, None)


# pytest entry points -----------------------------------------------------------

@pytest.mark.parametrize("k", range(1, 11))
def test_criterion(k):
    assert globals()[f"check_{k}"]()


def test_criterion_11(tmp_path):
    assert check_11(tmp_path)


if __name__ == "__main__":
    import tempfile
    for k in range(1, 11):
        globals()[f"check_{k}"]()
    with tempfile.TemporaryDirectory() as d:
        check_11(Path(d))
    sys.exit(0 if all("PASS" in line for line in RESULTS.values()) else 1)
