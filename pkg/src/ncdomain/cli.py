"""Command-line front end.

Every subcommand reads JSON, writes JSON (or a plain-text rendering of the
same data) and, when an output file is given, a run manifest next to it.
Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, cmatrix, instances, interp, invariants, jsonio, model, nccalculus
from .errors import NCDomainError, NumericalError, ValidationError
from .evaluation import TupleInstance, domain_membership, eval_series, eval_point
from .ncseries import NCTuple, free_partial, radius_estimate

DEFAULT_DEGREE = 6
DEFAULT_TOL = 1e-9

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class _Inputs:
    """Loads JSON files and remembers their hashes for the manifest."""

    def __init__(self):
        self.hashes: dict[str, str] = {}

    def load(self, path: str | None, what: str) -> Any:
        if path is None:
            raise ValidationError(f"missing input: {what}")
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise ValidationError(f"cannot read {what} from {path}: {exc.strerror}") from None
        self.hashes[str(path)] = hashlib.sha256(raw).hexdigest()
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path} is not valid JSON: {exc}") from None

    def tuple(self, path, what="series tuple") -> NCTuple:
        return jsonio.tuple_from_json(self.load(path, what))

    def matrices(self, path, what="matrix tuple") -> TupleInstance:
        return TupleInstance(jsonio.matrices_from_json(self.load(path, what)))


def _meta(args, **extra) -> dict:
    out = {"degree": args.degree, "tol": args.tol}
    out.update(extra)
    return out


def _f_and_g(args, io: _Inputs) -> tuple[NCTuple, NCTuple, dict]:
    """Resolve ``f`` and ``g``; the missing one is obtained by inversion."""
    f = io.tuple(args.f, "f") if args.f else None
    g = io.tuple(args.g, "g") if getattr(args, "g", None) else None
    info: dict = {}
    if f is None and g is None:
        raise ValidationError("need --f or --g")
    if g is None:
        res = nccalculus.invert(f, args.degree)
        g, info = res.inverse, {"g_from_inversion": True, "inversion_residual": res.max_residual}
    elif f is None:
        res = nccalculus.invert(g, args.degree)
        f, info = res.inverse, {"f_from_inversion": True, "inversion_residual": res.max_residual}
    return f, g, info


def _report(r) -> dict:
    return {"value": r.value, "degree_used": r.degree_used, "tail_bound": r.tail_bound,
            "convergent": r.convergent_flag, "exact": r.exact}


# subcommands -------------------------------------------------------------

def cmd_invert(args, io):
    F = io.tuple(args.input or args.f, "tuple to invert")
    res = nccalculus.invert(F, args.degree, method=args.method)
    out = jsonio.tuple_to_json(res.inverse)
    out.update({
        "residual_fg": res.residual_fg, "residual_gf": res.residual_gf,
        "jacobian0": res.jacobian0, "jacobian0_inverse": res.jacobian0_inverse,
        "method": res.method,
        "metadata": _meta(args, max_residual=res.max_residual, notes=res.notes),
    })
    return out


def cmd_compose(args, io):
    F = io.tuple(args.f or args.input, "outer tuple (--f)")
    G = io.tuple(args.g, "inner tuple (--g)")
    H = nccalculus.compose_tuple(F, G, args.degree)
    out = jsonio.tuple_to_json(H)
    out["metadata"] = _meta(args, valid_degree=H.valid_degree, exact=H.polynomial)
    return out


def cmd_derive(args, io):
    F = io.tuple(args.input or args.f, "series tuple")
    if not 1 <= args.var <= F.n_vars:
        raise ValidationError(f"--var must be in 1..{F.n_vars}")
    D = NCTuple([free_partial(c, args.var) for c in F])
    out = jsonio.tuple_to_json(D)
    out["metadata"] = _meta(args, variable=args.var, valid_degree=D.valid_degree)
    return out


def cmd_jacobian(args, io):
    F = io.tuple(args.input or args.f, "series tuple")
    J = nccalculus.jacobian0(F)
    det = complex(np.linalg.det(J)) if J.shape[0] == J.shape[1] else None
    radii = [radius_estimate(c) for c in F]
    return {"jacobian0": J, "det": det, "radius_estimates": radii,
            "metadata": _meta(args, radius_method="log-linear coefficient slope")}


def cmd_eval(args, io):
    F = io.tuple(args.input or args.f, "series tuple")
    deg = None if args.eval_degree is None else args.eval_degree
    if args.point:
        pt = jsonio.point_from_json(io.load(args.point, "point"))
        vals = [eval_point(c, pt, deg) for c in F]
        return {"values": [v for v, _ in vals], "tail_bounds": [t for _, t in vals],
                "metadata": _meta(args, max_tail=max(t for _, t in vals))}
    T = io.matrices(args.tuple, "matrix tuple (--tuple)")
    reps = [eval_series(c, T, deg) for c in F]
    return {"components": [_report(r) for r in reps],
            "metadata": _meta(args, max_tail=max(r.tail_bound for r in reps))}


def cmd_domain_check(args, io):
    f, g, info = _f_and_g(args, io)
    T = io.matrices(args.tuple, "matrix tuple (--tuple)")
    r = domain_membership(f, g, T, args.degree, args.tol)
    return {"verdict": r.verdict, "in_domain": r.in_domain, "strict": r.strict, "pure": r.pure,
            "residual_gfT": r.residual_gfT, "norm_fT": r.norm_fT, "purity": r.purity,
            "tails": r.tails, "notes": r.notes, "metadata": _meta(args, **info)}


def cmd_model(args, io):
    f, g, info = _f_and_g(args, io)
    M = model.build_model(g, args.N, f)
    rd = model.model_relation_defects(M, args.interior)
    out = {"dim": M.dim, "N": M.N, "gram": rd.gram,
           "cstar_defect": rd.cstar_defect, "cstar_tail_bound": rd.cstar_tail_bound,
           "shift_defect": rd.shift_defect, "shift_tail_bound": rd.shift_tail_bound,
           "interior_degree": rd.interior_degree}
    out["metadata"] = _meta(args, **info)
    return out


def cmd_poisson(args, io):
    f, g, info = _f_and_g(args, io)
    out: dict = {"N": args.N}
    if args.tuple:
        T = io.matrices(args.tuple, "matrix tuple (--tuple)")
        out["kernel_isometry_defect"] = model.kernel_isometry_defect(f, T, args.N, args.degree)
        d = model.intertwining_defect(f, g, T, args.N, None, args.degree)
        out["intertwining_defect"] = {"value": d.value, "tail_bound": d.tail_bound}
    if args.point:
        lam = jsonio.point_from_json(io.load(args.point, "point"))
        M = model.build_model(g, args.N, f)
        pv = model.poisson_eigenvector(f, lam, args.N)
        d = model.eigenvector_residual(M, lam, pv)
        out["eigenvector_residual"] = {"value": d.value, "tail_bound": d.tail_bound}
        out["gamma_norm"] = pv.norm
    if len(out) == 1:
        raise ValidationError("poisson needs --tuple and/or --point")
    out["metadata"] = _meta(args, exact_identity="K*K = I - Phi^{N+1}(I)", **info)
    return out


def cmd_curvature(args, io):
    f = io.tuple(args.f or args.input, "f")
    T = io.matrices(args.tuple, "matrix tuple (--tuple)")
    r = invariants.curvature(f, T, args.mmax, args.tol, args.degree, theta_degree=args.N)
    return {"rank": r.rank, "estimates": [{"m": m, "value": v} for m, v in r.estimates],
            "extrapolated": r.extrapolated, "extrapolated_flag": r.extrapolated_flag,
            "traces": r.traces, "trace_limit": r.trace_limit, "agreement_gap": r.agreement_gap,
            "via_theta": r.via_theta, "via_theta_tail": r.via_theta_tail, "theta_gap": r.theta_gap,
            "notes": r.notes, "metadata": _meta(args, mmax=args.mmax)}


def cmd_charfun(args, io):
    f = io.tuple(args.f or args.input, "f")
    T = io.matrices(args.tuple, "matrix tuple (--tuple)")
    th = invariants.theta_truncation(f, T, args.N, args.tol, args.degree)
    defect, tail = invariants.factorization_defect(f, T, args.N, args.interior, args.tol, args.degree)
    out = {"N": args.N, "shape": list(th.matrix.shape), "neumann_terms": th.neumann_terms,
           "factorization_defect": {"value": defect, "tail_bound": tail},
           "interior_degree": args.interior}
    if args.emit_theta:
        out["theta"] = th.matrix
    if args.point:
        z = jsonio.point_from_json(io.load(args.point, "point"))
        out["theta_at_point"] = invariants.characteristic_point(f, T, z, args.tol, args.degree)
    out["metadata"] = _meta(args, theta_tail_bound=th.tail_bound)
    return out


def _pick_problem(args, io) -> interp.PickProblem:
    f = io.tuple(args.f, "f")
    g = io.tuple(args.g, "g") if args.g else None
    pts = jsonio.points_from_json(io.load(args.points, "points"))
    tg = np.array(jsonio.matrices_from_json(io.load(args.targets, "targets"), "targets"))
    return interp.PickProblem(f, pts, tg, args.eval_degree, g)


def cmd_pick(args, io):
    pr = _pick_problem(args, io)
    v = interp.pick_feasible(pr, args.tol)
    out = {"verdict": v.verdict, "feasible": v.feasible, "min_eig": v.min_eig, "max_eig": v.max_eig,
           "threshold": v.threshold, "verified": pr.verified}
    if v.certificate is not None:
        out["certificate"] = list(v.certificate)
    if args.emit_matrix:
        out["pick_matrix"] = pr.assembled
    out["metadata"] = _meta(args)
    return out


def cmd_gram(args, io):
    f = io.tuple(args.f or args.input, "f")
    pts = jsonio.points_from_json(io.load(args.points, "points"))
    G = interp.gram_matrix(f, pts, args.eval_degree)
    w = cmatrix.hermitian_eigenvalues(G)
    return {"gram": G, "min_eig": float(w[0]), "max_eig": float(w[-1]),
            "metadata": _meta(args, psd_threshold=-args.tol * max(1.0, float(w[-1])))}


def _example_files(args) -> dict[str, Any]:
    D = args.degree
    name = args.name
    files: dict[str, Any] = {}
    if name in ("ex2", "all"):
        files["ex2_p.json"] = jsonio.tuple_to_json(instances.ex2())
    if name in ("ex22", "all"):
        files["ex22_p.json"] = jsonio.tuple_to_json(instances.ex22_p())
        files["ex22_g.json"] = jsonio.tuple_to_json(instances.ex22_g(D))
    if name in ("ex3", "all"):
        files["ex3_f.json"] = jsonio.tuple_to_json(instances.ex3_f(args.gamma, args.a, D))
        files["ex3_g.json"] = jsonio.tuple_to_json(instances.ex3_g(args.gamma, args.a, D))
    if name in ("single-var", "all"):
        files["f.json" if name != "all" else "single_var_f.json"] = jsonio.tuple_to_json(
            NCTuple([instances.single_var_f(args.a, D)]))
        files["g.json" if name != "all" else "single_var_g.json"] = jsonio.tuple_to_json(
            NCTuple([instances.single_var_g(args.a, D)]))
    if name in ("psi", "all"):
        lam = np.array(args.lam if args.lam else [0.3, 0.2], dtype=float)
        files["psi.json"] = jsonio.tuple_to_json(instances.psi(lam, D))
    if name in ("schwarz", "all"):
        f, pts, tg = instances.schwarz_problem(args.s)
        files["schwarz_f.json"] = jsonio.tuple_to_json(f)
        files["schwarz_points.json"] = jsonio.points_to_json(pts)
        files["schwarz_targets.json"] = {"targets": [jsonio.matrix_to_json(t) for t in tg]}
    if name == "random":
        rng = np.random.default_rng(args.seed)
        files["random_f.json"] = jsonio.tuple_to_json(instances.random_polynomial_tuple(args.n, 3, rng))
    if not files:
        raise ValidationError(f"unknown example {name!r}")
    return files


def cmd_examples(args, io):
    files = _example_files(args)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for fname, obj in files.items():
        (outdir / fname).write_text(jsonio.dumps(obj))
        written.append(str(outdir / fname))
    return {"written": written, "metadata": _meta(args, name=args.name, exact=True)}


COMMANDS = {
    "invert": cmd_invert, "compose": cmd_compose, "derive": cmd_derive, "jacobian": cmd_jacobian,
    "eval": cmd_eval, "domain-check": cmd_domain_check, "model": cmd_model, "poisson": cmd_poisson,
    "curvature": cmd_curvature, "charfun": cmd_charfun, "pick": cmd_pick, "gram": cmd_gram,
    "examples": cmd_examples,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-i", "--input", help="primary input JSON file")
    common.add_argument("-o", "--output", help="output JSON file (default: stdout)")
    common.add_argument("--degree", type=int, default=DEFAULT_DEGREE,
                        help=f"truncation degree (default {DEFAULT_DEGREE})")
    common.add_argument("--mmax", type=int, default=12, help="largest iterate for curvature (default 12)")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help=f"tolerance (default {DEFAULT_TOL:g})")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--seed", type=int, default=0, help="seed for random instances")
    common.add_argument("--manifest", help="manifest path (default: <output>.manifest.json)")
    common.add_argument("--f", help="series tuple f")
    common.add_argument("--g", help="series tuple g (inverse of f)")
    common.add_argument("--tuple", help="matrix tuple T")
    common.add_argument("--point", help="scalar point")
    common.add_argument("--points", help="interpolation nodes")
    common.add_argument("--targets", help="interpolation targets")
    common.add_argument("--N", type=int, default=6, help="model truncation degree (default 6)")
    common.add_argument("--interior", type=int, default=2, help="interior degree for defects (default 2)")
    common.add_argument("--eval-degree", type=int, default=None,
                        help="evaluation degree (default: the series' stored degree)")

    p = argparse.ArgumentParser(prog="ncdomain", description="Noncommutative domains toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("invert", parents=[common], help="compositional inverse")
    s.add_argument("--method", choices=("fixed_point", "recursion"), default="fixed_point")
    sub.add_parser("compose", parents=[common], help="compose --f with --g")
    s = sub.add_parser("derive", parents=[common], help="free partial derivative")
    s.add_argument("--var", type=int, default=1)
    sub.add_parser("jacobian", parents=[common], help="Jacobian at 0 and radius estimates")
    sub.add_parser("eval", parents=[common], help="evaluate at a matrix tuple or point")
    sub.add_parser("domain-check", parents=[common], help="domain membership of a matrix tuple")
    sub.add_parser("model", parents=[common], help="universal model relation defects")
    sub.add_parser("poisson", parents=[common], help="Poisson kernel and eigenvector checks")
    sub.add_parser("curvature", parents=[common], help="curvature invariant")
    s = sub.add_parser("charfun", parents=[common], help="characteristic function checks")
    s.add_argument("--emit-theta", action="store_true")
    s = sub.add_parser("pick", parents=[common], help="Pick feasibility")
    s.add_argument("--emit-matrix", action="store_true")
    sub.add_parser("gram", parents=[common], help="kernel Gram matrix")
    s = sub.add_parser("examples", parents=[common], help="write built-in instances")
    s.add_argument("--name", default="all",
                   choices=("all", "ex2", "ex22", "ex3", "single-var", "psi", "schwarz", "random"))
    s.add_argument("--a", type=complex, default=3.0)
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--lam", type=float, nargs="+")
    s.add_argument("--s", type=float, default=0.5)
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--outdir", default=".")
    return p


def _render_text(obj: Any, indent: int = 0) -> str:
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v and not _is_flat(v):
                lines.append(f"{pad}{k}:")
                lines.append(_render_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {json.dumps(v)}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)):
                body = _render_text(v, indent + 1)
                lines.append(f"{pad}- " + body.lstrip())
            else:
                lines.append(f"{pad}- {json.dumps(v)}")
    else:
        lines.append(f"{pad}{json.dumps(obj)}")
    return "\n".join(lines)


def _is_flat(v) -> bool:
    if isinstance(v, list):
        return all(not isinstance(x, (dict, list)) or (isinstance(x, list) and len(x) == 2
                   and all(isinstance(y, (int, float, str)) for y in x)) for x in v)
    return False


def _params(args) -> dict:
    skip = {"input", "output", "manifest", "format", "command"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, complex):
            v = [v.real, v.imag]
        out[k] = v
    return out


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    io = _Inputs()
    start = time.perf_counter()
    try:
        if args.degree < 0 or args.N < 0 or args.mmax < 0:
            raise ValidationError("degrees must be nonnegative")
        if not (args.tol > 0 and math.isfinite(args.tol)):
            raise ValidationError("--tol must be positive")
        payload = COMMANDS[args.command](args, io)
    except ValidationError as exc:
        return _fail(EXIT_INVALID, exc, args)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERICAL, exc, args)
    except NCDomainError as exc:
        return _fail(EXIT_NUMERICAL, exc, args)
    except MemoryError as exc:
        return _fail(EXIT_NUMERICAL, exc, args)

    if args.format == "text":
        text = _render_text(jsonio.to_jsonable(payload)) + "\n"
    else:
        text = jsonio.dumps(payload)
    outputs = []
    if args.output:
        Path(args.output).write_text(text)
        outputs.append({"path": args.output, "sha256": hashlib.sha256(text.encode()).hexdigest()})
    else:
        sys.stdout.write(text)
    manifest_path = args.manifest or (args.output + ".manifest.json" if args.output else None)
    if manifest_path:
        manifest = {
            "command": args.command,
            "argv": list(argv) if argv is not None else sys.argv[1:],
            "inputs": io.hashes,
            "parameters": _params(args),
            "version": __version__,
            "outputs": outputs,
            "wall_time_s": round(time.perf_counter() - start, 6),
        }
        Path(manifest_path).write_text(json.dumps(manifest, indent=2) + "\n")
    return EXIT_OK


def _fail(code: int, exc: BaseException, args) -> int:
    err = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code,
                     "command": getattr(args, "command", None)}}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
