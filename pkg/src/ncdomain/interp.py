"""Reproducing kernel, Gram matrices and Pick feasibility."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cmatrix
from .errors import BoundaryError, ShapeError, ValidationError
from .evaluation import eval_point
from .ncseries import NCTuple

BOUNDARY_ATOL = 1e-12
MAX_TARGET_SIZE = 64


def _f_values(f: NCTuple, point, degree: int | None = None) -> tuple[np.ndarray, float]:
    pt = np.asarray(point, dtype=complex).reshape(-1)
    if pt.size != f.n_vars:
        raise ShapeError(f"point has {pt.size} coordinates, expected {f.n_vars}")
    vals, tails = zip(*(eval_point(fi, pt, degree) for fi in f))
    return np.array(vals), max(tails)


def _kernel(u: np.ndarray, v: np.ndarray) -> complex:
    den = 1 - np.vdot(v, u)  # 1 - sum u_i conj(v_i)
    if abs(den) < BOUNDARY_ATOL:
        raise BoundaryError("kernel denominator vanishes")
    return complex(1 / den)


def kernel_value(f: NCTuple, mu, lam, degree: int | None = None) -> complex:
    """``1 / (1 - sum f_i(mu) conj(f_i(lam)))``."""
    u, _ = _f_values(f, mu, degree)
    v, _ = _f_values(f, lam, degree)
    for w in (u, v):
        if 1 - float(np.vdot(w, w).real) < BOUNDARY_ATOL:
            raise BoundaryError("point is not strictly inside")
    return _kernel(u, v)


def _validate_points(f: NCTuple, points, degree, g: NCTuple | None = None,
                     tol: float = cmatrix.DEFAULT_TOL) -> tuple[np.ndarray, list[str]]:
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    if pts.shape[1] != f.n_vars:
        raise ShapeError("points have the wrong number of coordinates")
    for i in range(len(pts)):
        for j in range(i):
            if np.array_equal(pts[i], pts[j]):
                raise ValidationError(f"points {j} and {i} coincide")
    vals = []
    for p in pts:
        w, _ = _f_values(f, p, degree)
        if 1 - float(np.vdot(w, w).real) < BOUNDARY_ATOL:
            raise BoundaryError("point is not strictly inside")
        vals.append(w)
    checks = ["norm condition"]
    if g is not None:
        for p, w in zip(pts, vals):
            back, tail = _f_values(g, w, None)
            if np.max(np.abs(back - p)) > tol + tail:
                raise ValidationError("point fails g(f(lambda)) = lambda")
        checks.append("g(f(lambda)) = lambda")
    return np.array(vals), checks


def gram_matrix(f: NCTuple, points, degree: int | None = None) -> np.ndarray:
    """``[Lambda_f(lambda_i, lambda_j)]``, Hermitian by construction."""
    W, _ = _validate_points(f, points, degree)
    m = len(W)
    G = np.zeros((m, m), dtype=complex)
    for i in range(m):
        G[i, i] = _kernel(W[i], W[i]).real
        for j in range(i + 1, m):
            G[i, j] = _kernel(W[i], W[j])
            G[j, i] = np.conj(G[i, j])
    return G


@dataclass
class PickProblem:
    f: NCTuple
    points: np.ndarray
    targets: np.ndarray
    degree: int | None = None
    g: NCTuple | None = None
    verified: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=complex))
        tg = np.asarray(self.targets, dtype=complex)
        if tg.ndim == 1:
            tg = tg.reshape(-1, 1, 1)
        if tg.ndim != 3 or tg.shape[1] != tg.shape[2]:
            raise ShapeError("targets must be square matrices of common size")
        if tg.shape[0] != self.points.shape[0]:
            raise ShapeError("one target per point is required")
        if tg.shape[1] > MAX_TARGET_SIZE:
            raise ShapeError(f"target size above {MAX_TARGET_SIZE}")
        self.targets = tg
        self._values, self.verified = _validate_points(self.f, self.points, self.degree, self.g)
        self._assembled: np.ndarray | None = None

    @property
    def assembled(self) -> np.ndarray:
        if self._assembled is None:
            self._assembled = _assemble(self)
        return self._assembled


def _assemble(pr: PickProblem) -> np.ndarray:
    W = pr._values
    A = pr.targets
    m, k = A.shape[0], A.shape[1]
    out = np.zeros((m * k, m * k), dtype=complex)
    I = np.eye(k)
    for i in range(m):
        for j in range(i, m):
            blk = (I - A[i] @ A[j].conj().T) * _kernel(W[i], W[j])
            out[i * k:(i + 1) * k, j * k:(j + 1) * k] = blk
            if i != j:
                out[j * k:(j + 1) * k, i * k:(i + 1) * k] = blk.conj().T
            else:
                out[i * k:(i + 1) * k, i * k:(i + 1) * k] = (blk + blk.conj().T) / 2
    return out


def pick_matrix(problem: PickProblem) -> np.ndarray:
    return problem.assembled


@dataclass
class PickVerdict:
    feasible: bool | None
    verdict: str
    min_eig: float
    max_eig: float
    certificate: np.ndarray | None
    threshold: float


def pick_feasible(problem: PickProblem, tol: float = cmatrix.DEFAULT_TOL) -> PickVerdict:
    """Feasible when the Pick matrix is PSD; ``None`` inside the +-tol band."""
    P = problem.assembled
    res = cmatrix.psd_check(P, tol)
    scale = max(1.0, res.max_eig)
    band = tol * scale
    w, V = cmatrix.hermitian_eigh(P)
    cert = None
    if abs(res.min_eig) < band:
        feasible, verdict = None, "boundary-inconclusive"
    elif res.psd:
        feasible, verdict = True, "feasible"
    else:
        feasible, verdict = False, "infeasible"
        cert = V[:, 0]
    return PickVerdict(feasible, verdict, res.min_eig, res.max_eig, cert, band)
