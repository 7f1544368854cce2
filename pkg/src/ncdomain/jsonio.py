"""JSON encodings for series, tuples, matrices and point sets.

Complex numbers are written as ``[re, im]`` pairs (or ``re``/``im`` fields
inside series terms).  Output ordering is fixed, so identical data always
serializes to identical bytes.
"""
from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .errors import ValidationError
from .ncseries import NCSeries, NCTuple


def _num(x: float) -> float | str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def complex_pair(z: complex) -> list:
    z = complex(z)
    return [_num(z.real), _num(z.imag)]


def parse_complex(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, dict) and "re" in v:
        return complex(float(v["re"]), float(v.get("im", 0.0)))
    raise ValidationError(f"cannot read a complex number from {v!r}")


def series_to_json(F: NCSeries) -> dict:
    terms = [{"word": list(w), "re": _num(c.real), "im": _num(c.imag)} for w, c in F.coeffs.items()]
    out = {"n_vars": F.n_vars, "max_degree": F.max_degree, "terms": terms}
    if F.polynomial:
        out["polynomial"] = True
    return out


def series_from_json(obj: dict) -> NCSeries:
    try:
        n = int(obj["n_vars"])
        terms = obj["terms"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"series JSON needs n_vars and terms: {exc}") from None
    D = obj.get("max_degree")
    poly = bool(obj.get("polynomial", False))
    pairs = []
    for t in terms:
        if "word" not in t:
            raise ValidationError("series term without a word")
        pairs.append((t["word"], complex(float(t.get("re", 0.0)), float(t.get("im", 0.0)))))
    return NCSeries.from_terms(n, pairs, None if D is None else int(D), poly)


def tuple_to_json(F: NCTuple) -> dict:
    return {"components": [series_to_json(c) for c in F]}


def tuple_from_json(obj: Any) -> NCTuple:
    if isinstance(obj, dict) and "components" in obj:
        return NCTuple([series_from_json(c) for c in obj["components"]])
    if isinstance(obj, dict) and "terms" in obj:
        return NCTuple([series_from_json(obj)])
    raise ValidationError("expected a tuple with 'components' or a single series")


def matrix_to_json(A) -> dict:
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    return {"rows": int(A.shape[0]), "cols": int(A.shape[1]),
            "data": [complex_pair(z) for z in A.reshape(-1)]}


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        r, c = int(obj["rows"]), int(obj["cols"])
        data = obj["data"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"matrix JSON needs rows, cols and data: {exc}") from None
    if len(data) != r * c:
        raise ValidationError(f"matrix data has {len(data)} entries, expected {r * c}")
    return np.array([parse_complex(v) for v in data], dtype=complex).reshape(r, c)


def matrices_to_json(mats) -> dict:
    return {"matrices": [matrix_to_json(M) for M in mats]}


def matrices_from_json(obj: Any, key: str = "matrices") -> list[np.ndarray]:
    if isinstance(obj, dict) and key in obj:
        return [matrix_from_json(m) for m in obj[key]]
    if isinstance(obj, list):
        return [matrix_from_json(m) for m in obj]
    raise ValidationError(f"expected a list of matrices under {key!r}")


def points_to_json(points) -> dict:
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    return {"points": [[complex_pair(z) for z in p] for p in pts]}


def points_from_json(obj: Any) -> np.ndarray:
    raw = obj.get("points") if isinstance(obj, dict) else obj
    if not isinstance(raw, list) or not raw:
        raise ValidationError("expected a nonempty list of points")
    pts = [[parse_complex(z) for z in p] for p in raw]
    if len({len(p) for p in pts}) != 1:
        raise ValidationError("points have inconsistent dimensions")
    return np.array(pts, dtype=complex)


def point_from_json(obj: Any) -> np.ndarray:
    raw = obj.get("point") if isinstance(obj, dict) else obj
    if not isinstance(raw, list):
        raise ValidationError("expected a point as a list of coordinates")
    return np.array([parse_complex(z) for z in raw], dtype=complex)


def to_jsonable(x: Any) -> Any:
    """Recursively convert numpy and complex values to JSON-ready data."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        if x.ndim == 2:
            return matrix_to_json(x)
        return [to_jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return _num(x)
    if isinstance(x, (complex, np.complexfloating)):
        return complex_pair(x)
    if isinstance(x, NCSeries):
        return series_to_json(x)
    if isinstance(x, NCTuple):
        return tuple_to_json(x)
    return x


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=False) + "\n"
