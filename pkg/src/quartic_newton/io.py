"""Problem files (JSON) and run logs (CSV plus a JSON header)."""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .forms import DenseTensor, EuclideanPower, SumOfLinearQuartics
from .linalg import Metric
from .objective import (L1, BallIndicator, BoxIndicator, CompositeProblem, ConvexQuartic,
                        LogSumExp, QRegularSpec, Zero, build_taylor3, prox_regularized)

CSV_COLUMNS = ("k", "F", "xi_star", "gap", "step_norm", "sub_iters", "wall_ns")


class ProblemFileError(ValueError):
    pass


_VEC = {"type": "array", "items": {"type": "number"}}
_MAT = {"type": "array", "items": _VEC}

PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["n", "metric", "smooth", "psi"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "metric": {
            "type": "object",
            "oneOf": [{"required": ["diag"]}, {"required": ["dense"]}],
            "properties": {"diag": _VEC, "dense": _MAT},
            "additionalProperties": False,
        },
        "smooth": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["sum_quartic", "quadratic_plus_quartic",
                                             "taylor3", "lse_reg"]}},
        },
        "psi": {
            "type": "object",
            "required": ["type"],
            "properties": {"type": {"enum": ["zero", "ball", "box", "l1"]}},
        },
        "known": {
            "type": "object",
            "properties": {
                "F_star": {"type": "number"}, "x_star": _VEC, "mu": {"type": "number"},
                "L": {"type": "number"}, "M4": {"type": "number"}, "L3": {"type": "number"},
                "exact_mu_L": {"type": "boolean"},
            },
        },
        "x0": _VEC,
    },
}

_SMOOTH_FIELDS = {
    "sum_quartic": ("a", "c", "sigma", "Q", "g"),
    "quadratic_plus_quartic": ("shift", "Q", "quartic", "offset"),
    "taylor3": ("A", "b", "rho", "xbar", "H"),
    "lse_reg": ("A", "b", "rho", "H", "center"),
}

FORM_SCHEMA = {
    "type": "object",
    "required": ["tensor"],
    "properties": {"tensor": {"type": "array"}},
}


@dataclass
class LoadedProblem:
    problem: CompositeProblem
    known: dict
    spec: QRegularSpec | None
    x0: np.ndarray
    kind: str
    doc: dict


def _metric(d: dict, n: int) -> Metric:
    if "diag" in d:
        v = np.asarray(d["diag"], dtype=float)
        if v.shape != (n,):
            raise ProblemFileError("metric.diag must have length n")
        return Metric.diag(v)
    B = np.asarray(d["dense"], dtype=float)
    if B.shape != (n, n):
        raise ProblemFileError("metric.dense must be n x n")
    return Metric(B)


def _smooth(d: dict, m: Metric):
    kind = d["kind"]
    missing = [f for f in _SMOOTH_FIELDS[kind] if f not in d]
    if missing:
        raise ProblemFileError(f"smooth.{kind} is missing {missing}")
    n = m.n
    z = np.zeros(n)
    if kind == "sum_quartic":
        f4 = SumOfLinearQuartics(np.asarray(d["a"], dtype=float).reshape(-1, n), d["c"],
                                 d["sigma"], m)
        return ConvexQuartic(z, 0.0, d["g"], d["Q"], f4)
    if kind == "quadratic_plus_quartic":
        return ConvexQuartic(d["shift"], d["offset"], z, d["Q"], EuclideanPower(d["quartic"], m))
    lse = LogSumExp(d["A"], d["b"], d["rho"], m)
    if lse.n != n:
        raise ProblemFileError("A must have n columns")
    if kind == "taylor3":
        return build_taylor3(lse, d["xbar"], d["H"], m)
    return prox_regularized(lse, d["center"], d["H"], m) if d["H"] > 0 else lse


def _psi(d: dict, m: Metric):
    t = d["type"]
    try:
        if t == "zero":
            return Zero()
        if t == "ball":
            return BallIndicator(d["center"], d["radius"], m)
        if t == "box":
            return BoxIndicator(d["lo"], d["hi"])
        return L1(d["weight"])
    except KeyError as e:
        raise ProblemFileError(f"psi.{t} is missing {e}") from None


def build_problem(doc: dict) -> LoadedProblem:
    try:
        jsonschema.validate(doc, PROBLEM_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ProblemFileError(f"schema: {e.message}") from None
    n = doc["n"]
    try:
        m = _metric(doc["metric"], n)
        f = _smooth(doc["smooth"], m)
        psi = _psi(doc["psi"], m)
        problem = CompositeProblem(f, psi, m)
    except ProblemFileError:
        raise
    except (ValueError, np.linalg.LinAlgError) as e:
        raise ProblemFileError(str(e)) from None
    known = dict(doc.get("known", {}))
    spec = None
    if "mu" in known and "L" in known and known["L"] > 0:
        spec = QRegularSpec(known["mu"], known["L"])
    x0 = np.asarray(doc.get("x0", np.zeros(n)), dtype=float)
    if x0.shape != (n,):
        raise ProblemFileError("x0 must have length n")
    return LoadedProblem(problem, known, spec, x0, doc["smooth"]["kind"], doc)


def dumps_json(doc) -> str:
    """Deterministic JSON; floats use the shortest exact round-trip repr."""
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=True) + "\n"


def save_problem(doc: dict, path) -> None:
    Path(path).write_text(dumps_json(doc))


def load_problem(path) -> LoadedProblem:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ProblemFileError(f"cannot read {path}: {e}") from None
    return build_problem(doc)


def load_form(path) -> DenseTensor:
    """Dense symmetric tensor from ``{"tensor": [[[[...]]]]}``; rejects asymmetric input."""
    try:
        doc = json.loads(Path(path).read_text())
        jsonschema.validate(doc, FORM_SCHEMA)
    except (OSError, json.JSONDecodeError, jsonschema.ValidationError) as e:
        raise ProblemFileError(f"cannot read form file {path}: {e}") from None
    try:
        return DenseTensor(np.asarray(doc["tensor"], dtype=float))
    except ValueError as e:
        raise ProblemFileError(str(e)) from None


# --- run logs ----------------------------------------------------------------

def _g17(v) -> str:
    if v is None:
        return "nan"
    return format(float(v), ".17g")


def run_rows(run, timing: bool = True) -> list[list[str]]:
    rows = []
    for r in run.records:
        xi = r.xi
        gap = r.F - xi if xi is not None else None
        rows.append([str(r.k), _g17(r.F), _g17(xi), _g17(gap), _g17(r.step_norm),
                     str(r.sub_iters), str(r.wall_ns if timing else 0)])
    return rows


def render_csv(rows, columns=CSV_COLUMNS) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def content_hash(rows, columns=CSV_COLUMNS) -> str:
    """SHA-256 of the CSV with the timing column removed."""
    keep = [i for i, c in enumerate(columns) if c != "wall_ns"]
    text = render_csv([[r[i] for i in keep] for r in rows], [columns[i] for i in keep])
    return hashlib.sha256(text.encode()).hexdigest()


def write_run(run, prefix, timing: bool = True, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``PREFIX.csv`` and ``PREFIX.json``; returns both paths."""
    prefix = Path(prefix)
    rows = run_rows(run, timing)
    csv_path = prefix.with_name(prefix.name + ".csv")
    json_path = prefix.with_name(prefix.name + ".json")
    csv_path.write_text(render_csv(rows))
    header = run.header()
    header.update(content_hash=content_hash(rows), columns=list(CSV_COLUMNS),
                  rows=len(rows), x_final=run.x.tolist(), **(extra or {}))
    json_path.write_text(dumps_json(_plain(header)))
    return csv_path, json_path


def read_run_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(cols))
    return {c: data[:, i] for i, c in enumerate(cols)}


def _plain(obj):
    """Convert numpy scalars/arrays for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
