"""Command-line scenario runner.

A scenario is one JSON document naming a metric, a task and the task's
inputs.  Exit status: 0 on success, 1 for schema errors, 2 for domain
errors (the error object is written to stderr as one JSON line).
"""

import argparse
import io
import json
import math
import sys

import numpy as np

from . import catalog
from .curvature import flag_curvature, random_flags
from .curves import PiecewiseCurve, VectorFieldAlongCurve
from .errors import FinslerError, ScenarioError
from .geodesic import exponential_map, integrate_geodesic, parallel_transport
from .jacobi import conjugate_points, determinant_table, focal_points, p_jacobi_basis, solve_jacobi
from .connection import christoffel, spray
from .metric import evaluate_L
from .submanifold import normal_section, patch_from_spec
from .variation import energy, first_variation, index_form, second_variation

TASKS = (
    "geodesic",
    "exp",
    "transport",
    "christoffel",
    "flagcurv",
    "jacobi",
    "conjugate",
    "focal",
    "variation",
    "indexform",
    "validate",
)

COMMON_FIELDS = {"metric", "params", "task", "format", "seed", "rtol", "atol", "method", "step"}
GEODESIC_FIELDS = {"x0", "v0", "span"}

# task -> (required fields, optional fields)
SCHEMA = {
    "geodesic": (GEODESIC_FIELDS, {"samples", "ts"}),
    "exp": ({"p", "v"}, set()),
    "transport": ({"w0"}, GEODESIC_FIELDS | {"curve", "samples", "ts"}),
    "christoffel": ({"x", "v"}, set()),
    "flagcurv": (set(), {"x", "v", "w", "flags"}),
    "jacobi": (GEODESIC_FIELDS | {"J0", "dJ0"}, {"samples", "ts"}),
    "conjugate": (GEODESIC_FIELDS, {"det_samples"}),
    "focal": ({"P", "span"}, {"x0", "v0", "u", "det_samples"}),
    "variation": ({"W"}, GEODESIC_FIELDS | {"curve"}),
    "indexform": (GEODESIC_FIELDS | {"P", "Q", "V", "W"}, set()),
    "validate": (set(), {"metrics", "samples", "tol"}),
}

DEFAULT_SAMPLES = 11


# scenario parsing --------------------------------------------------------------------------


def _vector(scen, key, dim=None):
    val = scen[key]
    try:
        arr = np.asarray(val, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{key}.invalid", f"{key} must be a numeric vector") from None
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{key}.invalid", f"{key} must be a finite numeric vector")
    if dim is not None and len(arr) != dim:
        raise ScenarioError(f"{key}.dimension", f"{key} must have {dim} components, got {len(arr)}")
    return arr


def _matrix(val, key, dim):
    try:
        arr = np.asarray(val, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{key}.invalid", f"{key} must be numeric") from None
    if arr.ndim != 2 or arr.shape[1] != dim or not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{key}.invalid", f"{key} must be a list of {dim}-vectors")
    return arr


def _span(scen):
    val = scen["span"]
    if not (isinstance(val, (list, tuple)) and len(val) == 2):
        raise ScenarioError("span.invalid", "span must be [a, b]")
    try:
        a, b = float(val[0]), float(val[1])
    except (TypeError, ValueError):
        raise ScenarioError("span.invalid", "span must be numeric") from None
    if not b > a:
        raise ScenarioError("span.decreasing", f"span [{a}, {b}] must be increasing")
    return a, b


def _int(scen, key, default, lo=1):
    val = scen.get(key, default)
    if isinstance(val, bool) or not isinstance(val, int) or val < lo:
        raise ScenarioError(f"{key}.invalid", f"{key} must be an integer >= {lo}")
    return val


def check_schema(scen):
    if not isinstance(scen, dict):
        raise ScenarioError("scenario.invalid", "scenario must be a JSON object")
    task = scen.get("task")
    if task is None:
        raise ScenarioError("task.missing", "scenario has no task")
    if task not in SCHEMA:
        raise ScenarioError("task.unknown", f"unknown task {task!r}")
    required, optional = SCHEMA[task]
    allowed = COMMON_FIELDS | required | optional
    for key in scen:
        if key not in allowed:
            raise ScenarioError(f"{key}.unknown", f"field {key!r} is not valid for task {task!r}")
    for key in sorted(required):
        if key not in scen:
            raise ScenarioError(f"{key}.missing", f"task {task!r} needs field {key!r}")
    if task != "validate" and "metric" not in scen:
        raise ScenarioError("metric.missing", "scenario has no metric")
    fmt = scen.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ScenarioError("format.invalid", "format must be csv or json")
    if scen.get("method", "rkf45") not in ("rkf45", "rk4"):
        raise ScenarioError("method.invalid", "method must be rkf45 or rk4")
    if "span" in scen:
        _span(scen)
    return task


def _metric(scen):
    spec = scen["metric"]
    if isinstance(spec, str):
        spec = {"metric": spec}
    elif not isinstance(spec, dict):
        raise ScenarioError("metric.invalid", "metric must be an id or an object")
    params = scen.get("params", {})
    if not isinstance(params, dict):
        raise ScenarioError("params.invalid", "params must be an object")
    return catalog.from_spec(dict(spec, **params))


def _options(scen):
    opts = {}
    for key in ("rtol", "atol"):
        if key in scen:
            val = scen[key]
            if isinstance(val, bool) or not isinstance(val, (int, float)) or not val > 0:
                raise ScenarioError(f"{key}.invalid", f"{key} must be a positive number")
            opts[key] = float(val)
    if "method" in scen:
        opts["method"] = scen["method"]
    if "step" in scen:
        opts["step"] = float(scen["step"])
    return opts


def _times(scen, a, b):
    if "ts" in scen:
        ts = _vector(scen, "ts")
        if np.any(ts < a - 1e-12) or np.any(ts > b + 1e-12) or np.any(np.diff(ts) <= 0):
            raise ScenarioError("ts.invalid", "ts must be increasing and inside the span")
        return ts
    return np.linspace(a, b, _int(scen, "samples", DEFAULT_SAMPLES, lo=2))


def _geodesic(m, scen, stops=()):
    x0, v0 = _vector(scen, "x0", m.dim), _vector(scen, "v0", m.dim)
    return integrate_geodesic(m, x0, v0, _span(scen), stops=stops, **_options(scen))


def _patch(scen, key):
    spec = scen[key]
    if not isinstance(spec, dict):
        raise ScenarioError(f"{key}.invalid", f"{key} must be a patch object")
    try:
        return patch_from_spec(spec)
    except ScenarioError as exc:
        raise ScenarioError(exc.code.replace("patch", key, 1), str(exc)) from exc


def _curve(scen, m):
    spec = scen["curve"]
    if not isinstance(spec, dict):
        raise ScenarioError("curve.invalid", "curve must be an object")
    for key in spec:
        if key not in ("ts", "points", "breaks", "polyline"):
            raise ScenarioError(f"curve.{key}.unknown", f"curve has no field {key!r}")
    for key in ("ts", "points"):
        if key not in spec:
            raise ScenarioError(f"curve.{key}.missing", f"curve needs {key!r}")
    ts = _vector(spec, "ts")
    pts = _matrix(spec["points"], "curve.points", m.dim)
    if len(ts) != len(pts) or np.any(np.diff(ts) <= 0):
        raise ScenarioError("curve.invalid", "curve ts must be increasing and match the points")
    if spec.get("polyline", False):
        return PiecewiseCurve.polyline(pts, ts)
    breaks = spec.get("breaks", [])
    return PiecewiseCurve.from_samples(ts, pts, breaks)


def _field(scen, key, curve, m):
    spec = scen[key]
    if isinstance(spec, dict):
        for k in spec:
            if k not in ("ts", "values"):
                raise ScenarioError(f"{key}.{k}.unknown", f"{key} has no field {k!r}")
        for k in ("ts", "values"):
            if k not in spec:
                raise ScenarioError(f"{key}.{k}.missing", f"{key} needs {k!r}")
        ts = _vector(spec, "ts")
        vals = _matrix(spec["values"], f"{key}.values", m.dim)
        if len(ts) != len(vals):
            raise ScenarioError(f"{key}.invalid", f"{key} ts and values differ in length")
        if abs(ts[0] - curve.a) > 1e-12 or abs(ts[-1] - curve.b) > 1e-12:
            raise ScenarioError(f"{key}.invalid", f"{key} samples must cover [{curve.a}, {curve.b}]")
        return VectorFieldAlongCurve.from_samples(curve, ts, vals)
    return VectorFieldAlongCurve.constant(curve, _vector(scen, key, m.dim))


# tasks -------------------------------------------------------------------------------------


def _names(prefix, n):
    return [f"{prefix}{i}" for i in range(n)]


def task_geodesic(m, scen):
    a, b = _span(scen)
    ts = _times(scen, a, b)
    rec = _geodesic(m, scen, stops=ts)
    rows = [[t] + list(x) + list(v) + [evaluate_L(m, x, v)] for t, (x, v) in ((t, rec.state(t)) for t in ts)]
    return ["t"] + _names("x", m.dim) + _names("v", m.dim) + ["L"], rows, {"drift": rec.drift}


def task_exp(m, scen):
    x = exponential_map(m, _vector(scen, "p", m.dim), _vector(scen, "v", m.dim), **_rtol_atol(scen))
    return _names("x", m.dim), [list(x)], {}


def _rtol_atol(scen):
    return {k: v for k, v in _options(scen).items() if k in ("rtol", "atol")}


def task_transport(m, scen):
    w0 = _vector(scen, "w0", m.dim)
    if "curve" in scen:
        if GEODESIC_FIELDS & set(scen):
            raise ScenarioError("curve.conflict", "give either a curve or x0/v0/span, not both")
        curve = _curve(scen, m)
        ts = _times(scen, curve.a, curve.b)
        X = parallel_transport(m, curve, w0, **_rtol_atol(scen))
    else:
        for key in sorted(GEODESIC_FIELDS):
            if key not in scen:
                raise ScenarioError(f"{key}.missing", f"transport needs a curve or {key!r}")
        a, b = _span(scen)
        ts = _times(scen, a, b)
        curve = _geodesic(m, scen, stops=ts)
        X = parallel_transport(m, curve, w0, **_rtol_atol(scen))
    rows = [[t] + list(curve(t)) + list(X(t)) for t in ts]
    return ["t"] + _names("x", m.dim) + _names("w", m.dim), rows, {}


def task_christoffel(m, scen):
    x, v = _vector(scen, "x", m.dim), _vector(scen, "v", m.dim)
    gam = christoffel(m, x, v).gamma
    G = spray(m, x, v).G
    n = m.dim
    rows = [[k, i, j, gam[k, i, j]] for k in range(n) for i in range(n) for j in range(n)]
    return ["k", "i", "j", "gamma"], rows, {"G": list(G)}


def task_flagcurv(m, scen, seed):
    if "flags" in scen:
        if {"x", "v", "w"} & set(scen):
            raise ScenarioError("flags.conflict", "give either flags or x, v, w")
        flags = random_flags(m, _int(scen, "flags", 20), seed=seed)
    else:
        for key in ("x", "v", "w"):
            if key not in scen:
                raise ScenarioError(f"{key}.missing", f"flagcurv needs {key!r} or flags")
        flags = [(_vector(scen, "x", m.dim), _vector(scen, "v", m.dim), _vector(scen, "w", m.dim))]
    rows = []
    for x, v, w in flags:
        rows.append(list(x) + list(v) + list(w) + [flag_curvature(m, x, v, w), flag_curvature(m, x, v, w, "variational")])
    cols = _names("x", m.dim) + _names("v", m.dim) + _names("w", m.dim) + ["K_spray", "K_variational"]
    return cols, rows, {}


def task_jacobi(m, scen):
    a, b = _span(scen)
    ts = _times(scen, a, b)
    rec = _geodesic(m, scen, stops=ts)
    J = solve_jacobi(m, rec, _vector(scen, "J0", m.dim), _vector(scen, "dJ0", m.dim))
    rows = [[t] + list(J.J(t)) + list(J.dJ(t)) for t in ts]
    return ["t"] + _names("J", m.dim) + _names("dJ", m.dim), rows, {}


def _zero_rows(points):
    return ["t", "multiplicity"], [[p.t, p.multiplicity] for p in points]


def _det_rows(fields, scen, a, b):
    ts = np.linspace(a, b, _int(scen, "det_samples", 2, lo=2))
    return ["t", "det"], [[t, d] for t, d in zip(ts, determinant_table(fields, ts))]


def task_conjugate(m, scen):
    rec = _geodesic(m, scen)
    if "det_samples" in scen:
        fields = solve_jacobi(m, rec, np.zeros((m.dim, m.dim)), np.eye(m.dim))
        cols, rows = _det_rows(fields, scen, rec.a, rec.b)
    else:
        cols, rows = _zero_rows(conjugate_points(m, rec))
    return cols, rows, {}


def task_focal(m, scen):
    P = _patch(scen, "P")
    u = _vector(scen, "u", P.r) if "u" in scen else P.u0
    x0 = _vector(scen, "x0", m.dim) if "x0" in scen else P.point(u)
    if "v0" in scen:
        v0 = _vector(scen, "v0", m.dim)
    else:
        v0 = normal_section(m, P, P.locate(x0, u))
    rec = integrate_geodesic(m, x0, v0, _span(scen), **_options(scen))
    if "det_samples" in scen:
        cols, rows = _det_rows(p_jacobi_basis(m, rec, P), scen, rec.a, rec.b)
    else:
        cols, rows = _zero_rows(focal_points(m, rec, P))
    return cols, rows, {"v0": list(v0)}


def task_variation(m, scen):
    if "curve" in scen:
        if GEODESIC_FIELDS & set(scen):
            raise ScenarioError("curve.conflict", "give either a curve or x0/v0/span, not both")
        curve, is_geodesic = _curve(scen, m), False
    else:
        for key in sorted(GEODESIC_FIELDS):
            if key not in scen:
                raise ScenarioError(f"{key}.missing", f"variation needs a curve or {key!r}")
        curve, is_geodesic = _geodesic(m, scen), True
    W = _field(scen, "W", curve, m)
    row = [energy(m, curve), first_variation(m, curve, W)]
    row.append(second_variation(m, curve, W) if is_geodesic else math.nan)
    return ["energy", "first_variation", "second_variation"], [row], {}


def task_indexform(m, scen):
    rec = _geodesic(m, scen)
    P, Q = _patch(scen, "P"), _patch(scen, "Q")
    V, W = _field(scen, "V", rec, m), _field(scen, "W", rec, m)
    return ["I"], [[index_form(m, rec, P, Q, V, W)]], {}


def task_validate(scen, seed, tol):
    from .validation import validate

    metrics = scen.get("metrics") or None
    if metrics is not None and (not isinstance(metrics, list) or not all(isinstance(s, str) for s in metrics)):
        raise ScenarioError("metrics.invalid", "metrics must be a list of ids")
    for mid in metrics or []:
        if mid not in catalog.FACTORIES:
            raise ScenarioError("metrics.unknown", f"unknown metric {mid!r}")
    samples = _int(scen, "samples", 1) if "samples" in scen else None
    if tol is None and "tol" in scen:
        tol = float(scen["tol"])
    report = validate(metrics, seed=seed, samples=samples, tol=tol)
    rows = [[r.metric, r.check, r.residual, r.tol, r.status] for r in report.results]
    return ["metric", "check", "residual", "tol", "status"], rows, {"passed": report.passed}


def run_scenario(scen, seed=None, tol=None):
    """Validate and run a scenario; returns ``(columns, rows, meta)``."""
    task = check_schema(scen)
    seed = int(scen.get("seed", 0)) if seed is None else int(seed)
    if task == "validate":
        return task_validate(scen, seed, tol)
    if tol is not None:
        scen = dict(scen, rtol=float(tol))
    m = _metric(scen)
    handlers = {
        "geodesic": task_geodesic,
        "exp": task_exp,
        "transport": task_transport,
        "christoffel": task_christoffel,
        "jacobi": task_jacobi,
        "conjugate": task_conjugate,
        "focal": task_focal,
        "variation": task_variation,
        "indexform": task_indexform,
    }
    if task == "flagcurv":
        cols, rows, meta = task_flagcurv(m, scen, seed)
    else:
        cols, rows, meta = handlers[task](m, scen)
    meta = dict(meta, metric=m.spec)
    return cols, rows, meta


# output ------------------------------------------------------------------------------------


def _csv_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "{:.16e}".format(v)


def _json_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, str):
        return v
    v = float(v)
    return None if not math.isfinite(v) else v


def _json_clean(obj):
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_json_clean(v) for v in obj]
    return _json_cell(obj)


def render(task, cols, rows, meta, fmt):
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for row in rows:
            buf.write(",".join(_csv_cell(v) for v in row) + "\n")
        return buf.getvalue()
    doc = {"task": task, "columns": cols, "rows": _json_clean(rows), "meta": _json_clean(meta)}
    return json.dumps(doc) + "\n"


def render_scenario(scen, fmt=None, seed=None, tol=None):
    cols, rows, meta = run_scenario(scen, seed, tol)
    return render(scen["task"], cols, rows, meta, fmt or scen.get("format", "csv"))


def _error_line(exc):
    return json.dumps({"error": _json_clean(exc.to_dict())})


def _load(path):
    try:
        text = sys.stdin.read() if path == "-" else open(path, encoding="utf-8").read()
    except OSError as exc:
        raise ScenarioError("scenario.unreadable", str(exc)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("scenario.parse", f"invalid JSON: {exc}") from exc


def _write(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file, or - for stdin")
    common.add_argument("--seed", type=int, help="seed (overrides the scenario's)")
    common.add_argument("--tol", type=float, help="integrator rtol; for validate, every check tolerance")
    common.add_argument("--format", choices=("csv", "json"), help="output format")
    common.add_argument("--out", default="-", help="output path, or - for stdout")
    parser = argparse.ArgumentParser(prog="finslerlab", description="Pseudo-Finsler geometry scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run the task named inside the scenario")
    for task in TASKS:
        p = sub.add_parser(task, parents=[common], help=f"run a {task} scenario")
        if task == "validate":
            p.add_argument("metrics", nargs="*", help="catalog ids (default: all)")
            p.add_argument("--samples", type=int, help="sample count for every check")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate" and args.scenario is None:
            scen = {"task": "validate"}
            if args.metrics:
                scen["metrics"] = args.metrics
            if args.samples is not None:
                scen["samples"] = args.samples
        else:
            if args.scenario is None:
                raise ScenarioError("scenario.missing", f"{args.command} needs --scenario")
            scen = _load(args.scenario)
            if not isinstance(scen, dict):
                raise ScenarioError("scenario.invalid", "scenario must be a JSON object")
            if args.command != "run":
                if scen.get("task", args.command) != args.command:
                    raise ScenarioError("task.mismatch", f"scenario task {scen['task']!r} differs from {args.command!r}")
                scen = dict(scen, task=args.command)
        fmt = args.format or scen.get("format", "csv")
        cols, rows, meta = run_scenario(scen, args.seed, args.tol)
        _write(render(scen["task"], cols, rows, meta, fmt), args.out)
    except ScenarioError as exc:
        sys.stderr.write(_error_line(exc) + "\n")
        return 1
    except FinslerError as exc:
        sys.stderr.write(_error_line(exc) + "\n")
        return 2
    if scen["task"] == "validate" and not meta.get("passed", False):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
