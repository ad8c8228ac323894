"""Command-line driver: JSON config in, deterministic JSON report out.

    vwtoric slope --config job.json
    vwtoric df --config job.json --pipeline both --out report.json
    vwtoric pbundle report --config bundle.json --csv curve.csv

Exit status is 0 on success, 2 for invalid input and 3 for failures during
computation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from fractions import Fraction
from typing import Callable, Dict, List

import jsonschema
import numpy as np

from . import abreu, invariants, pbundle, testconfig
from .errors import ComputationError, SchemaError, ValidationError, VWError
from .geometry import Polytope, polytope_from_json
from .invariants import PLConvex, ScanGrid
from .poly import as_fraction, format_fraction
from .quad import DEFAULT_ORDER
from .weights import WeightExpr, weight_from_json

COMMANDS = ("slope", "wext", "futaki", "scan", "abreu", "df",
            "pbundle-solve", "pbundle-futaki", "pbundle-report")

_RAT = {"oneOf": [{"type": "integer"},
                  {"type": "string", "pattern": r"^\s*[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?(\s*/\s*\d+)?\s*$"}]}
_REAL = {"oneOf": [{"type": "number"}, _RAT]}
_WEIGHT = {"type": "object",
           "oneOf": [{"required": ["expr"], "properties": {"expr": {"type": "string"}}},
                     {"required": ["family"], "properties": {"family": {"type": "string"}}}]}
_POLYTOPE = {"type": "object", "required": ["dim", "labels"],
             "properties": {"dim": {"type": "integer", "minimum": 1},
                            "labels": {"type": "array", "minItems": 2,
                                       "items": {"type": "object", "required": ["normal", "offset"],
                                                 "properties": {"normal": {"type": "array",
                                                                           "items": {"type": "integer"}},
                                                                "offset": _RAT}}}}}
_PIECES = {"type": "array", "minItems": 1,
           "items": {"type": "object", "required": ["slope", "intercept"],
                     "properties": {"slope": {"type": "array", "items": _RAT}, "intercept": _RAT}}}
_FACTOR = {"type": "object", "required": ["d", "scal", "xi", "c"],
           "properties": {"d": {"type": "integer", "minimum": 1}, "scal": _RAT, "xi": _RAT, "c": _RAT}}

SCHEMA = {
    "type": "object",
    "properties": {
        "polytope": _POLYTOPE,
        "v": _WEIGHT,
        "w": _WEIGHT,
        "f": _PIECES,
        "c": _RAT,
        "R": _RAT,
        "klist": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "relative": {"type": "boolean"},
        "points": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "correction": _WEIGHT,
        "method": {"enum": ["auto", "analytic", "fd"]},
        "identity": {"type": "object", "required": ["f"],
                     "properties": {"f": _WEIGHT, "c": _RAT,
                                    "epsilons": {"type": "array", "items": _RAT, "minItems": 3, "maxItems": 3}}},
        "scan": {"type": "object",
                 "properties": {"max_coeff": {"type": "integer", "minimum": 1},
                                "n_offsets": {"type": "integer", "minimum": 1},
                                "directions": {"type": "array", "items": {"type": "array", "items": _RAT}},
                                "offsets": {"type": "array", "items": _RAT}}},
        "admissible": {"type": "object", "required": ["factors", "v", "w"],
                       "properties": {"factors": {"type": "array", "items": _FACTOR},
                                      "v": _WEIGHT, "w": _WEIGHT}},
        "z0": _REAL,
        "z0_grid": {"type": "array", "items": {"type": "number"}},
        "pipeline": {"enum": ["float", "exact", "both"]},
    },
}

_REQUIRED = {
    "slope": ["polytope", "v", "w"],
    "wext": ["polytope", "v", "w"],
    "futaki": ["polytope", "v", "w", "f"],
    "scan": ["polytope", "v", "w"],
    "abreu": ["polytope", "v"],
    "df": ["polytope", "v", "w", "f", "R"],
    "pbundle-solve": ["admissible"],
    "pbundle-futaki": ["admissible"],
    "pbundle-report": ["admissible"],
}


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == 0:
        return "0.0"
    text = "%.17g" % x
    return text if any(ch in text for ch in ".en") else text + ".0"


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits, Fractions as "num/den"."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, Fraction):
        return json.dumps(format_fraction(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + dumps(x, indent, _level + 1) for x in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _is_number(x) -> bool:
    return isinstance(x, (int, float, Fraction, np.integer, np.floating)) and not isinstance(x, bool)


def _pair(fl, ex):
    """Merge float and exact results; numeric leaves become {float, exact, divergence}."""
    if isinstance(ex, str) and _is_rational_text(ex):
        ex = as_fraction(ex)
    if isinstance(fl, str) and _is_rational_text(fl):
        fl = float(as_fraction(fl))
    if _is_number(fl) and _is_number(ex):
        a, b = float(fl), float(ex)
        div = abs(a - b) / max(abs(b), 1e-300) if b != 0 else abs(a)
        return {"float": a, "exact": ex, "divergence": div}
    if isinstance(fl, dict) and isinstance(ex, dict):
        return {k: _pair(fl.get(k), ex.get(k)) if k in fl and k in ex else (fl.get(k, ex.get(k)))
                for k in sorted(set(fl) | set(ex))}
    if isinstance(fl, (list, tuple)) and isinstance(ex, (list, tuple)) and len(fl) == len(ex):
        return [_pair(a, b) for a, b in zip(fl, ex)]
    return fl if fl == ex else {"float": fl, "exact": ex}


def _is_rational_text(s: str) -> bool:
    try:
        as_fraction(s)
        return True
    except (ValueError, ZeroDivisionError, TypeError):
        return False


def _max_divergence(obj) -> float:
    if isinstance(obj, dict):
        if "divergence" in obj and "float" in obj and "exact" in obj:
            return float(obj["divergence"])
        return max([_max_divergence(v) for v in obj.values()] + [0.0])
    if isinstance(obj, list):
        return max([_max_divergence(v) for v in obj] + [0.0])
    return 0.0


# ---------------------------------------------------------------------------
# config ingestion
# ---------------------------------------------------------------------------

def validate_config(command: str, config) -> None:
    try:
        jsonschema.validate(config, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise SchemaError(f"config invalid: {exc.message}", path) from None
    missing = [k for k in _REQUIRED[command] if k not in config]
    if missing:
        raise SchemaError(f"command {command!r} needs {', '.join(missing)}", missing[0])


def _polytope(config) -> Polytope:
    return polytope_from_json(config["polytope"])


def _weight(config, key: str, dim: int) -> WeightExpr:
    return weight_from_json(config[key], dim)


def _pieces(config, dim: int) -> PLConvex:
    f = PLConvex(tuple((tuple(p["slope"]), p["intercept"]) for p in config["f"]))
    if f.dim != dim:
        raise ValidationError(f"PL function has dimension {f.dim}, polytope has {dim}")
    return f


def _admissible(config) -> pbundle.AdmissibleData:
    a = config["admissible"]
    return pbundle.AdmissibleData(tuple(a["factors"]), weight_from_json(a["v"], 1), weight_from_json(a["w"], 1))


def _value(x, pipeline: str):
    return x if pipeline == "exact" else float(x)


# ---------------------------------------------------------------------------
# commands; each returns (results, residuals, table) for one pipeline
# ---------------------------------------------------------------------------

def _cmd_slope(config, pipeline, order, threads, opts):
    P = _polytope(config)
    v, w = _weight(config, "v", P.dim), _weight(config, "w", P.dim)
    return {"value": _value(invariants.slope(P, v, w, order, pipeline), pipeline)}, {}, None


def _cmd_wext(config, pipeline, order, threads, opts):
    P = _polytope(config)
    v, w = _weight(config, "v", P.dim), _weight(config, "w", P.dim)
    ext = invariants.solve_w_ext(P, v, w, order, pipeline)
    c1 = invariants.slope(P, v, w * ext.as_weight(), order, pipeline, check=False)
    res = {"orthogonality": ext.residual, "slope_minus_one": abs(float(c1) - 1)}
    out = {"xi": [_value(x, pipeline) for x in ext.xi], "c": _value(ext.c, pipeline),
           "gram_condition": ext.gram_condition}
    return out, res, None


def _cmd_futaki(config, pipeline, order, threads, opts):
    P = _polytope(config)
    v, w = _weight(config, "v", P.dim), _weight(config, "w", P.dim)
    f = _pieces(config, P.dim)
    c = invariants.slope(P, v, w, order, pipeline) if "c" not in config else as_fraction(config["c"])
    out = {"value": _value(invariants.futaki(P, v, w, f, c, order, pipeline, validate=True), pipeline),
           "c": _value(c, pipeline)}
    if config.get("relative"):
        out["relative"] = _value(invariants.relative_futaki(P, v, w, f, order, pipeline), pipeline)
    return out, {}, None


def _cmd_scan(config, pipeline, order, threads, opts):
    P = _polytope(config)
    v, w = _weight(config, "v", P.dim), _weight(config, "w", P.dim)
    sc = config.get("scan", {})
    if "directions" in sc:
        grid = ScanGrid(tuple(tuple(as_fraction(x) for x in d) for d in sc["directions"]),
                        tuple(as_fraction(x) for x in sc.get("offsets", [])), sc.get("n_offsets", 9))
    else:
        grid = ScanGrid.lattice(P.dim, sc.get("max_coeff", 1), sc.get("n_offsets", 9))
        if "offsets" in sc:
            grid = ScanGrid(grid.directions, tuple(as_fraction(x) for x in sc["offsets"]), 0)
    results = invariants.scan_destabilizers(P, v, w, grid, order, threads)
    rows = [r.to_json() for r in results]
    out = {"candidates": rows, "minimum": rows[0] if rows else None}
    table = [["direction", "offset", "value"]] + [[" ".join(r["direction"]), r["offset"], r["value"]] for r in rows]
    return out, {}, table


def _default_points(P: Polytope) -> np.ndarray:
    lo, hi = P.bounding_box
    axes = [np.linspace(float(a), float(b), 11) for a, b in zip(lo, hi)]
    X = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    keep = abreu._distance_to_boundary(P, X) >= 0.1 * P.inradius
    return X[keep]


def _cmd_abreu(config, pipeline, order, threads, opts):
    P = _polytope(config)
    v = _weight(config, "v", P.dim)
    corr = _weight(config, "correction", P.dim) if "correction" in config else None
    u = abreu.guillemin_potential(P, corr)
    X = np.array(config["points"], dtype=float) if "points" in config else _default_points(P)
    if X.ndim != 2 or X.shape[1] != P.dim:
        raise ValidationError(f"points must be a list of {P.dim}-vectors")
    vals = abreu.scal_v(u, v, X, config.get("method", "auto"))
    out = {"points": X.tolist(), "scal_v": [float(x) for x in np.atleast_1d(vals)], "potential": u.kind}
    res = {}
    if "identity" in config:
        w = _weight(config, "w", P.dim) if "w" in config else v
        idc = config["identity"]
        fw = weight_from_json(idc["f"], P.dim)
        c = as_fraction(idc["c"]) if "c" in idc else invariants.slope(P, v, w, order)
        eps = tuple(as_fraction(e) for e in idc.get("epsilons", abreu.DEFAULT_EPSILONS))
        chk = abreu.check_futaki_identity(P, u, v, w, fw, c, order, eps)
        out["identity"] = {"lhs": chk.lhs, "rhs": chk.rhs, "futaki_term": chk.futaki_term,
                           "hessian_term": chk.hessian_term, "lhs_sequence": list(chk.lhs_sequence),
                           "hessian_sequence": list(chk.hessian_sequence)}
        res["identity"] = chk.residual
    table = [[f"p{i + 1}" for i in range(P.dim)] + ["scal_v"]]
    table += [list(map(float, p)) + [s] for p, s in zip(out["points"], out["scal_v"])]
    return out, res, table


def _cmd_df(config, pipeline, order, threads, opts):
    P = _polytope(config)
    v, w = _weight(config, "v", P.dim), _weight(config, "w", P.dim)
    cfg = testconfig.build_config(P, _pieces(config, P.dim), config["R"])
    rec = testconfig.donaldson_futaki(cfg, v, w, config.get("klist"), order, pipeline)
    out = rec.to_json()
    res = {"fit_v": rec.fit_v.residual, "fit_w": rec.fit_w.residual}
    return out, res, None


def _cmd_pbundle_solve(config, pipeline, order, threads, opts):
    data = _admissible(config)
    sol = pbundle.solve_theta(data, pipeline=pipeline)
    out = sol.to_json()
    out["positivity"] = pbundle.check_positivity(sol).to_json()
    res = {"boundary": sol.max_residual(), "normalization": pbundle.normalization_residual(data, sol.A1, sol.A2)}
    return out, res, None


def _cmd_pbundle_futaki(config, pipeline, order, threads, opts):
    data = _admissible(config)
    z0 = opts.get("z0")
    if z0 is None:
        z0 = config.get("z0")
    if z0 is None:
        raise SchemaError("pbundle-futaki needs z0 (config field or --z0)", "z0")
    z0 = as_fraction(z0) if pipeline == "exact" else float(as_fraction(z0) if isinstance(z0, str) else z0)
    A1, A2 = pbundle.solve_w_ext_ode(data, pipeline)
    sol = pbundle.solve_theta(data, A1, A2, pipeline)
    F = pbundle.futaki_z0(data, A1, A2, z0, pipeline)
    if pipeline == "exact":
        phi0 = sol.phi_poly(as_fraction(z0))
    else:
        phi0 = float(sol.phi(float(z0))[0])
    out = {"z0": _value(z0, pipeline), "F": _value(F, pipeline), "vu_theta": _value(phi0, pipeline),
           "A1": _value(A1, pipeline), "A2": _value(A2, pipeline)}
    return out, {"identity": abs(float(F) - float(phi0))}, None


def _cmd_pbundle_report(config, pipeline, order, threads, opts):
    data = _admissible(config)
    grid = config.get("z0_grid")
    rep = pbundle.stability_report(data, pipeline, grid)
    out = rep.to_json()
    res = {"identity": rep.identity_residual, "normalization": rep.normalization_residual,
           "boundary": rep.solution.max_residual()}
    table = [["z0", "F", "theta"]] + [list(r) for r in zip(rep.z0, rep.F, rep.theta_values)]
    return out, res, table


_DISPATCH: Dict[str, Callable] = {
    "slope": _cmd_slope, "wext": _cmd_wext, "futaki": _cmd_futaki, "scan": _cmd_scan,
    "abreu": _cmd_abreu, "df": _cmd_df, "pbundle-solve": _cmd_pbundle_solve,
    "pbundle-futaki": _cmd_pbundle_futaki, "pbundle-report": _cmd_pbundle_report,
}

# commands whose computation is float-only regardless of the requested pipeline
_FLOAT_ONLY = {"scan", "abreu"}


def run(command: str, config: dict, pipeline: str | None = None, order: int = DEFAULT_ORDER,
        threads: int = 1, timing: bool = False, **opts) -> dict:
    """Validate, dispatch and assemble the report for one job."""
    if command not in _DISPATCH:
        raise SchemaError(f"unknown command {command!r}", "command")
    validate_config(command, config)
    pipeline = pipeline or config.get("pipeline", "float")
    fn = _DISPATCH[command]
    t0 = time.perf_counter()
    table = None
    if command in _FLOAT_ONLY:
        effective = "float"
        results, residuals, table = fn(config, "float", order, threads, opts)
    elif pipeline == "both":
        effective = "both"
        rf, resf, table = fn(config, "float", order, threads, opts)
        rx, resx, _ = fn(config, "exact", order, threads, opts)
        results = _pair(rf, rx)
        residuals = {"float": resf, "exact": resx, "max_divergence": _max_divergence(results)}
    else:
        effective = pipeline
        results, residuals, table = fn(config, pipeline, order, threads, opts)
    report = {"command": command, "config": config, "pipeline": effective, "order": order,
              "results": results, "residuals": residuals}
    if timing:
        report["wall_time"] = time.perf_counter() - t0
    if table is not None:
        report["_table"] = table
    return report


def _write_csv(path: str, table: List[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in table:
            writer.writerow([("%.17g" % x) if isinstance(x, float) else x for x in row])


def _error_payload(exc: VWError) -> dict:
    out = {"error": type(exc).__name__, "module": exc.module, "message": str(exc)}
    for attr in ("position", "path", "index"):
        if getattr(exc, attr, None) is not None:
            out[attr] = getattr(exc, attr)
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vwtoric", description="Weighted toric extremal-metric computations.")
    ap.add_argument("command", help="one of: " + ", ".join(COMMANDS) + " (or 'pbundle solve|futaki|report')")
    ap.add_argument("--config", required=True, help="job config JSON ('-' for stdin)")
    ap.add_argument("--out", help="write the report here instead of stdout")
    ap.add_argument("--csv", help="write tabular sweep output here")
    ap.add_argument("--pipeline", choices=["float", "exact", "both"])
    ap.add_argument("--order", type=int, default=DEFAULT_ORDER, help="quadrature points per axis")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--z0", help="evaluation point for 'pbundle futaki'")
    ap.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identical output)")
    return ap


def main(argv: List[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if len(argv) >= 2 and argv[0] == "pbundle" and argv[1] in ("solve", "futaki", "report"):
        argv = ["pbundle-" + argv[1]] + argv[2:]
    args = build_parser().parse_args(argv)
    try:
        if args.command not in COMMANDS:
            raise SchemaError(f"unknown command {args.command!r}", "command")
        try:
            text = sys.stdin.read() if args.config == "-" else open(args.config).read()
            config = json.loads(text)
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read config: {exc}", "") from None
        report = run(args.command, config, args.pipeline, args.order, args.threads, args.timing, z0=args.z0)
    except VWError as exc:
        sys.stderr.write(dumps(_error_payload(exc)) + "\n")
        return 3 if isinstance(exc, ComputationError) else 2
    table = report.pop("_table", None)
    text = dumps(report) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.csv and table is not None:
        _write_csv(args.csv, table)
    return 0


if __name__ == "__main__":
    sys.exit(main())
