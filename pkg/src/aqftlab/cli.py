"""Batch front end: `aqftlab run config.json` and `aqftlab list-suites`.

Exit codes: 0 all suites passed, 1 a suite failed, 2 invalid config, 3 I/O failure.
Set AQFTLAB_NUM_THREADS to cap BLAS threads (read before numpy is loaded).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_IO = 0, 1, 2, 3

SUITE_NAMES = (
    "geometry", "green", "hadamard", "kms", "weyl", "star-assoc", "wick", "peierls",
    "causality-net", "timeslice", "tord-axioms", "bogoliubov", "rg-group", "microlocal-calibration",
)
PROPAGATOR_KINDS = ("retarded", "advanced", "pauli_jordan", "dirac", "wightman", "hadamard_H", "feynman")
PRODUCTS = ("star", "star_H", "tord")

TOP_KEYS = {"grid", "state", "tasks", "output_dir", "seed", "truncation", "suite_options"}
GRID_KEYS = {"Nt", "Nx", "T", "L", "mass", "lapse", "discretization", "zero_threshold"}


class SchemaError(ValueError):
    pass


def _limit_threads() -> None:
    n = os.environ.get("AQFTLAB_NUM_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def _require(cond: bool, field: str, msg: str) -> None:
    if not cond:
        raise SchemaError(f"{field}: {msg}")


def _number(doc, key, field, positive=False, integer=False):
    v = doc[key]
    ok = isinstance(v, (int, float)) and not isinstance(v, bool)
    if integer:
        ok = ok and float(v).is_integer()
    _require(ok, field, "expected a number" if not integer else "expected an integer")
    if positive:
        _require(v > 0, field, "must be positive")
    return v


def _unknown(doc: dict, allowed: set, where: str) -> None:
    extra = sorted(set(doc) - allowed)
    _require(not extra, f"{where}.{extra[0]}" if extra else where, "unknown field")


def _observable(doc, field):
    _require(isinstance(doc, dict), field, "expected an object")
    _unknown(doc, {"degree", "bump"}, field)
    _require("bump" in doc, f"{field}.bump", "missing")
    deg = doc.get("degree", 1)
    _require(isinstance(deg, int) and 1 <= deg <= 3, f"{field}.degree", "expected 1, 2 or 3")
    b = doc["bump"]
    _require(isinstance(b, list) and len(b) == 4 and all(isinstance(x, (int, float)) for x in b),
             f"{field}.bump", "expected [t0, x0, width_t, width_x]")
    _require(b[2] > 0 and b[3] > 0, f"{field}.bump", "widths must be positive")


def validate(doc) -> dict:
    """Check the config structure; raise SchemaError naming the offending field."""
    _require(isinstance(doc, dict), "config", "expected a JSON object")
    _unknown(doc, TOP_KEYS, "config")
    _require("grid" in doc, "grid", "missing")
    grid = doc["grid"]
    _require(isinstance(grid, dict), "grid", "expected an object")
    _unknown(grid, GRID_KEYS, "grid")
    for key in ("Nt", "Nx"):
        _require(key in grid, f"grid.{key}", "missing")
        _number(grid, key, f"grid.{key}", positive=True, integer=True)
    for key in ("T", "L"):
        _require(key in grid, f"grid.{key}", "missing")
        _number(grid, key, f"grid.{key}", positive=True)
    if "mass" in grid:
        _number(grid, "mass", "grid.mass")
    if "lapse" in grid:
        lapse = grid["lapse"]
        _require(isinstance(lapse, dict), "grid.lapse", "expected an object")
        _unknown(lapse, {"kind", "params"}, "grid.lapse")
    state = doc.get("state", {"kind": "vacuum"})
    _require(isinstance(state, dict), "state", "expected an object")
    _unknown(state, {"kind", "beta"}, "state")
    kind = state.get("kind", "vacuum")
    _require(kind in ("vacuum", "kms"), "state.kind", "expected 'vacuum' or 'kms'")
    if kind == "kms":
        _require("beta" in state, "state.beta", "missing for a kms state")
        _number(state, "beta", "state.beta", positive=True)
    if "seed" in doc:
        _number(doc, "seed", "seed", integer=True)
        _require(doc["seed"] >= 0, "seed", "must be non-negative")
    trunc = doc.get("truncation", {})
    _require(isinstance(trunc, dict), "truncation", "expected an object")
    _unknown(trunc, {"P_max", "Q_max"}, "truncation")
    for key in trunc:
        _number(trunc, key, f"truncation.{key}", integer=True)
        _require(trunc[key] >= 1, f"truncation.{key}", "must be at least 1")
    if "output_dir" in doc:
        _require(isinstance(doc["output_dir"], str), "output_dir", "expected a string")
    opts = doc.get("suite_options", {})
    _require(isinstance(opts, dict), "suite_options", "expected an object")
    for name, o in opts.items():
        _require(name in SUITE_NAMES, f"suite_options.{name}", "unknown suite")
        _require(isinstance(o, dict), f"suite_options.{name}", "expected an object")
    tasks = doc.get("tasks", [])
    _require(isinstance(tasks, list), "tasks", "expected a list")
    for i, t in enumerate(tasks):
        where = f"tasks[{i}]"
        _require(isinstance(t, dict), where, "expected an object")
        ttype = t.get("type")
        if ttype == "suite":
            _unknown(t, {"type", "name"}, where)
            _require(t.get("name") in SUITE_NAMES, f"{where}.name", "unknown suite")
        elif ttype == "propagator":
            _unknown(t, {"type", "kind", "format"}, where)
            _require(t.get("kind") in PROPAGATOR_KINDS, f"{where}.kind", f"expected one of {PROPAGATOR_KINDS}")
            _require(t.get("format", "json") in ("json", "csv"), f"{where}.format", "expected 'json' or 'csv'")
        elif ttype == "product":
            _unknown(t, {"type", "product", "left", "right"}, where)
            _require(t.get("product") in PRODUCTS, f"{where}.product", f"expected one of {PRODUCTS}")
            for side in ("left", "right"):
                _require(side in t, f"{where}.{side}", "missing")
                _observable(t[side], f"{where}.{side}")
        else:
            raise SchemaError(f"{where}.type: expected 'suite', 'propagator' or 'product'")
    return doc


# -- task execution --------------------------------------------------------------------


def _build_context(doc, seed):
    from .geometry import GridConfig
    from .suites import SuiteContext

    state = doc.get("state", {"kind": "vacuum"})
    trunc = doc.get("truncation", {})
    return SuiteContext(
        GridConfig.from_dict(doc["grid"]),
        seed=seed,
        state=state.get("kind", "vacuum"),
        beta=state.get("beta"),
        P_max=int(trunc.get("P_max", 3)),
        Q_max=int(trunc.get("Q_max", 4)),
        options=doc.get("suite_options", {}),
    )


def _propagator(ctx, kind):
    from .propagators import kernel, two_point

    if kind in ("retarded", "advanced", "pauli_jordan", "dirac"):
        return kernel(ctx.op, kind)
    if kind == "wightman":
        return ctx.W
    return two_point(ctx.op, kind, beta=ctx.beta, state=ctx.state)


def _make_observable(ctx, spec):
    from .functionals import make_linear, make_monomial
    from .geometry import bump

    f = bump(ctx.grid, *spec["bump"])
    deg = spec.get("degree", 1)
    return make_linear(ctx.grid, f) if deg == 1 else make_monomial(ctx.grid, deg, f)


def _run_product(ctx, task):
    from .interaction import tord
    from .quantization import star, star_H

    A, B = _make_observable(ctx, task["left"]), _make_observable(ctx, task["right"])
    if task["product"] == "star":
        return star(A, B, ctx.Delta)
    if task["product"] == "star_H":
        return star_H(A, B, ctx.W)
    return tord(A, B, ctx.dirac)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    import numpy as np

    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")


def run(config_path, out=None, seed=None, suites=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        text = Path(config_path).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    from .geometry import GridError, build_grid

    try:
        doc = validate(json.loads(text))
        if suites:
            bad = [s for s in suites if s not in SUITE_NAMES]
            if bad:
                raise SchemaError(f"--suite: unknown suite {bad[0]!r}")

        seed = int(doc.get("seed", 0)) if seed is None else seed
        ctx = _build_context(doc, seed)
        build_grid(ctx.grid_config)
    except (json.JSONDecodeError, SchemaError, GridError, ValueError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA

    tasks = list(doc.get("tasks", []))
    if suites:
        tasks = [t for t in tasks if t["type"] != "suite"] + [{"type": "suite", "name": s} for s in suites]
    out_dir = Path(out or doc.get("output_dir", "aqftlab_out"))

    from .propagators import InfraredObstruction
    from .suites import run_suite

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        report = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "config": doc,
            "seed": seed,
            "suites": [],
            "artifacts": [],
        }
        for i, task in enumerate(tasks):
            if task["type"] == "suite":
                rep = run_suite(task["name"], ctx)
                report["suites"].append(rep.to_json())
                mark = "PASS" if rep.passed else "FAIL"
                print(f"{mark} {task['name']}" + ("" if rep.passed else f" ({', '.join(rep.failures())})"),
                      file=stdout)
            elif task["type"] == "propagator":
                K = _propagator(ctx, task["kind"])
                fmt = task.get("format", "json")
                path = out_dir / f"task{i:02d}_{task['kind']}.{fmt}"
                if fmt == "json":
                    path.write_text(_dump(K.to_json()))
                else:
                    K.to_csv(path)
                report["artifacts"].append(path.name)
            else:
                S = _run_product(ctx, task)
                path = out_dir / f"task{i:02d}_{task['product']}.json"
                path.write_text(_dump(S.to_json()))
                report["artifacts"].append(path.name)
        report["passed"] = all(s["passed"] for s in report["suites"])
        (out_dir / "report.json").write_text(_dump(report))
    except InfraredObstruction as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if report["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aqftlab", description="Run field-theory computations and check suites.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute the tasks of a JSON config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides output_dir)")
    p_run.add_argument("--seed", type=int, help="seed for randomized suites (overrides the config)")
    p_run.add_argument("--suite", nargs="+", metavar="NAME", help="run these suites instead of the configured ones")
    sub.add_parser("list-suites", help="print the available suite names")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-suites":
        print("\n".join(SUITE_NAMES))
        return EXIT_OK
    _limit_threads()
    return run(args.config, args.out, args.seed, args.suite)


if __name__ == "__main__":
    sys.exit(main())
