"""Command-line front end: ``solve``, ``bench``, ``project`` and ``list-scenarios``.

Exit codes: 0 success, 1 a solve did not converge (outputs are still written),
2 invalid input (config, flags or projector spec).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError
from .geometry import ConvexPolytope, contains, minkowski_diff, polytope_clearance, project_hyperplane
from .projectors import (
    BarrierSpec,
    BoxLimit,
    ReachContact,
    ReachInside,
    ReachMinkowski,
    ReachPoint,
    ReachSdf,
    ReachSegment,
    SafeMinkowski,
    SafePolytope,
    SafeSdf,
    wrap_barrier,
)
from .scenarios import CATALOG, Scenario, list_scenarios, load_config_file, resolve_config, run_benchmark
from .scenarios.build import build_geometry
from .scenarios.config import load_schema
from .scenarios.scenario import ROW_FIELDS

log = logging.getLogger("geopro")

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    pass


def _setup_logging():
    level = os.environ.get("GEOPRO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


# ------------------------------------------------------------------ config


def resolve_run(args) -> tuple[dict, dict]:
    """Resolved scenario config and run settings (flags beat the file's ``run`` section)."""
    data, text = ({}, None)
    if args.config:
        data, text = load_config_file(args.config)
    cfg = resolve_config(args.scenario, data, args.override, text)
    run = dict(cfg.pop("run", {}) or {})
    run.pop("overrides", None)
    for key in ("seed", "trials", "interp", "out"):
        v = getattr(args, key, None)
        if v is not None:
            run[key] = v
    run.setdefault("seed", 0)
    if run.get("trials") is not None and int(run["trials"]) < 1:
        raise ConfigError("trials must be >= 1", "run.trials")
    if run.get("interp") is not None and int(run["interp"]) < 1:
        raise ConfigError("interp must be >= 1", "run.interp")
    return cfg, run


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def trajectory_header(model, names) -> list:
    return ["k", "t", *model.state_labels, *model.input_labels, *[f"res_{n}" for n in names]]


def trajectory_rows(model, report, spec) -> list:
    """One row per knot ``k = 0..N``; inputs are blank at ``k = N``; residuals are per-step max norms."""
    X, U = report.states, report.inputs
    N = len(U)
    res = np.zeros((N + 1, len(spec.constraints)))
    for i, (b, V) in enumerate(zip(spec.constraints, report.residuals)):
        norms = np.max(np.abs(V), axis=1) if V.size else np.zeros(N)
        if b.on == "state":
            res[1:, i] = norms
        else:
            res[:N, i] = norms
    rows = []
    for k in range(N + 1):
        u = [repr(float(v)) for v in U[k]] if k < N else [""] * model.n_u
        rows.append([k, repr(k * model.dt), *[repr(float(v)) for v in X[k]], *u, *[repr(float(r)) for r in res[k]]])
    return rows


def write_trajectory(path: Path, scenario: Scenario, trial) -> None:
    spec = scenario.problem(trial.agent, trial.N)
    names = [b.name for b in spec.constraints]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_header(scenario.model, names))
        w.writerows(trajectory_rows(scenario.model, trial.report, spec))


def summary_dict(scenario: Scenario, seed: int, trials) -> dict:
    rows = [t.row() for t in trials]
    for r, t in zip(rows, trials):
        r["audit"] = t.audit.to_dict()
    return {"scenario": scenario.name, "seed": int(seed), "all_converged": all(t.converged for t in trials),
            "all_success": all(t.success for t in trials), "trials": rows}


def check_summary(summary: dict) -> None:
    jsonschema.validate(summary, load_schema("summary.schema.json"))


# ---------------------------------------------------------------- commands


def cmd_solve(args) -> int:
    cfg, run = resolve_run(args)
    scenario = Scenario(cfg)
    out = Path(run.get("out") or "geopro_out")
    out.mkdir(parents=True, exist_ok=True)
    trials = scenario.run(run.get("trials"), run["seed"], run.get("interp"))
    for t in trials:
        write_trajectory(out / f"trial_{t.index:03d}.csv", scenario, t)
    summary = summary_dict(scenario, run["seed"], trials)
    check_summary(summary)
    _write_json(out / "summary.json", summary)
    _write_json(out / "resolved_config.json", {**cfg, "run": run})
    for t in trials:
        print(f"trial {t.index:03d}: converged={t.converged} success={t.success} |V|={t.report.final_v_norm:.2e} "
              f"outer={t.report.outer_iters} clearance={t.audit.min_clearance:.4f} time={t.report.solve_time:.3f}s")
    return EXIT_OK if summary["all_converged"] else EXIT_NOT_CONVERGED


def bench_table(result) -> str:
    agg = result.aggregate
    st = agg["solve_time_ms"]

    def fmt(v):
        return "-" if v is None else f"{v:.0f} ms"

    head = f"{'scenario':<20} {'mean':>10} {'std':>10} {'min':>10} {'max':>10} {'success':>8} {'outer':>6}"
    line = (f"{result.scenario:<20} {fmt(st['mean']):>10} {fmt(st['std']):>10} {fmt(st['min']):>10} "
            f"{fmt(st['max']):>10} {agg['success_rate']:>8.2f} {agg['mean_outer_iters']:>6.1f}")
    return head + "\n" + line


def cmd_bench(args) -> int:
    if args.trials is not None and args.trials < 1:
        raise UsageError("--trials must be >= 1")
    cfg, run = resolve_run(args)
    scenario = Scenario(cfg)
    trials = int(run.get("trials") or 100)
    out = Path(run.get("out") or "geopro_bench")
    out.mkdir(parents=True, exist_ok=True)
    result = run_benchmark(scenario, trials, run["seed"], run.get("interp"))
    with (out / "bench_trials.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(ROW_FIELDS), extrasaction="ignore")
        w.writeheader()
        w.writerows(result.rows)
    _write_json(out / "bench.json", result.to_dict())
    _write_json(out / "resolved_config.json", {**cfg, "run": {**run, "trials": trials}})
    print(bench_table(result))
    agg = result.aggregate
    return EXIT_OK if agg["converged"] == agg["trials"] else EXIT_NOT_CONVERGED


def _geom(spec, key):
    if key not in spec:
        raise ConfigError(f"projector spec needs '{key}'", key)
    return build_geometry(spec[key], key)


def projector_from_spec(spec: dict):
    """Projector from an inline spec; geometry entries use the scenario geometry forms."""
    kind = spec.get("kind")
    if kind == "safe_polytope":
        p = SafePolytope(_geom(spec, "polytope"), float(spec.get("buffer", 0.0)))
    elif kind == "safe_sdf":
        p = SafeSdf(_geom(spec, "sdf"), float(spec.get("buffer", 0.0)))
    elif kind == "safe_minkowski":
        p = SafeMinkowski(_geom(spec, "body"), _geom(spec, "polytope"), float(spec.get("buffer", 0.0)))
    elif kind == "reach_point":
        p = ReachPoint(np.asarray(spec["target"], float))
    elif kind == "reach_contact":
        p = ReachContact(_geom(spec, "polytope"))
    elif kind == "reach_inside":
        p = ReachInside(_geom(spec, "polytope"))
    elif kind == "reach_minkowski":
        p = ReachMinkowski(_geom(spec, "body"), _geom(spec, "polytope"))
    elif kind == "reach_segment":
        p = ReachSegment(_geom(spec, "segment"))
    elif kind == "reach_sdf":
        p = ReachSdf(_geom(spec, "sdf"), float(spec.get("level", 0.0)))
    elif kind == "box_limit":
        p = BoxLimit(spec["lower"], spec["upper"])
    else:
        raise ConfigError(f"unknown projector kind {kind!r}", "kind")
    if spec.get("barrier"):
        b = spec["barrier"]
        p = wrap_barrier(p, BarrierSpec(b.get("gamma", "constant"), float(b.get("scale", 0.0)),
                                        float(b.get("exponent", 1.0))))
    return p


def _parse_vector(text):
    if text is None:
        return None
    text = text.strip()
    val = json.loads(text) if text.startswith("[") else [float(v) for v in text.split(",")]
    return np.atleast_1d(np.asarray(val, float))


def _load_spec(text: str) -> dict:
    p = Path(text)
    raw = p.read_text() if not text.lstrip().startswith("{") and p.exists() else text
    try:
        spec = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", "spec") from exc
    if not isinstance(spec, dict):
        raise ConfigError("projector spec must be a JSON object", "spec")
    return spec


def project_report(spec: dict, point=None, context=None) -> dict:
    kind = spec.get("kind")
    if kind == "hyperplane":
        a, b = np.asarray(spec["a"], float), float(spec["b"])
        x = np.asarray(point, float)
        q = project_hyperplane(a, b, x)
        return {"kind": kind, "condition": bool(abs(a @ x - b) > 0), "projected": q.tolist(),
                "residual": (x - q).tolist()}
    if kind == "minkowski":
        ga, gb = _geom(spec, "a"), _geom(spec, "b")
        if not (isinstance(ga, ConvexPolytope) and isinstance(gb, ConvexPolytope)):
            raise ConfigError("minkowski needs two polytopes", "a")
        md = minkowski_diff(ga, gb).result
        return {"kind": kind, "origin_in_difference": bool(contains(md, np.zeros(2))),
                "clearance": polytope_clearance(ga, gb), "difference_vertices": md.vertices.tolist()}
    if point is None:
        raise UsageError("--point is required for projector specs")
    p = projector_from_spec(spec)
    v = np.asarray(point, float)
    if len(v) != p.output_dim:
        raise ConfigError(f"point must have {p.output_dim} entries", "point")
    ctx = None
    if p.context_dim:
        if context is None:
            raise UsageError(f"{p.kind} needs --context with {p.context_dim} value(s)")
        ctx = np.asarray(context, float)
    return {"kind": p.kind, "condition": bool(p.condition(v, ctx)), "projected": np.asarray(p.project(v, ctx)).tolist(),
            "residual": np.asarray(p.residual(v, ctx)).tolist()}


def cmd_project(args) -> int:
    try:
        rep = project_report(_load_spec(args.spec), _parse_vector(args.point), _parse_vector(args.context))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"invalid projector spec: {exc}", "spec") from exc
    print(json.dumps(rep))
    return EXIT_OK


def cmd_list(args) -> int:
    for name in list_scenarios():
        doc = (CATALOG[name].__doc__ or "").strip().splitlines()
        print(f"{name:<22} {doc[0] if doc else ''}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geopro", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def run_flags(p, trials_default=None):
        p.add_argument("--config", help="scenario config JSON (merged onto catalog defaults)")
        p.add_argument("--scenario", help="catalog scenario name")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="seed for sampled starts (default 0)")
        p.add_argument("--trials", type=int, default=trials_default, help="number of trials")
        p.add_argument("--interp", type=int, help="interpolation factor of the collision audit")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-path config override (repeatable)")

    s = sub.add_parser("solve", help="solve every trial of a scenario and write trajectories")
    run_flags(s)
    s.set_defaults(func=cmd_solve)
    b = sub.add_parser("bench", help="seeded benchmark with timing statistics")
    run_flags(b)
    b.set_defaults(func=cmd_bench)
    p = sub.add_parser("project", help="evaluate one projector on one point")
    p.add_argument("--spec", required=True, help="projector spec as inline JSON or a file path")
    p.add_argument("--point", help="point as 'x,y' or a JSON list")
    p.add_argument("--context", help="context (heading or velocity) as 'a,b' or a JSON list")
    p.set_defaults(func=cmd_project)
    ls = sub.add_parser("list-scenarios", help="print the scenario catalog")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command in ("solve", "bench") and not (args.config or args.scenario):
        print("error: give --config or --scenario", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
