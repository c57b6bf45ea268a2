"""Scenario objects: per-agent problems, warm starts, trials and benchmarks."""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..alspg import SolveReport, alspg_solve
from ..dynamics import arm_fk
from ..errors import ConfigError
from .audit import AuditResult, audit_collision, audit_obstacles, body_clearance
from .build import TASKS, agent_state, build_geometry, build_model, build_problem, build_solver_config
from .config import resolve_config
from .hybrid_astar import HybridAStarConfig, hybrid_astar_warm_start

log = logging.getLogger(__name__)


def make_rng(seed) -> np.random.Generator:
    """The one generator used for all sampling: PCG64 seeded through ``SeedSequence``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _wrap(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


@dataclass
class TrialResult:
    index: int
    x0: np.ndarray
    N: int
    report: SolveReport
    audit: AuditResult
    final_residual: float
    position_error: float | None
    angle_error: float | None
    success: bool
    warm_start_found: bool | None = None
    warnings: list = field(default_factory=list)
    agent: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.report.converged)

    def row(self) -> dict:
        r = self.report
        return {
            "trial": self.index,
            "converged": bool(r.converged),
            "success": bool(self.success),
            "outer_iters": int(r.outer_iters),
            "inner_iters_total": int(r.inner_iters_total),
            "final_v_norm": _num(r.final_v_norm),
            "final_residual": _num(self.final_residual),
            "objective": _num(r.objective),
            "min_clearance": _num(self.audit.min_clearance),
            "solve_time_s": float(r.solve_time),
            "status": r.status,
            "N": int(self.N),
            "x0": [float(v) for v in self.x0],
            "position_error": _num(self.position_error),
            "angle_error": _num(self.angle_error),
            "warm_start_found": self.warm_start_found,
            "warnings": list(self.warnings),
        }


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


class Scenario:
    """A fully parameterized scenario built from a resolved config."""

    def __init__(self, config: dict):
        self.config = copy.deepcopy(config)
        sc = self.config["scenario"]
        self.name = sc["name"]
        self.model = build_model(self.config["model"])
        self.geometry = {k: build_geometry(v, f"geometry.{k}") for k, v in self.config["geometry"].items()}
        self.solver_config = build_solver_config(self.config.get("solver", {}))
        self.N = sc.get("N", 40)
        self.agents = list(sc.get("agents", []))
        self.warm_start_method = sc.get("warm_start", "zero")
        self.goal = sc.get("goal")
        self.goal_task = sc.get("goal_task")
        self.start_region = sc.get("start_region")
        self.hybrid = HybridAStarConfig.from_dict(sc.get("hybrid_astar"))
        self.success = {"residual_tol": 1e-3, "pose_tol": 1e-2, "angle_tol": 1e-2, "clearance_tol": 1e-3,
                        "interp": 10, **sc.get("success", {})}
        if self.warm_start_method == "zero" and self.N == "auto":
            raise ConfigError("N 'auto' needs the hybrid_astar warm start", "scenario.N")

    @classmethod
    def from_name(cls, name: str, overrides=None) -> "Scenario":
        return cls(resolve_config(name, overrides=overrides))

    # -------------------------------------------------------------- agents

    def agents_for(self, trials: int | None = None, seed: int = 0) -> list:
        """Fixed agents (cycled to ``trials``), or ``trials`` seeded starts from the start region."""
        if self.start_region is None:
            if trials is None or not self.agents:
                return [copy.deepcopy(a) for a in self.agents]
            return [copy.deepcopy(self.agents[i % len(self.agents)]) for i in range(trials)]
        return [{"x0": x.tolist()} for x in self.sample_starts(trials or 1, seed)]

    def sample_starts(self, trials: int, seed: int, max_tries: int = 1000) -> np.ndarray:
        """Uniform starts in the region; each trial draws from its own spawned child seed."""
        reg = self.start_region
        children = np.random.SeedSequence(seed).spawn(trials)
        obstacles = self._body_obstacles()
        need = float(reg.get("min_clearance", 0.0)) if reg.get("reject_collisions", True) else -np.inf
        out = []
        for child in children:
            rng = np.random.Generator(np.random.PCG64(child))
            for _ in range(max_tries):
                pose = np.array([rng.uniform(*reg["x"]), rng.uniform(*reg["y"]), rng.uniform(*reg["theta"])])
                clear = min((float(body_clearance(b, o, pose[None])[0]) for b, o in obstacles), default=np.inf)
                if clear > need:
                    break
            else:
                raise RuntimeError("could not sample a collision-free start")
            x = np.zeros(self.model.n_x)
            x[:3] = pose
            if self.model.n_x > 3:
                x[3] = float(reg.get("v", 0.0))
            out.append(x)
        return np.asarray(out).reshape(trials, self.model.n_x)

    def _body_obstacles(self):
        tmpl = self.problem({"x0": np.zeros(self.model.n_x).tolist()}, N=1)
        return [(o.body, o.geometry) for o in audit_obstacles(tmpl) if o.kind == "body_polytope"]

    # ------------------------------------------------------------ problems

    def problem(self, agent: dict, N: int | None = None):
        N = int(N if N is not None else self.N)
        return build_problem(self.config, self.model, self.geometry, agent, N)

    def _goal_for(self, agent):
        return agent.get("goal", self.goal)

    def warm_start(self, agent: dict, method: str | None = None):
        """``(u_init, N, found, warnings)``; ``found`` is ``None`` for the zero warm start."""
        method = method or self.warm_start_method
        x0 = agent_state(self.model, agent)
        need_plan = method == "hybrid_astar" or self.N == "auto"
        ws = None
        if need_plan:
            body = self.geometry[self.config["scenario"]["body"]]
            obstacles = [o for _, o in self._body_obstacles()]
            verts = np.concatenate([o.vertices for o in obstacles])
            bounds = (verts.min(axis=0), verts.max(axis=0))
            tmpl = self.problem({"x0": x0.tolist()}, N=1)
            ws = hybrid_astar_warm_start(self.model, x0, self._goal_for(agent), body, obstacles, bounds,
                                         self.hybrid, tmpl.input_lower, tmpl.input_upper)
        N = len(ws.inputs) if self.N == "auto" else int(self.N)
        if method == "hybrid_astar":
            U = ws.inputs
            if len(U) != N:
                U = np.concatenate([U, np.zeros((max(0, N - len(U)), self.model.n_u))])[:N]
            return U, N, ws.found, list(ws.warnings)
        if method == "zero":
            return np.zeros((N, self.model.n_u)), N, None, [] if ws is None else list(ws.warnings)
        raise ConfigError(f"unknown warm start {method!r}", "scenario.warm_start")

    # -------------------------------------------------------------- trials

    def refresh(self):
        if self.model.name == "planar_arm3":
            links = self.model.links

            def f(S):
                S = S.copy()
                S[:, 6:9] = arm_fk(S[:, 0:3], links)
                return S

            return f
        return None

    def terminal_errors(self, agent, xN):
        goal = self._goal_for(agent)
        if goal is None or self.goal_task is None:
            return None, None
        table = TASKS[self.model.name]
        pos = table.get("position") or tuple(range(self.model.n_x))
        goal = np.asarray(goal, float)
        p_err = float(np.linalg.norm(xN[list(pos)] - goal[: len(pos)]))
        a_err = None
        head = table.get("heading")
        if self.goal_task in ("pose", "state") and head is not None and len(goal) > len(pos):
            a_err = abs(float(_wrap(xN[head[0]] - goal[len(pos)])))
        return p_err, a_err

    def run_trial(self, agent: dict, index: int = 0, interp: int | None = None, warm_start: str | None = None):
        U0, N, found, warnings = self.warm_start(agent, warm_start)
        prob = self.problem(agent, N)
        rep = alspg_solve(prob, U0, self.solver_config)
        interp = int(interp or self.success["interp"])
        if np.all(np.isfinite(rep.states)):
            audit = audit_collision(audit_obstacles(prob), rep.states, interp, self.refresh())
        else:
            audit = AuditResult(-np.inf)
        final_res = max((float(np.max(np.abs(r))) for r in rep.residuals if r.size), default=0.0)
        p_err, a_err = self.terminal_errors(agent, rep.states[-1])
        s = self.success
        # task success is judged on the plain residual, separately from the solver's own termination test
        ok = (np.all(np.isfinite(rep.states)) and final_res <= s["residual_tol"] and audit.min_clearance >= -s["clearance_tol"]
              and (p_err is None or p_err <= s["pose_tol"]) and (a_err is None or a_err <= s["angle_tol"]))
        log.info("%s trial %d: converged=%s |V|=%.2e outer=%d time=%.3fs clearance=%.4f", self.name, index,
                 rep.converged, rep.final_v_norm, rep.outer_iters, rep.solve_time, audit.min_clearance)
        return TrialResult(index, prob.x0, N, rep, audit, final_res, p_err, a_err, bool(ok), found, warnings, agent)

    def run(self, trials: int | None = None, seed: int = 0, interp: int | None = None, warm_start=None) -> list:
        return [self.run_trial(a, i, interp, warm_start) for i, a in enumerate(self.agents_for(trials, seed))]


# ---------------------------------------------------------------- benchmark

ROW_FIELDS = ("trial", "converged", "success", "solve_time_ms", "outer_iters", "final_v_norm", "min_clearance",
              "N", "warm_start_found")


def aggregate(rows) -> dict:
    """Statistics over per-trial rows in trial order; timing uses converged trials only (ms)."""
    rows = sorted(rows, key=lambda r: r["trial"])
    n = len(rows)
    t = np.array([r["solve_time_ms"] for r in rows if r["converged"]], dtype=float)
    stats = {"mean": None, "std": None, "min": None, "max": None, "median": None}
    if len(t):
        stats = {"mean": float(np.mean(t)), "std": float(np.std(t)), "min": float(np.min(t)),
                 "max": float(np.max(t)), "median": float(np.median(t))}
    return {
        "trials": n,
        "converged": int(sum(r["converged"] for r in rows)),
        "success_rate": float(sum(r["success"] for r in rows) / n) if n else None,
        "converged_rate": float(sum(r["converged"] for r in rows) / n) if n else None,
        "mean_outer_iters": float(np.mean([r["outer_iters"] for r in rows])) if n else None,
        "solve_time_ms": stats,
    }


@dataclass
class BenchmarkResult:
    scenario: str
    seed: int
    rows: list
    trial_results: list = field(default_factory=list, repr=False)

    @property
    def aggregate(self) -> dict:
        return aggregate(self.rows)

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "seed": self.seed, "aggregate": self.aggregate, "rows": self.rows}


def _bench_row(tr: TrialResult) -> dict:
    r = tr.row()
    return {"trial": r["trial"], "converged": r["converged"], "success": r["success"],
            "solve_time_ms": 1e3 * r["solve_time_s"], "outer_iters": r["outer_iters"],
            "final_v_norm": r["final_v_norm"], "min_clearance": r["min_clearance"], "N": r["N"],
            "warm_start_found": r["warm_start_found"]}


def run_benchmark(scenario: Scenario, trials: int, seed: int = 0, interp: int | None = None,
                  warm_start: str | None = None) -> BenchmarkResult:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    results = scenario.run(trials, seed, interp, warm_start)
    return BenchmarkResult(scenario.name, seed, [_bench_row(r) for r in results], results)
