"""Turn scenario configs into geometry, bindings and solver problems."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..alspg import AlspgConfig, CostSpec, ProblemSpec
from ..bindings import ConstraintBinding, FunctionTask, Selector, compose
from ..dynamics import SystemModel, make_model
from ..errors import ConfigError
from ..geometry import (
    CircleSdf,
    ConvexPolytope,
    Segment,
    SplineSdf,
    ellipse_field,
    heart_field,
)
from ..projectors import (
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
from ..spg import SpgConfig

# named task selectors per model
TASKS = {
    "single_integrator": {"position": None},
    "double_integrator": {"position": (0, 1), "velocity": (2, 3)},
    "unicycle": {"position": (0, 1), "heading": (2,), "pose": (0, 1, 2)},
    "kinematic_bicycle": {"position": (0, 1), "heading": (2,), "pose": (0, 1, 2), "speed": (3,)},
    "planar_arm3": {"joints": (0, 1, 2), "joint_velocity": (3, 4, 5), "position": (6, 7), "heading": (8,),
                    "pose": (6, 7, 8)},
}


# ------------------------------------------------------------------ geometry


def _polytope_from_spec(spec: dict, path: str) -> ConvexPolytope:
    scale = float(spec.get("scale", 1.0))
    if "vertices" in spec:
        poly = ConvexPolytope.from_vertices(np.asarray(spec["vertices"], float) * scale)
        if "A" in spec or "b" in spec:
            other = ConvexPolytope.from_halfspaces(spec["A"], np.asarray(spec["b"], float) * scale)
            _cross_check(poly, other, path)
        return poly
    if "A" in spec:
        if "b" not in spec:
            raise ConfigError("half-space form needs both A and b", path)
        return ConvexPolytope.from_halfspaces(spec["A"], np.asarray(spec["b"], float) * scale)
    if "hull" in spec:
        return ConvexPolytope.from_points(np.asarray(spec["hull"], float) * scale)
    if "box" in spec:
        return ConvexPolytope.box(spec["box"]["lower"], spec["box"]["upper"])
    if "regular" in spec:
        r = spec["regular"]
        return ConvexPolytope.regular(r["center"], r["inradius"], int(r["sides"]), float(r.get("rotation", 0.0)))
    raise ConfigError("unknown polytope form", path)


def _cross_check(a: ConvexPolytope, b: ConvexPolytope, path):
    va, vb = a.vertices, b.vertices
    if len(va) != len(vb):
        raise ConfigError("vertices and half-spaces describe different polygons", path)
    d = np.linalg.norm(va[:, None, :] - vb[None, :, :], axis=2)
    if np.max(np.min(d, axis=1)) > 1e-8:
        raise ConfigError("vertices and half-spaces describe different polygons", path)


@lru_cache(maxsize=64)
def _spline_cached(key: str) -> SplineSdf:
    s = json.loads(key)
    shape = s["shape"]
    margin = float(s.get("margin", 0.15))
    spans = tuple(s.get("spans", (16, 16)))
    if shape == "ellipse":
        c = np.asarray(s["center"], float)
        a, b = s["semi_axes"]
        field_fn = ellipse_field(c, (a, b), float(s.get("angle", 0.0)))
        ext = max(a, b)
    elif shape == "heart":
        c = np.asarray(s["center"], float)
        field_fn = heart_field(c, float(s["size"]))
        ext = float(s["size"]) * 0.6
    elif shape == "circle":
        c = np.asarray(s["center"], float)
        circle = CircleSdf(c, float(s["radius"]))
        field_fn = circle.value
        ext = float(s["radius"])
    else:
        raise ConfigError(f"unknown spline shape {shape!r}")
    half = ext + margin
    domain = (c[0] - half, c[0] + half, c[1] - half, c[1] + half)
    samples = (5 * spans[0] + 1, 5 * spans[1] + 1)
    return SplineSdf.fit(field_fn, domain, spans=spans, samples=samples)


def build_geometry(spec: dict, path: str = "geometry"):
    if not isinstance(spec, dict):
        raise ConfigError("geometry entries must be objects", path)
    if "circle" in spec:
        c = spec["circle"]
        return CircleSdf(np.asarray(c["center"], float), float(c["radius"]))
    if "spline" in spec:
        return _spline_cached(json.dumps(spec["spline"], sort_keys=True))
    if "segment" in spec:
        return Segment(np.asarray(spec["segment"]["a"], float), np.asarray(spec["segment"]["b"], float))
    try:
        return _polytope_from_spec(spec, path)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), path) from exc


# ----------------------------------------------------------------- behaviors


def resolve_refs(value, agent: dict):
    """Replace ``"$key"`` strings by the agent's field; missing keys give ``None``."""
    if isinstance(value, str) and value.startswith("$"):
        return agent.get(value[1:])
    if isinstance(value, list):
        return [resolve_refs(v, agent) for v in value]
    if isinstance(value, dict):
        return {k: resolve_refs(v, agent) for k, v in value.items()}
    return value


def _steps(spec, N, path):
    if spec is None or spec == "all":
        return None
    if spec == "final":
        return (N,)
    if spec == "half":
        return (max(1, N // 2),)
    if isinstance(spec, list):
        return tuple(int(k) for k in spec)
    if isinstance(spec, dict):
        lo = int(spec.get("from", 1))
        hi = int(spec.get("to", N) if spec.get("to") is not None else N)
        return tuple(range(lo, min(hi, N) + 1))
    raise ConfigError(f"unknown step specification {spec!r}", path)


def bearing_task(target, position=(6, 7), heading=8):
    """Heading minus the bearing from the position to ``target``, wrapped to (-pi, pi]."""
    tx, ty = float(target[0]), float(target[1])
    ix, iy = position

    def fn(X):
        dx, dy = tx - X[:, ix], ty - X[:, iy]
        e = X[:, heading] - np.arctan2(dy, dx)
        return (np.mod(e + math.pi, 2 * math.pi) - math.pi)[:, None]

    def jac(X):
        dx, dy = tx - X[:, ix], ty - X[:, iy]
        r2 = dx * dx + dy * dy
        J = np.zeros((len(X), 1, X.shape[1]))
        # d atan2(dy, dx) / d(px, py) = (dy, -dx) / r^2
        J[:, 0, ix] = -dy / r2
        J[:, 0, iy] = dx / r2
        J[:, 0, heading] = 1.0
        return J

    return FunctionTask(fn, 1, jac)


def _task(model: SystemModel, name, bspec, path, on):
    if on == "input":
        if name in (None, "input"):
            return Selector(tuple(range(model.n_u)))
        if "indices" in bspec:
            return Selector(tuple(bspec["indices"]))
        raise ConfigError("input bindings use task 'input' or explicit indices", path)
    if "indices" in bspec:
        return Selector(tuple(bspec["indices"]))
    if name == "state":
        return Selector(tuple(range(model.n_x)))
    if name == "bearing":
        pos, head = TASKS[model.name].get("position"), TASKS[model.name].get("heading")
        if pos is None or head is None:
            raise ConfigError("bearing task needs a model with position and heading", path)
        return bearing_task(bspec["task_target"], pos, head[0])
    table = TASKS.get(model.name, {})
    if name not in table or table[name] is None:
        if model.name == "single_integrator" and name == "position":
            return Selector(tuple(range(model.n_x)))
        raise ConfigError(f"unknown task {name!r} for model {model.name}", path)
    return Selector(table[name])


@dataclass
class BuiltBehavior:
    binding: ConstraintBinding | None
    input_box: tuple | None = None
    spec: dict = field(default_factory=dict)


def build_behavior(bspec: dict, model: SystemModel, geometry: dict, N: int, agent: dict, path: str):
    """One behavior entry -> binding (or an input box for the inner projection); ``None`` if not applicable."""
    b = resolve_refs(copy.deepcopy(bspec), agent)
    kind = b.get("kind")
    on = b.get("on", "state")
    name = b.get("name", kind)

    def geo(key="geometry"):
        ref = b.get(key)
        if ref is None:
            return None
        if ref not in geometry:
            raise ConfigError(f"unknown geometry {ref!r}", f"{path}.{key}")
        return geometry[ref]

    if kind == "box_limit" and on == "input" and b.get("input_set", False):
        return BuiltBehavior(None, (np.asarray(b["lower"], float), np.asarray(b["upper"], float)), b)

    if kind in ("reach_point",) and b.get("target") is None:
        return None
    if kind not in ("reach_point", "box_limit") and b.get("geometry") is not None and geo() is None:
        return None

    buffer = float(b.get("buffer", 0.0))
    if kind == "safe_polytope":
        proj = SafePolytope(geo(), buffer)
    elif kind == "safe_sdf":
        proj = SafeSdf(geo(), buffer)
    elif kind == "safe_minkowski":
        proj = SafeMinkowski(geo("body"), geo(), buffer)
    elif kind == "reach_point":
        proj = ReachPoint(np.asarray(b["target"], float))
    elif kind == "reach_contact":
        proj = ReachContact(geo())
    elif kind == "reach_inside":
        proj = ReachInside(geo())
    elif kind == "reach_minkowski":
        proj = ReachMinkowski(geo("body"), geo())
    elif kind == "reach_segment":
        proj = ReachSegment(geo())
    elif kind == "reach_sdf":
        proj = ReachSdf(geo(), float(b.get("level", 0.0)))
    elif kind == "box_limit":
        proj = BoxLimit(b["lower"], b["upper"])
    else:
        raise ConfigError(f"unknown behavior kind {kind!r}", f"{path}.kind")

    ctx_name = b.get("context")
    barrier = b.get("barrier")
    if barrier:
        try:
            proj = wrap_barrier(proj, BarrierSpec(barrier.get("gamma", "constant"), float(barrier.get("scale", 0.0)),
                                                  float(barrier.get("exponent", 1.0))))
        except ValueError as exc:
            raise ConfigError(str(exc), f"{path}.barrier") from exc
        ctx_name = ctx_name or "velocity"
    task = _task(model, b.get("task"), b, f"{path}.task", on)
    context = None
    if proj.context_dim:
        if ctx_name is None:
            raise ConfigError(f"{kind} needs a context task", f"{path}.context")
        context = _task(model, ctx_name, {}, f"{path}.context", "state")
    try:
        binding = ConstraintBinding(proj, task, _steps(b.get("steps"), N, f"{path}.steps"), on, context, name)
        binding.active_steps(N)
    except ValueError as exc:
        raise ConfigError(str(exc), path) from exc
    return BuiltBehavior(binding, None, b)


def build_model(spec: dict) -> SystemModel:
    params = {k: v for k, v in spec.items() if k != "name"}
    try:
        return make_model(spec["name"], **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "model") from exc


def build_solver_config(spec: dict) -> AlspgConfig:
    s = dict(spec)
    inner = s.pop("inner", {})
    try:
        return AlspgConfig(inner=SpgConfig(**inner), **s)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "solver") from exc


def build_cost(spec: dict) -> CostSpec:
    try:
        return CostSpec(**spec)
    except TypeError as exc:
        raise ConfigError(str(exc), "cost") from exc


def build_problem(cfg: dict, model: SystemModel, geometry: dict, agent: dict, N: int):
    """Bindings, input box and cost for one agent -> ``ProblemSpec``."""
    bindings, lower, upper = [], None, None
    for i, bspec in enumerate(cfg["behaviors"]):
        built = build_behavior(bspec, model, geometry, N, agent, f"behaviors.{i}")
        if built is None:
            continue
        if built.input_box is not None:
            lo, hi = built.input_box
            lower = lo if lower is None else np.maximum(lower, lo)
            upper = hi if upper is None else np.minimum(upper, hi)
        else:
            bindings.append(built.binding)
    cost_spec = {**cfg["cost"], **agent.get("cost", {})}
    x0 = agent_state(model, agent)
    return ProblemSpec(model, x0, N, build_cost(cost_spec), compose(bindings) if bindings else [], lower, upper)


def agent_state(model: SystemModel, agent: dict) -> np.ndarray:
    if "x0" in agent:
        return np.asarray(agent["x0"], float)
    if "q0" in agent and hasattr(model, "with_pose"):
        return model.with_pose(agent["q0"], agent.get("dq0"))
    raise ConfigError("agent needs an initial state x0 (or q0 for the arm)", "scenario.agents")
