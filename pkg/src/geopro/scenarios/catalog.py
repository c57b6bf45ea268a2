"""Default configurations of every catalog scenario.

Each entry is a plain JSON-compatible dict with the sections
``scenario, model, geometry, behaviors, cost, solver, output``. Geometry and
behavior entries may refer to per-agent fields with a ``"$key"`` string.
"""

from __future__ import annotations

import math

import numpy as np

PI = math.pi


def _solver(**kw):
    base = {"rho0": 0.1, "beta": 5.0, "max_outer": 20, "eps_tol": 1e-4, "rho_max": 1e8,
            "penalty_decrease_ratio": 1.0, "early_inner_tol": 1e-6, "early_outer": 2,
            "inner": {"max_iters": 200, "step_tolerance": 1e-8}}
    inner = kw.pop("inner", {})
    base.update(kw)
    base["inner"] = {**base["inner"], **inner}
    return base


def _output():
    return {"interp": 10, "formats": ["csv", "json"]}


def _success(**kw):
    base = {"residual_tol": 1e-3, "pose_tol": 1e-2, "angle_tol": 1e-2, "clearance_tol": 1e-3, "interp": 10}
    base.update(kw)
    return base


# ---------------------------------------------------------------- point mass


def swarm_safety():
    """Twenty point masses leaving the origin radially past three buffered squares."""
    n = 20
    ang = 2 * PI * np.arange(n) / n
    agents = [{"x0": [0.0, 0.0, float(np.cos(a)), float(np.sin(a))]} for a in ang]
    half = 0.04
    geometry = {
        f"obs_{tag}": {"box": {"lower": [cx - half, cy - half], "upper": [cx + half, cy + half]}}
        for tag, (cx, cy) in {"ru": (0.15, 0.15), "up": (-0.15, 0.15), "lc": (-0.15, -0.15)}.items()
    }
    buffers = {"obs_ru": 0.0, "obs_up": 0.05, "obs_lc": 0.1}
    behaviors = [
        {"name": f"safe_{k}", "kind": "safe_polytope", "geometry": k, "buffer": b, "task": "position", "steps": "all"}
        for k, b in buffers.items()
    ]
    return {
        "scenario": {"name": "swarm_safety", "N": 200, "agents": agents, "warm_start": "zero",
                     "success": _success()},
        "model": {"name": "double_integrator", "dt": 0.003, "integrator": "euler"},
        "geometry": geometry,
        "behaviors": behaviors,
        "cost": {"R": 1.0},
        "solver": _solver(penalty_decrease_ratio=0.5),
        "output": _output(),
    }


def corridor_reach():
    """Five goal-seeking and five goalless point masses in a hexagon corridor."""
    radii = [0.5, 0.4, 0.3, 0.15, 0.1]
    geometry = {f"hex_{i}": {"regular": {"center": [0.4, 0.0], "inradius": r, "sides": 6, "rotation": 0.0}}
                for i, r in enumerate(radii)}
    agents = []
    for i in range(len(radii)):
        agents.append({"x0": [-0.2, -0.025, 0.0, 0.0], "obstacle": f"hex_{i}", "goal": [1.0, 0.0, 0.0, 0.0]})
    for i in range(len(radii)):
        agents.append({"x0": [-0.2, 0.025, 0.0, 0.0], "obstacle": f"hex_{i}",
                       "cost": {"R": 1.0, "Q": [0.0, 0.0, 1.0, 0.0], "x_ref": [0.0, 0.0, 1.0, 0.0]}})
    behaviors = [
        {"name": "safe_hex", "kind": "safe_polytope", "geometry": "$obstacle", "buffer": 0.0, "task": "position",
         "steps": "all"},
        {"name": "reach_goal", "kind": "reach_point", "target": "$goal", "task": "state", "steps": "final"},
    ]
    return {
        "scenario": {"name": "corridor_reach", "N": 40, "agents": agents, "warm_start": "zero",
                     "goal_task": "position", "success": _success(interp=1)},
        "model": {"name": "double_integrator", "dt": 0.05, "integrator": "euler"},
        "geometry": geometry,
        "behaviors": behaviors,
        "cost": {"R": 1.0},
        "solver": _solver(penalty_decrease_ratio=0.5),
        "output": _output(),
    }


def subgoal_circle():
    """Point masses visiting a subgoal circle between four obstacles and an ellipse."""
    n = 20
    ang = 2 * PI * np.arange(n) / n
    agents = [{"x0": [0.0, 0.0, 0.0, 0.0],
               "subgoal": [float(0.15 * np.cos(a)), float(0.15 * np.sin(a))],
               "goal": [float(0.15 * np.cos(a + PI)), float(0.15 * np.sin(a + PI)), 0.0, 0.0]} for a in ang]
    geometry = {
        "quad": {"regular": {"center": [0.2, 0.2], "inradius": 0.1, "sides": 4, "rotation": 0.0}},
        "pent": {"regular": {"center": [-0.2, 0.2], "inradius": 0.1, "sides": 5, "rotation": 0.0}},
        "ellipse": {"spline": {"shape": "ellipse", "center": [-0.2, -0.2], "semi_axes": [0.1, 0.05],
                               "angle": PI / 4, "margin": 0.15, "spans": [16, 16]}},
        "heart": {"spline": {"shape": "heart", "center": [0.2, -0.2], "size": 0.2, "margin": 0.15,
                             "spans": [16, 16]}},
    }
    behaviors = [
        {"name": "safe_quad", "kind": "safe_polytope", "geometry": "quad", "buffer": 0.0, "task": "position",
         "steps": "all"},
        {"name": "safe_pent", "kind": "safe_polytope", "geometry": "pent", "buffer": 0.0, "task": "position",
         "steps": "all"},
        {"name": "safe_ellipse", "kind": "safe_sdf", "geometry": "ellipse", "buffer": 0.0, "task": "position",
         "steps": "all"},
        {"name": "safe_heart", "kind": "safe_sdf", "geometry": "heart", "buffer": 0.0, "task": "position",
         "steps": "all"},
        {"name": "box", "kind": "box_limit", "lower": [-0.35, -0.35], "upper": [0.35, 0.35], "task": "position",
         "steps": "all"},
        {"name": "subgoal", "kind": "reach_point", "target": "$subgoal", "task": "position", "steps": "half"},
        {"name": "goal", "kind": "reach_point", "target": "$goal", "task": "state", "steps": "final"},
    ]
    return {
        "scenario": {"name": "subgoal_circle", "N": 40, "agents": agents, "warm_start": "zero",
                     "goal_task": "position", "success": _success(interp=1)},
        "model": {"name": "double_integrator", "dt": 0.05, "integrator": "euler"},
        "geometry": geometry,
        "behaviors": behaviors,
        "cost": {"R": 1.0},
        "solver": _solver(penalty_decrease_ratio=0.5),
        "output": _output(),
    }


BARRIER_CENTERS = [[0.05, -0.15], [0.15, -0.05], [0.15, -0.15], [-0.05, 0.15], [-0.15, 0.05], [-0.15, 0.15]]


def barrier_agents(count, seed):
    """Starts right of the upper-left cluster; the straight path to the goal disc grazes two circles from above."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    goal = [-0.2, 0.2]
    out = []
    for _ in range(count):
        start = [0.30 + rng.uniform(-0.02, 0.02), 0.17 + rng.uniform(-0.015, 0.015)]
        out.append({"x0": [float(start[0]), float(start[1]), 0.0, 0.0], "goal": goal})
    return out


def barrier_swarm():
    """Agents reaching a goal disc past six circles, with a constant-gamma barrier wrap."""
    geometry = {f"circle_{i}": {"circle": {"center": c, "radius": 0.03}} for i, c in enumerate(BARRIER_CENTERS)}
    geometry["goal_disc"] = {"circle": {"center": [-0.2, 0.2], "radius": 0.05}}
    behaviors = [
        {"name": f"safe_circle_{i}", "kind": "safe_sdf", "geometry": f"circle_{i}", "buffer": 0.01,
         "task": "position", "steps": "all", "context": "velocity",
         "barrier": {"gamma": "constant", "scale": 0.02}}
        for i in range(len(BARRIER_CENTERS))
    ]
    behaviors += [
        {"name": "box", "kind": "box_limit", "lower": [-0.35, -0.35], "upper": [0.35, 0.35], "task": "position",
         "steps": "all"},
        {"name": "goal", "kind": "reach_sdf", "geometry": "goal_disc", "level": 0.0, "task": "position",
         "steps": "final"},
        {"name": "stop", "kind": "reach_point", "target": [0.0, 0.0], "task": "velocity", "steps": "final"},
    ]
    return {
        "scenario": {"name": "barrier_swarm", "N": 40, "agents": barrier_agents(20, 0), "warm_start": "zero",
                     "success": _success(interp=1)},
        "model": {"name": "double_integrator", "dt": 0.05, "integrator": "euler"},
        "geometry": geometry,
        "behaviors": behaviors,
        "cost": {"R": 1.0},
        "solver": _solver(penalty_decrease_ratio=0.5),
        "output": _output(),
    }


# ------------------------------------------------------------------ unicycle

# The appendix lists the "Rectangle" and "Triangle" vertex sets under swapped
# names; they are stored here under the names matching their shapes.
UNICYCLE_SHAPES = {
    "triangle": [[0.0, -0.25], [0.5, 0.0], [0.0, 0.25]],
    "rectangle": [[3.0, -1.0], [3.0, 1.0], [-1.0, 1.0], [-1.0, -1.0]],
    "quadrilateral": [[2.0, 0.0], [0.0, 1.0], [-0.5, 0.0], [0.0, -1.0]],
    "l_shape": [[3.0, -1.0], [3.0, 1.0], [1.0, 1.0], [1.0, 3.0], [-1.0, 3.0], [-1.0, -1.0]],
}


def unicycle_shapes():
    """Four unicycle body shapes steering around an octagon."""
    s = 10.0
    geometry = {name: {"hull": v, "scale": 1.0 / s} for name, v in UNICYCLE_SHAPES.items()}
    geometry["octagon"] = {"regular": {"center": [0.6, 0.5], "inradius": 0.15, "sides": 8, "rotation": 0.0}}
    agents = [{"x0": [0.0, 0.0, 0.0], "body": name, "goal": [1.2, 1.0, 0.0]} for name in UNICYCLE_SHAPES]
    behaviors = [
        {"name": "safe_octagon", "kind": "safe_minkowski", "geometry": "octagon", "body": "$body", "buffer": 0.005,
         "task": "position", "context": "heading", "steps": "all"},
        {"name": "goal", "kind": "reach_point", "target": "$goal", "task": "pose", "steps": "final"},
    ]
    return {
        "scenario": {"name": "unicycle_shapes", "N": 60, "agents": agents, "warm_start": "zero", "body": "$body",
                     "goal_task": "pose", "success": _success()},
        "model": {"name": "unicycle", "dt": 0.05, "integrator": "euler"},
        "geometry": geometry,
        "behaviors": behaviors,
        "cost": {"R": [1.0, 0.1]},
        "solver": _solver(penalty_decrease_ratio=0.5),
        "output": _output(),
    }


# ----------------------------------------------------------------------- arm

# link lengths of the reference planar-arm toolbox; with unit links the goal poses are out of reach
ARM_LINKS = (2.0, 2.0, 1.0)
ARM_Q0 = [2 * PI / 3, -PI / 6, -PI / 4]
ARM_GOAL = [2.5, 0.5, -PI / 4]


def _arm_base(name, behaviors, geometry=None, agent=None, N=80, solver=None):
    agent = agent or {"q0": ARM_Q0, "goal": ARM_GOAL}
    behaviors = [
        {"name": "ddq_limit", "kind": "box_limit", "lower": [-3.0, -3.0, -3.0], "upper": [1.0, 1.0, 1.0],
         "on": "input", "task": "input", "input_set": True},
        {"name": "goal", "kind": "reach_point", "target": "$goal", "task": "pose", "steps": "final"},
    ] + behaviors
    return {
        "scenario": {"name": name, "N": N, "agents": [agent], "warm_start": "zero", "goal_task": "pose",
                     "success": _success()},
        "model": {"name": "planar_arm3", "dt": 0.05, "integrator": "euler", "links": list(ARM_LINKS)},
        "geometry": geometry or {},
        "behaviors": behaviors,
        "cost": {"R": 1.0},
        "solver": solver or _solver(penalty_decrease_ratio=0.5),
        "output": _output(),
    }


def _arm_start_pose(q0=ARM_Q0):
    from ..dynamics import arm_fk

    return arm_fk(np.asarray(q0), ARM_LINKS)[0]


def arm_reach():
    """Three-link arm reaching a goal pose under joint-acceleration limits."""
    return _arm_base("arm_reach", [])


def arm_line():
    """Arm end effector following the straight line to the goal."""
    p0 = _arm_start_pose()
    seg = {"segment": {"a": [float(p0[0]), float(p0[1])], "b": ARM_GOAL[:2]}}
    return _arm_base("arm_line", [
        {"name": "line", "kind": "reach_segment", "geometry": "line", "task": "position", "steps": "all"},
    ], geometry={"line": seg})


def arm_surface():
    """Arm end effector keeping a distance from a circular surface."""
    return _arm_base("arm_surface", [
        {"name": "surface", "kind": "safe_sdf", "geometry": "object", "buffer": 0.5, "task": "position",
         "steps": "all"},
    ], geometry={"object": {"circle": {"center": [2.5, 2.5], "radius": 1.5}}})


def arm_region(N=80):
    """Arm end effector staying inside an annulus around the circle."""
    start = N // 4
    return _arm_base("arm_region", [
        {"name": "outside_inner", "kind": "safe_sdf", "geometry": "inner", "buffer": 0.0, "task": "position",
         "steps": "all"},
        {"name": "inside_outer", "kind": "reach_sdf", "geometry": "outer", "level": 0.0, "task": "position",
         "steps": {"from": start, "to": N}},
    ], geometry={"inner": {"circle": {"center": [2.5, 2.5], "radius": 1.5}},
                 "outer": {"circle": {"center": [2.5, 2.5], "radius": 2.0}}}, N=N)


def _slot_walls(goal, axis_angle):
    """Three walls around a slot whose axis points along ``axis_angle`` at ``goal``."""
    c, s = math.cos(axis_angle), math.sin(axis_angle)
    R = np.array([[c, -s], [s, c]])

    def rect(x0, x1, y0, y1):
        pts = np.array([[x1, y0], [x1, y1], [x0, y1], [x0, y0]]) @ R.T + np.asarray(goal)
        return {"vertices": pts.tolist()}

    return {
        "wall_left": rect(-0.1, 0.25, 0.15, 0.45),
        "wall_right": rect(-0.1, 0.25, -0.45, -0.15),
        "wall_bottom": rect(0.25, 0.45, -0.45, 0.45),
    }


def arm_insertion():
    """Arm inserting its last link into a slot between two walls."""
    goal = [1.5, 1.0, -PI / 4]
    geometry = _slot_walls(goal[:2], goal[2])
    geometry["peg"] = {"box": {"lower": [-0.2, -0.1], "upper": [0.2, 0.1]}}
    behaviors = [
        {"name": f"safe_{w}", "kind": "safe_minkowski", "geometry": w, "body": "peg", "buffer": 0.02,
         "task": "position", "context": "heading", "steps": "all"}
        for w in ("wall_left", "wall_right", "wall_bottom")
    ]
    cfg = _arm_base("arm_insertion", behaviors, geometry=geometry, agent={"q0": ARM_Q0, "goal": goal}, N=80)
    cfg["scenario"]["body"] = "peg"
    return cfg


def object_centered_target(q0=(2.1, -0.5, -1.1), goal=(2.5, 0.48, 1.57)):
    """Point seen along the initial and the final end-effector headings (intersection of both rays)."""
    p0 = _arm_start_pose(q0)
    d0 = np.array([math.cos(p0[2]), math.sin(p0[2])])
    d1 = np.array([math.cos(goal[2]), math.sin(goal[2])])
    M = np.stack([d0, -d1], axis=1)
    t = np.linalg.solve(M, np.asarray(goal[:2]) - p0[:2])
    return (p0[:2] + t[0] * d0).tolist()


def arm_object_centered():
    """Arm keeping its heading pointed at an object while reaching."""
    q0 = [2.1, -0.5, -1.1]
    goal = [2.5, 0.48, 1.57]
    target = object_centered_target(q0, goal)
    behaviors = [
        {"name": "bearing", "kind": "reach_point", "target": [0.0], "task": "bearing", "task_target": target,
         "steps": {"from": 2, "to": 80}},
    ]
    return _arm_base("arm_object_centered", behaviors, agent={"q0": q0, "goal": goal})


# ------------------------------------------------------------------- parking

VEHICLE = {"length": 4.7, "width": 2.0, "wheelbase": 2.7, "rear_overhang": 1.0}


def _parking(name, goal, spot):
    """Spot of width ``w`` and depth ``d`` below a 6 m road ``y in [5, 11]``.

    Obstacles: blocks left and right of the spot, the spot floor and the far
    road boundary. The car reference point is the rear axle.
    """
    w, d = spot
    L, W, ro = VEHICLE["length"], VEHICLE["width"], VEHICLE["rear_overhang"]
    road_y, road_h = 5.0, 6.0
    floor = road_y - d
    geometry = {
        "car": {"box": {"lower": [-ro, -W / 2], "upper": [L - ro, W / 2]}},
        "left_block": {"box": {"lower": [-15.0, floor - 1.0], "upper": [-w / 2, road_y]}},
        "right_block": {"box": {"lower": [w / 2, floor - 1.0], "upper": [15.0, road_y]}},
        "floor": {"box": {"lower": [-15.0, floor - 1.0], "upper": [15.0, floor]}},
        "top_wall": {"box": {"lower": [-15.0, road_y + road_h], "upper": [15.0, road_y + road_h + 1.0]}},
    }
    behaviors = [
        {"name": f"safe_{o}", "kind": "safe_minkowski", "geometry": o, "body": "car", "buffer": 0.1,
         "task": "position", "context": "heading", "steps": "all"}
        for o in ("left_block", "right_block", "floor", "top_wall")
    ]
    behaviors += [
        {"name": "goal", "kind": "reach_point", "target": goal, "task": "state", "steps": "final"},
        {"name": "speed_limit", "kind": "box_limit", "lower": [-1.0], "upper": [2.0], "task": "speed",
         "steps": "all"},
        {"name": "input_limit", "kind": "box_limit", "lower": [-0.6, -1.0], "upper": [0.6, 2.0], "on": "input",
         "task": "input", "input_set": True},
    ]
    return {
        "scenario": {
            "name": name,
            "N": "auto",
            "agents": [],
            "warm_start": "hybrid_astar",
            "body": "car",
            "goal": goal,
            "goal_task": "pose",
            "start_region": {"x": [-10.0, 10.0], "y": [6.5, 9.5], "theta": [-PI / 6, PI / 6], "v": 0.0,
                             "reject_collisions": True, "min_clearance": 0.2},
            "hybrid_astar": {"grid": 0.5, "yaw_resolution": 0.5, "motion_resolution": 0.1,
                             "back_penalty": 0.5, "steer_change_penalty": 0.5, "steer_penalty": 0.5,
                             "switch_penalty": 5.0, "margin": 0.05, "max_expansions": 20000,
                             "arc_length": [0.5, 1.0],
                             "speed": 1.0, "accel": 0.5},
            "success": _success(),
        },
        "model": {"name": "kinematic_bicycle", "dt": 0.2, "integrator": "euler", "wheelbase": VEHICLE["wheelbase"]},
        "geometry": geometry,
        "behaviors": behaviors,
        "cost": {"R": [0.1, 0.1], "rate": [0.1, 0.1]},
        "solver": _solver(rho0=10.0, penalty_decrease_ratio=0.5),
        "output": _output(),
    }


def parking_vertical():
    """Perpendicular parking of the bicycle car from a random road start."""
    return _parking("parking_vertical", [0.0, 1.35, PI / 2, 0.0], (2.6, 5.0))


def parking_parallel():
    """Parallel parking of the bicycle car from a random road start."""
    return _parking("parking_parallel", [-1.2, 4.0, 0.0, 0.0], (6.0, 2.5))


CATALOG = {
    "swarm_safety": swarm_safety,
    "corridor_reach": corridor_reach,
    "subgoal_circle": subgoal_circle,
    "barrier_swarm": barrier_swarm,
    "unicycle_shapes": unicycle_shapes,
    "arm_reach": arm_reach,
    "arm_line": arm_line,
    "arm_surface": arm_surface,
    "arm_region": arm_region,
    "arm_insertion": arm_insertion,
    "arm_object_centered": arm_object_centered,
    "parking_vertical": parking_vertical,
    "parking_parallel": parking_parallel,
}


def default_config(name: str) -> dict:
    if name not in CATALOG:
        raise KeyError(name)
    return CATALOG[name]()
