"""Coarse hybrid A* over ``(x, y, theta)`` used as a warm start for parking.

The search runs backward from the goal pose toward the start so the tight
part of the path (the spot) is matched exactly; the remaining offset at the
start lies on the open road and is absorbed by the tracking controller that
converts the path into bicycle inputs. No analytic curve expansion is used;
primitives are fixed arcs at three steering values, driven in both gears.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import ConvexPolytope, cspace_halfspaces


@dataclass
class HybridAStarConfig:
    grid: float = 0.5
    yaw_resolution: float = 0.5
    motion_resolution: float = 0.1
    back_penalty: float = 0.5
    steer_change_penalty: float = 0.5
    steer_penalty: float = 0.5
    switch_penalty: float = 5.0
    margin: float = 0.15
    max_expansions: int = 20000
    speed: float = 1.0
    reverse_speed: float = 0.8
    accel: float = 0.5
    steer_values: tuple = (-0.6, 0.0, 0.6)
    arc_length: float | tuple = 1.0  # one length or several primitive lengths
    heuristic_weight: float = 1.5
    pad_steps: int = 10

    @classmethod
    def from_dict(cls, d: dict | None) -> "HybridAStarConfig":
        d = dict(d or {})
        for k in ("steer_values", "arc_length"):
            if isinstance(d.get(k), list):
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass
class PathResult:
    """Forward-time path sampled at the motion resolution."""

    found: bool
    poses: np.ndarray  # (P, 3)
    gears: np.ndarray  # (P,) +1 forward, -1 reverse, for the motion leaving each pose
    expansions: int = 0
    cost: float = 0.0


@dataclass
class WarmStart:
    inputs: np.ndarray
    found: bool
    path: PathResult | None = None
    reference: np.ndarray | None = None
    warnings: list = field(default_factory=list)


def _wrap(a):
    return (np.asarray(a) + math.pi) % (2 * math.pi) - math.pi


class CollisionChecker:
    """Reference positions whose body pose overlaps an (inflated) obstacle."""

    def __init__(self, body: ConvexPolytope, obstacles, margin: float):
        self.body = body
        self.obstacles = list(obstacles)
        self.margin = float(margin)

    def clearance_bound(self, poses) -> np.ndarray:
        """Per-pose lower-bound-style clearance: max facet slack of the C-space obstacle, min over obstacles."""
        poses = np.atleast_2d(poses)
        out = np.full(len(poses), np.inf)
        for obs in self.obstacles:
            rows = cspace_halfspaces(self.body, obs, poses[:, 2])
            slack = np.einsum("kmi,ki->km", rows.normals, poses[:, :2]) - rows.offsets
            out = np.minimum(out, np.max(slack, axis=1))
        return out

    def free(self, poses) -> np.ndarray:
        return self.clearance_bound(poses) >= self.margin


def _dijkstra_grid(origin, lo, hi, grid, blocked_fn):
    """8-connected shortest distances on a grid from ``origin``; ``inf`` where unreachable."""
    nx = int(math.ceil((hi[0] - lo[0]) / grid)) + 1
    ny = int(math.ceil((hi[1] - lo[1]) / grid)) + 1
    xs = lo[0] + grid * np.arange(nx)
    ys = lo[1] + grid * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    blocked = blocked_fn(np.stack([gx.ravel(), gy.ravel()], axis=1)).reshape(nx, ny)
    dist = np.full((nx, ny), np.inf)
    i0 = int(np.clip(round((origin[0] - lo[0]) / grid), 0, nx - 1))
    j0 = int(np.clip(round((origin[1] - lo[1]) / grid), 0, ny - 1))
    dist[i0, j0] = 0.0
    heap = [(0.0, i0, j0)]
    moves = [(di, dj, grid * math.hypot(di, dj)) for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj]
    while heap:
        d, i, j = heapq.heappop(heap)
        if d > dist[i, j]:
            continue
        for di, dj, c in moves:
            a, b = i + di, j + dj
            if 0 <= a < nx and 0 <= b < ny and not blocked[a, b] and d + c < dist[a, b]:
                dist[a, b] = d + c
                heapq.heappush(heap, (d + c, a, b))
    return dist


def _arc_samples(steer, gear, length, res, wheelbase):
    """Body-frame offsets ``(dx, dy, dtheta)`` along one primitive, excluding the origin."""
    n = max(1, int(round(length / res)))
    s = gear * length * np.arange(1, n + 1) / n
    kappa = math.tan(steer) / wheelbase
    th = kappa * s
    if abs(kappa) < 1e-12:
        return np.stack([s, np.zeros_like(s), np.zeros_like(s)], axis=1)
    return np.stack([np.sin(th) / kappa, (1 - np.cos(th)) / kappa, th], axis=1)


def plan_path(start, goal, checker: CollisionChecker, bounds, cfg: HybridAStarConfig, wheelbase: float) -> PathResult:
    """Search from ``goal`` back to ``start``; the returned path runs forward in time from near ``start`` to ``goal``."""
    start = np.asarray(start, float)[:3]
    goal = np.asarray(goal, float)[:3]
    lo, hi = np.asarray(bounds[0], float), np.asarray(bounds[1], float)
    if np.hypot(*(start[:2] - goal[:2])) <= cfg.grid and abs(_wrap(start[2] - goal[2])) <= cfg.yaw_resolution:
        return PathResult(True, np.stack([start, goal]), np.array([1, 1]))

    n_yaw = max(1, int(round(2 * math.pi / cfg.yaw_resolution)))
    yaw_bin = 2 * math.pi / n_yaw

    def key(p):
        return (int(math.floor((p[0] - lo[0]) / cfg.grid)), int(math.floor((p[1] - lo[1]) / cfg.grid)),
                int(math.floor((_wrap(p[2]) + math.pi) / yaw_bin)) % n_yaw)

    # holonomic cost-to-go toward the start; a point is blocked when a disc of half the
    # body width around it meets an obstacle, which keeps the estimate optimistic
    half_w = 0.5 * float(np.ptp(checker.body.vertices[:, 1]))
    point = ConvexPolytope.regular([0.0, 0.0], 0.5 * half_w, 8)
    point_checker = CollisionChecker(point, checker.obstacles, 0.0)

    def blocked(P):
        return ~point_checker.free(np.concatenate([P, np.zeros((len(P), 1))], axis=1))

    dist = _dijkstra_grid(start, lo, hi, cfg.grid, blocked)

    def heuristic(p):
        i = int(np.clip(round((p[0] - lo[0]) / cfg.grid), 0, dist.shape[0] - 1))
        j = int(np.clip(round((p[1] - lo[1]) / cfg.grid), 0, dist.shape[1] - 1))
        h = dist[i, j]
        e = math.hypot(p[0] - start[0], p[1] - start[1])
        return cfg.heuristic_weight * (max(h, e) if np.isfinite(h) else 3.0 * e)

    # search gear g moves the car along -g in forward time
    arcs = np.atleast_1d(cfg.arc_length).astype(float)
    prims = [(st, g, ln, _arc_samples(st, g, ln, cfg.motion_resolution, wheelbase))
             for ln in arcs for g in (1, -1) for st in cfg.steer_values]

    if not checker.free(goal[None])[0]:
        return PathResult(False, goal[None], np.array([1]))
    # node: pose, parent index, search gear, steer, samples from parent
    nodes = [(goal, -1, 0, 0.0, None)]
    g_cost = {key(goal): 0.0}
    heap = [(heuristic(goal), 0.0, 0)]
    closed = set()
    expansions = 0
    found = -1
    while heap and expansions < cfg.max_expansions:
        _, gc, idx = heapq.heappop(heap)
        pose, _, gear0, steer0, _ = nodes[idx]
        k = key(pose)
        if k in closed:
            continue
        closed.add(k)
        expansions += 1
        if np.hypot(*(pose[:2] - start[:2])) <= cfg.grid and abs(_wrap(pose[2] - start[2])) <= cfg.yaw_resolution:
            found = idx
            break
        c, s = math.cos(pose[2]), math.sin(pose[2])
        batch = []
        for st, g, _, off in prims:
            P = np.empty_like(off)
            P[:, 0] = pose[0] + c * off[:, 0] - s * off[:, 1]
            P[:, 1] = pose[1] + s * off[:, 0] + c * off[:, 1]
            P[:, 2] = pose[2] + off[:, 2]
            batch.append(P)
        allp = np.concatenate(batch)
        inside = np.all((allp[:, :2] >= lo) & (allp[:, :2] <= hi), axis=1)
        ok = np.zeros(len(allp), bool)
        if inside.any():
            ok[inside] = checker.free(allp[inside])
        ends = np.cumsum([len(P) for P in batch])
        for i, (st, g, ln, off) in enumerate(prims):
            if not ok[ends[i] - len(off):ends[i]].all():
                continue
            P = batch[i]
            end = P[-1].copy()
            end[2] = float(_wrap(end[2]))
            ke = key(end)
            if ke in closed:
                continue
            step = ln
            if g == 1:  # forward-time reverse gear
                step += cfg.back_penalty * ln
            step += cfg.steer_penalty * abs(st)
            if gear0 != 0:
                step += cfg.steer_change_penalty * abs(st - steer0)
                if g != gear0:
                    step += cfg.switch_penalty
            ng = gc + step
            if ng < g_cost.get(ke, np.inf):
                g_cost[ke] = ng
                nodes.append((end, idx, g, st, P))
                heapq.heappush(heap, (ng + heuristic(end), ng, len(nodes) - 1))

    if found < 0:
        return PathResult(False, start[None], np.array([1]), expansions)

    # unwind: search order goal -> start; reverse for forward time
    poses, gears = [nodes[found][0]], []
    i = found
    while nodes[i][1] >= 0:
        pose, parent, g, _, samples = nodes[i]
        seq = np.concatenate([nodes[parent][0][None], samples[:-1]])[::-1]
        poses.extend(seq)
        gears.extend([-g] * len(seq))
        i = parent
    gears.append(gears[-1] if gears else 1)
    poses = np.asarray(poses)
    poses[:, 2] = np.unwrap(poses[:, 2])
    return PathResult(True, poses, np.asarray(gears), expansions, float(g_cost.get(key(nodes[found][0]), 0.0)))


def _speed_profile(length, vmax, accel, dt):
    """Trapezoidal arc-length profile ``s(t)`` sampled at ``dt`` from rest to rest."""
    if length <= 0:
        return np.zeros(1), np.zeros(1)
    t_acc = vmax / accel
    if accel * t_acc ** 2 >= length:  # triangular
        t_acc = math.sqrt(length / accel)
        vmax = accel * t_acc
        T = 2 * t_acc
    else:
        T = 2 * t_acc + (length - accel * t_acc ** 2) / vmax
    t = np.arange(0.0, T + dt, dt)
    t[-1] = min(t[-1], T)
    s = np.where(t < t_acc, 0.5 * accel * t ** 2,
                 np.where(t < T - t_acc, 0.5 * accel * t_acc ** 2 + vmax * (t - t_acc),
                          length - 0.5 * accel * np.maximum(T - t, 0.0) ** 2))
    v = np.where(t < t_acc, accel * t, np.where(t < T - t_acc, vmax, accel * np.maximum(T - t, 0.0)))
    s[-1], v[-1] = length, 0.0
    return s, v


def time_reference(path: PathResult, cfg: HybridAStarConfig, dt: float, wheelbase: float) -> np.ndarray:
    """Reference ``(x, y, theta, v, delta)`` per time step; every gear segment starts and ends at rest."""
    P, G = path.poses, path.gears
    if len(P) < 2:
        return np.concatenate([P[:1], np.zeros((1, 2))], axis=1)
    cuts = [0] + [i for i in range(1, len(P) - 1) if G[i] != G[i - 1]] + [len(P) - 1]
    rows = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        seg = P[a:b + 1]
        gear = G[a]
        ds = np.hypot(*np.diff(seg[:, :2], axis=0).T)
        s_nodes = np.concatenate([[0.0], np.cumsum(ds)])
        vmax = cfg.speed if gear > 0 else cfg.reverse_speed
        s, v = _speed_profile(float(s_nodes[-1]), vmax, cfg.accel, dt)
        th_nodes = seg[:, 2]
        kappa_nodes = np.gradient(th_nodes, s_nodes) * gear if len(seg) > 2 else np.zeros(len(seg))
        x = np.interp(s, s_nodes, seg[:, 0])
        y = np.interp(s, s_nodes, seg[:, 1])
        th = np.interp(s, s_nodes, th_nodes)
        kap = np.interp(s, s_nodes, kappa_nodes)
        part = np.stack([x, y, th, gear * v, np.arctan(wheelbase * kap)], axis=1)
        rows.append(part if not rows else part[1:])
    return np.concatenate(rows)


def track_reference(model, x0, ref: np.ndarray, lower, upper, pad_steps: int = 10,
                    k_lat=0.6, k_head=1.5, k_long=0.5) -> np.ndarray:
    """Closed-loop tracking of the reference with the bicycle model; returns clipped inputs."""
    L = model.wheelbase
    dt = model.dt
    n = len(ref) - 1 + pad_steps
    U = np.zeros((max(n, 1), 2))
    x = np.asarray(x0, float).copy()
    for k in range(len(U)):
        r = ref[min(k, len(ref) - 1)]
        rn = ref[min(k + 1, len(ref) - 1)]
        v_sign = np.sign(rn[3]) if abs(rn[3]) > 1e-9 else (np.sign(x[3]) if abs(x[3]) > 1e-9 else 1.0)
        c, s = math.cos(r[2]), math.sin(r[2])
        ex, ey = x[0] - r[0], x[1] - r[1]
        e_lat = -s * ex + c * ey
        e_long = c * ex + s * ey
        e_th = float(_wrap(x[2] - r[2]))
        v_eff = v_sign * max(abs(x[3]), 0.3)
        th_star = float(np.clip(-k_lat * e_lat / v_eff, -0.5, 0.5))
        tan_d = math.tan(r[4]) - L * k_head * (e_th - th_star) / v_eff
        delta = math.atan(tan_d)
        v_cmd = rn[3] - k_long * e_long * (1.0 if k < len(ref) - 1 else 0.0)
        a = (v_cmd - x[3]) / dt
        u = np.clip([delta, a], lower, upper)
        U[k] = u
        x = model.step(x, u)
    return U


def hybrid_astar_warm_start(model, x0, goal, body, obstacles, bounds, cfg: HybridAStarConfig, lower, upper):
    """Warm-start inputs for the bicycle; zero inputs with a warning when no path is found."""
    checker = CollisionChecker(body, obstacles, cfg.margin)
    path = plan_path(x0, goal, checker, bounds, cfg, model.wheelbase)
    if not path.found:
        n = max(1, int(round(30.0 / model.dt)))
        return WarmStart(np.zeros((n, model.n_u)), False, path, None, ["hybrid A* found no path; using zero inputs"])
    ref = time_reference(path, cfg, model.dt, model.wheelbase)
    U = track_reference(model, x0, ref, lower, upper, cfg.pad_steps)
    return WarmStart(U, True, path, ref)
