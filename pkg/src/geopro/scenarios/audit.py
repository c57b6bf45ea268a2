"""Collision audit of trajectories between and at the solver knots."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import ConvexPolytope, cspace_halfspaces
from ..projectors import BarrierWrapped, SafeMinkowski, SafePolytope, SafeSdf


@dataclass
class AuditObstacle:
    name: str
    kind: str  # "point_polytope" | "point_sdf" | "body_polytope"
    geometry: object
    buffer: float
    position: tuple
    heading: int | None = None
    body: ConvexPolytope | None = None
    projector: object = None


@dataclass
class AuditResult:
    min_clearance: float
    per_obstacle: dict = field(default_factory=dict)  # name -> {"clearance", "buffer"}
    violations: list = field(default_factory=list)  # (sub-step time, name, clearance) with clearance < -tol
    buffer_violations: list = field(default_factory=list)
    samples: int = 0

    @property
    def collision_free(self) -> bool:
        return not self.violations

    def to_dict(self):
        return {
            "min_clearance": _finite(self.min_clearance),
            "per_obstacle": {k: {"clearance": _finite(v["clearance"]), "buffer": v["buffer"]}
                             for k, v in self.per_obstacle.items()},
            "violations": len(self.violations),
            "buffer_violations": len(self.buffer_violations),
            "samples": self.samples,
        }


def _finite(x):
    return float(x) if np.isfinite(x) else None


def _point_segment_dist(P, A, B):
    """Distances from points ``P (..., 2)`` to segments ``A-B (..., 2)`` with broadcasting."""
    d = B - A
    t = np.einsum("...i,...i->...", P - A, d) / np.maximum(np.einsum("...i,...i->...", d, d), 1e-300)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(P - (A + t[..., None] * d), axis=-1)


def body_clearance(body: ConvexPolytope, obstacle: ConvexPolytope, poses) -> np.ndarray:
    """Exact signed distance between ``body`` at each pose ``(x, y, theta)`` and ``obstacle``.

    Separated pairs give the closest vertex-edge distance; overlapping pairs
    give minus the least penetration over the facet rows of the Minkowski
    difference, which is the separating-axis minimal translation.
    """
    poses = np.atleast_2d(np.asarray(poses, dtype=float))
    rows = cspace_halfspaces(body, obstacle, poses[:, 2])
    slack = np.einsum("kmi,ki->km", rows.normals, poses[:, :2]) - rows.offsets
    depth = np.max(slack, axis=1)
    inside = depth < 0
    out = depth.copy()
    if np.any(~inside):
        P = poses[~inside]
        c, s = np.cos(P[:, 2]), np.sin(P[:, 2])
        R = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
        bv = np.einsum("kij,bj->kbi", R, body.vertices) + P[:, None, :2]  # (K, nb, 2)
        ov = np.asarray(obstacle.vertices)
        be = np.roll(bv, -1, axis=1)
        oe = np.roll(ov, -1, axis=0)
        d1 = _point_segment_dist(bv[:, :, None, :], ov[None, None, :, :], oe[None, None, :, :])
        d2 = _point_segment_dist(ov[None, :, None, :], bv[:, None, :, :], be[:, None, :, :])
        out[~inside] = np.minimum(d1.min(axis=(1, 2)), d2.min(axis=(1, 2)))
    return out


def point_clearance_polytope(poly: ConvexPolytope, P) -> np.ndarray:
    """Exact signed distance from points to a polygon."""
    P = np.atleast_2d(P)
    s = P @ poly.A.T - poly.b
    depth = np.max(s, axis=1)
    out = depth.copy()
    outside = depth >= 0
    if np.any(outside):
        v = np.asarray(poly.vertices)
        e = np.roll(v, -1, axis=0)
        out[outside] = _point_segment_dist(P[outside][:, None, :], v[None], e[None]).min(axis=1)
    return out


def audit_obstacles(problem) -> list:
    """Safety bindings of a problem as audit entries."""
    out = []
    for b in problem.constraints:
        p = b.projector
        if isinstance(p, BarrierWrapped):
            p = p.inner
        idx = tuple(getattr(b.task, "indices", ()))
        if isinstance(p, SafePolytope):
            out.append(AuditObstacle(b.name, "point_polytope", p.obstacle, p.buffer, idx, projector=p))
        elif isinstance(p, SafeSdf):
            out.append(AuditObstacle(b.name, "point_sdf", p.shape, p.buffer, idx, projector=p))
        elif isinstance(p, SafeMinkowski):
            head = tuple(getattr(b.context, "indices", ()))
            out.append(AuditObstacle(b.name, "body_polytope", p.obstacle, p.buffer, idx, head[0], p.body, p))
    return out


def interpolate_states(X, interp_factor: int, refresh=None) -> tuple[np.ndarray, np.ndarray]:
    """``interp_factor`` sub-samples per step by linear interpolation; returns ``(times, states)``."""
    if interp_factor < 1:
        raise ValueError("interp_factor must be >= 1")
    X = np.asarray(X, dtype=float)
    if len(X) == 1:
        return np.zeros(1), X.copy()
    t = np.arange((len(X) - 1) * interp_factor + 1) / interp_factor
    k = np.minimum(np.floor(t).astype(int), len(X) - 2)
    w = (t - k)[:, None]
    S = (1 - w) * X[k] + w * X[k + 1]
    if refresh is not None:
        S = refresh(S)
    return t, S


def audit_collision(obstacles, X, interp_factor: int = 10, refresh=None, tol: float = 1e-9) -> AuditResult:
    """Minimum signed clearance against every obstacle along the interpolated trajectory.

    ``refresh`` recomputes dependent state entries of interpolated samples
    (the arm end-effector pose from its joints).
    """
    t, S = interpolate_states(X, interp_factor, refresh)
    res = AuditResult(np.inf, samples=len(S))
    for ob in obstacles:
        pos = S[:, list(ob.position)]
        if ob.kind == "body_polytope":
            poses = np.concatenate([pos, S[:, [ob.heading]]], axis=1)
            c = body_clearance(ob.body, ob.geometry, poses)
        elif ob.kind == "point_polytope":
            c = point_clearance_polytope(ob.geometry, pos)
        else:
            c = ob.projector._value(pos)
        cmin = float(np.min(c)) if len(c) else np.inf
        res.per_obstacle[ob.name] = {"clearance": cmin, "buffer": float(ob.buffer)}
        res.min_clearance = min(res.min_clearance, cmin)
        for i in np.flatnonzero(c < -tol):
            res.violations.append((float(t[i]), ob.name, float(c[i])))
        for i in np.flatnonzero(c < ob.buffer - tol):
            res.buffer_violations.append((float(t[i]), ob.name, float(c[i])))
    return res
