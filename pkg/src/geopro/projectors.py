"""Behavior-level projectors: a trigger condition plus a set projection.

Every projector works on a single task vector ``v`` of shape ``(n,)`` or on a
batch ``(K, n)``. Some projectors also need a per-row context (the heading of a
rigid body for the Minkowski kinds, the velocity for barrier wraps); it is
passed as ``ctx`` with shape ``(K, c)``.

Besides ``condition`` / ``project`` / ``residual``, each projector provides
``penalty(v, ctx)`` returning the derivatives of ``0.5 * ||v - P(v)||^2`` with
respect to ``v`` and to the context, which the augmented Lagrangian gradient
needs. For exact Euclidean projections the ``v`` derivative is ``r = v - P(v)``;
the gradient-step SDF projectors differentiate their Newton iteration instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ConvexPolytope,
    SdfShape,
    Segment,
    boundary_closest,
    contains,
    cspace_halfspaces,
    inflate,
    minkowski_diff,
    project_onto_polytope,
    project_out_of_polytope,
)
from .geometry.minkowski import _drot

KINDS = (
    "safe_polytope",
    "safe_sdf",
    "safe_minkowski",
    "reach_point",
    "reach_contact",
    "reach_inside",
    "reach_minkowski",
    "reach_segment",
    "reach_sdf",
    "box_limit",
    "barrier_wrapped",
)
SAFETY_KINDS = ("safe_polytope", "safe_sdf", "safe_minkowski")


def _batch(v, dim):
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    V = np.atleast_2d(v)
    if V.shape[-1] != dim:
        raise ValueError(f"expected task vectors of dimension {dim}, got {V.shape[-1]}")
    return V, single


def _ctx_batch(ctx, K, dim):
    if dim == 0:
        return None
    if ctx is None:
        raise ValueError("this projector needs a context argument")
    C = np.asarray(ctx, dtype=float).reshape(-1, dim) if np.ndim(ctx) <= 1 else np.asarray(ctx, dtype=float)
    if len(C) == 1 and K > 1:
        C = np.repeat(C, K, axis=0)
    if C.shape != (K, dim):
        raise ValueError(f"context must have shape ({K}, {dim})")
    return C


class Projector:
    kind: str = ""
    output_dim: int = 2
    context_dim: int = 0
    buffer: float = 0.0

    # batched hooks: V (K, n), C (K, c) or None
    def _condition(self, V, C) -> np.ndarray:
        raise NotImplementedError

    def _project(self, V, C) -> np.ndarray:
        raise NotImplementedError

    def _ctx_grad(self, V, C, R) -> np.ndarray | None:
        return None if C is None else np.zeros_like(C)

    def _v_grad(self, V, C, R) -> np.ndarray:
        return R

    def _prep(self, v, ctx):
        V, single = _batch(v, self.output_dim)
        return V, _ctx_batch(ctx, len(V), self.context_dim), single

    def condition(self, v, ctx=None):
        V, C, single = self._prep(v, ctx)
        out = self._condition(V, C)
        return bool(out[0]) if single else out

    def project(self, v, ctx=None):
        V, C, single = self._prep(v, ctx)
        P = self._project(V, C)
        return P[0] if single else P

    def residual(self, v, ctx=None):
        V, C, single = self._prep(v, ctx)
        R = V - self._project(V, C)
        return R[0] if single else R

    def penalty(self, v, ctx=None):
        """``d/dv`` and ``d/dctx`` of ``0.5 ||v - P(v)||^2`` (batched)."""
        V, C, _ = self._prep(v, ctx)
        R = V - self._project(V, C)
        return self._v_grad(V, C, R), self._ctx_grad(V, C, R)

    def to_dict(self) -> dict:
        return {"kind": self.kind}


def _masked(V, P, active):
    return np.where(active[:, None], P, V)


@dataclass(frozen=True, eq=False)
class SafePolytope(Projector):
    """Keep a point outside an obstacle inflated by ``buffer``."""

    obstacle: ConvexPolytope
    buffer: float = 0.0
    kind = "safe_polytope"

    def __post_init__(self):
        object.__setattr__(self, "_grown", inflate(self.obstacle, self.buffer))

    @property
    def grown(self) -> ConvexPolytope:
        return self._grown

    def _condition(self, V, C):
        return contains(self._grown, V)

    def _project(self, V, C):
        return project_out_of_polytope(self._grown, V)

    def facet_distance(self, V):
        """Signed facet distance ``max_j a_j v - b_j`` and its facet (lowest index on ties)."""
        s = V @ self._grown.A.T - self._grown.b
        j = np.argmax(s, axis=1)
        return s[np.arange(len(V)), j], j

    def to_dict(self):
        return {"kind": self.kind, "polytope": self.obstacle.to_dict(), "buffer": self.buffer}


@dataclass(frozen=True, eq=False)
class SafeSdf(Projector):
    """Keep ``S(v) >= buffer`` using Newton steps along the field gradient.

    Points outside a spline field's domain are treated as safe.
    """

    shape: SdfShape
    buffer: float = 0.0
    max_steps: int = 20
    kind = "safe_sdf"

    def _covered(self, V):
        cov = getattr(self.shape, "covers", None)
        return np.ones(len(V), bool) if cov is None else cov(V)

    def _value(self, V):
        out = np.full(len(V), np.inf)
        m = self._covered(V)
        if np.any(m):
            out[m] = np.atleast_1d(self.shape.value(V[m]))
        return out

    def _condition(self, V, C):
        return self._value(V) - self.buffer < 0

    def _project(self, V, C):
        return newton_to_level(self.shape, V, self.buffer, self._covered, self.max_steps, outward=True)

    def _v_grad(self, V, C, R):
        _, J, _ = newton_to_level(self.shape, V, self.buffer, self._covered, self.max_steps, True, track=True)
        return _chain_grad(J, R)

    def to_dict(self):
        return {"kind": self.kind, "sdf": getattr(self.shape, "kind", ""), "buffer": self.buffer}


def newton_to_level(shape, V, level, covered, max_steps, outward=True, track=False):
    """Move rows violating ``S >= level`` (outward) or ``S <= level`` onto the level set.

    Each step is ``x - grad S (S - level) / ||grad S||^2``; for an exact
    distance field one step suffices. ``level`` may be a scalar or one value
    per row. With ``track`` the Jacobians of the result with respect to the
    start point ``(K, 2, 2)`` and to the level ``(K, 2)`` are returned too.
    """
    X = np.array(V, dtype=float)
    lev = np.broadcast_to(np.asarray(level, dtype=float), (len(X),))
    if track:
        J = np.repeat(np.eye(X.shape[1])[None], len(X), axis=0)
        q = np.zeros_like(X)
    for _ in range(max_steps):
        m = covered(X)
        idx = np.flatnonzero(m)
        if len(idx) == 0:
            break
        s = np.atleast_1d(shape.value(X[idx])) - lev[idx]
        bad = s < 0 if outward else s > 0
        if not np.any(bad):
            break
        idx, s = idx[bad], s[bad]
        g = np.atleast_2d(shape.gradient(X[idx]))
        gg = np.maximum(np.einsum("ij,ij->i", g, g), 1e-300)
        if track:
            # derivative of the step g s / |g|^2 with respect to the current point
            H = shape.hessian(X[idx]).reshape(len(idx), 2, 2)
            Hg = np.einsum("kij,kj->ki", H, g)
            D = (np.einsum("ki,kj->kij", g, g) + s[:, None, None] * H) / gg[:, None, None]
            D -= 2 * (s / gg**2)[:, None, None] * np.einsum("ki,kj->kij", g, Hg)
            J[idx] -= D @ J[idx]
            q[idx] += -np.einsum("kij,kj->ki", D, q[idx]) + g / gg[:, None]
        X[idx] -= g * (s / gg)[:, None]
        if np.all(np.abs(s) < 1e-13):
            break
    return (X, J, q) if track else X


def _chain_grad(J, R):
    """``d/dv 0.5 ||v - P(v)||^2 = (I - dP/dv)^T r``."""
    return R - np.einsum("kji,kj->ki", J, R)


@dataclass(frozen=True, eq=False)
class SafeMinkowski(Projector):
    """Keep a rigid convex body at reference position ``p`` and heading ``ctx`` off an obstacle.

    The configuration-space obstacle for the frozen heading is evaluated in
    H-representation; a colliding reference is pushed along the row of least
    penetration, which equals the origin's boundary projection in the
    Minkowski difference.
    """

    body: ConvexPolytope
    obstacle: ConvexPolytope
    buffer: float = 0.0
    kind = "safe_minkowski"
    context_dim = 1

    def _rows(self, V, C):
        # objective, gradient and residual evaluate the same headings back to back
        key = C[:, 0].tobytes()
        cache = self.__dict__.get("_cache")
        if cache is not None and cache[0] == key:
            rows = cache[1]
        else:
            rows = cspace_halfspaces(self.body, self.obstacle, C[:, 0])
            object.__setattr__(self, "_cache", (key, rows))
        slack = rows.offsets + self.buffer - np.einsum("kmi,ki->km", rows.normals, V)
        return rows, slack

    def _condition(self, V, C):
        _, slack = self._rows(V, C)
        return np.all(slack >= 0, axis=1)

    def _pick(self, V, C):
        rows, slack = self._rows(V, C)
        j = np.argmin(slack, axis=1)
        k = np.arange(len(V))
        return rows, slack[k, j], j, np.all(slack >= 0, axis=1)

    def _project(self, V, C):
        rows, depth, j, inside = self._pick(V, C)
        n = rows.normals[np.arange(len(V)), j]
        return _masked(V, V + depth[:, None] * n, inside)

    def _ctx_grad(self, V, C, R):
        rows, depth, j, inside = self._pick(V, C)
        K = np.arange(len(V))
        nobs = len(self.obstacle.b)
        out = np.zeros((len(V), 1))
        sup = rows.support[K, j]
        dR = rows.dR
        # obstacle rows: offset b_j + max_k(-n R b_k), so d/dtheta = -n dR b*
        ob = j < nobs
        if np.any(ob):
            n = rows.normals[K[ob], j[ob]]
            bstar = self.body.vertices[sup[ob]]
            dc = -np.einsum("ki,kij,kj->k", n, dR[ob], bstar)
            out[ob, 0] = depth[ob] * dc
        # body rows: n = -R m, offset max_i n o_i + d, so d/dtheta depth = dR m . (p - o*)
        br = ~ob
        if np.any(br):
            m = self.body.A[j[br] - nobs]
            ostar = self.obstacle.vertices[sup[br]]
            dn = np.einsum("kij,kj->ki", dR[br], m)
            out[br, 0] = depth[br] * np.einsum("ki,ki->k", dn, V[br] - ostar)
        out[~inside] = 0.0
        return out

    def to_dict(self):
        return {
            "kind": self.kind,
            "body": self.body.to_dict(),
            "polytope": self.obstacle.to_dict(),
            "buffer": self.buffer,
        }


@dataclass(frozen=True, eq=False)
class ReachPoint(Projector):
    target: np.ndarray
    kind = "reach_point"

    def __post_init__(self):
        t = np.asarray(self.target, dtype=float).reshape(-1)
        object.__setattr__(self, "target", t)
        object.__setattr__(self, "output_dim", len(t))

    def _condition(self, V, C):
        return np.any(V != self.target, axis=1)

    def _project(self, V, C):
        return np.broadcast_to(self.target, V.shape).copy()

    def to_dict(self):
        return {"kind": self.kind, "target": self.target.tolist()}


@dataclass(frozen=True, eq=False)
class ReachContact(Projector):
    """Touch the boundary of a polygon from either side."""

    target: ConvexPolytope
    kind = "reach_contact"

    def _project(self, V, C):
        return boundary_closest(self.target, V)[0]

    def _condition(self, V, C):
        return np.any(self._project(V, C) != V, axis=1)

    def to_dict(self):
        return {"kind": self.kind, "polytope": self.target.to_dict()}


@dataclass(frozen=True, eq=False)
class ReachInside(Projector):
    target: ConvexPolytope
    kind = "reach_inside"

    def _condition(self, V, C):
        return ~contains(self.target, V)

    def _project(self, V, C):
        return project_onto_polytope(self.target, V)

    def to_dict(self):
        return {"kind": self.kind, "polytope": self.target.to_dict()}


@dataclass(frozen=True, eq=False)
class ReachSegment(Projector):
    segment: Segment
    kind = "reach_segment"

    def _project(self, V, C):
        a, b = self.segment.a, self.segment.b
        d = b - a
        dd = float(d @ d)
        if dd == 0:
            return np.broadcast_to(a, V.shape).copy()
        h = np.clip((V - a) @ d / dd, 0.0, 1.0)
        return (1.0 - h)[:, None] * a + h[:, None] * b

    def _condition(self, V, C):
        return np.any(self._project(V, C) != V, axis=1)

    def to_dict(self):
        return {"kind": self.kind, "a": self.segment.a.tolist(), "b": self.segment.b.tolist()}


@dataclass(frozen=True, eq=False)
class ReachSdf(Projector):
    """Stay inside the sublevel set ``S(v) <= level``."""

    shape: SdfShape
    level: float = 0.0
    max_steps: int = 20
    kind = "reach_sdf"

    def _covered(self, V):
        cov = getattr(self.shape, "covers", None)
        return np.ones(len(V), bool) if cov is None else cov(V)

    def _condition(self, V, C):
        return np.atleast_1d(self.shape.value(V)) - self.level > 0

    def _project(self, V, C):
        return newton_to_level(self.shape, V, self.level, self._covered, self.max_steps, outward=False)

    def _v_grad(self, V, C, R):
        _, J, _ = newton_to_level(self.shape, V, self.level, self._covered, self.max_steps, False, track=True)
        return _chain_grad(J, R)

    def to_dict(self):
        return {"kind": self.kind, "sdf": getattr(self.shape, "kind", ""), "level": self.level}


@dataclass(frozen=True, eq=False)
class BoxLimit(Projector):
    lower: np.ndarray
    upper: np.ndarray
    kind = "box_limit"

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("box bounds must have equal length")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "output_dim", len(lo))

    def _condition(self, V, C):
        return np.any((V < self.lower) | (V > self.upper), axis=1)

    def _project(self, V, C):
        return np.clip(V, self.lower, self.upper)

    def to_dict(self):
        return {"kind": self.kind, "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True)
class BarrierSpec:
    """Safety margin ``gamma`` added along the outward normal while approaching.

    ``gamma`` is evaluated on the closing speed ``-ddot >= 0``:
    ``constant`` -> scale, ``linear`` -> scale * s, ``power`` -> scale * s**exponent.
    """

    gamma: str = "constant"
    scale: float = 0.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.gamma not in ("constant", "linear", "power"):
            raise ValueError(f"unknown gamma shape {self.gamma!r}")
        if self.scale < 0 or self.exponent <= 0:
            raise ValueError("gamma needs scale >= 0 and exponent > 0")

    def value(self, s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        if self.gamma == "constant":
            return np.full_like(s, self.scale)
        if self.gamma == "linear":
            return self.scale * s
        return self.scale * s**self.exponent

    def derivative(self, s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        if self.gamma == "constant":
            return np.zeros_like(s)
        if self.gamma == "linear":
            return np.full_like(s, self.scale)
        return self.scale * self.exponent * s ** (self.exponent - 1.0)


@dataclass(frozen=True, eq=False)
class BarrierWrapped(Projector):
    """Safety projector with an extra margin while the distance is shrinking.

    ``ctx`` is the task-space velocity. The distance rate is the velocity
    component along the outward normal of the inner projection; when it is
    negative the point is pushed to ``margin = gamma(-ddot)`` beyond the inner
    safe boundary.
    """

    inner: Projector
    spec: BarrierSpec = field(default_factory=BarrierSpec)
    kind = "barrier_wrapped"

    def __post_init__(self):
        object.__setattr__(self, "output_dim", self.inner.output_dim)
        object.__setattr__(self, "context_dim", self.inner.output_dim)
        object.__setattr__(self, "buffer", self.inner.buffer)

    def _geometry(self, V):
        """Signed distance to the inner safe boundary and the outward unit normal."""
        p = self.inner
        if isinstance(p, SafePolytope):
            s, j = p.facet_distance(V)
            return s, p.grown.A[j]
        if isinstance(p, SafeSdf):
            s = p._value(V) - p.buffer
            n = np.zeros_like(V)
            m = np.isfinite(s)
            if np.any(m):
                g = np.atleast_2d(p.shape.gradient(V[m]))
                n[m] = g / np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
            return s, n
        raise ValueError(f"barrier wrap does not support {p.kind}")

    def margin(self, V, C):
        s, n = self._geometry(V)
        ddot = np.einsum("ki,ki->k", n, C)
        m = np.where(ddot < 0, self.spec.value(-ddot), 0.0)
        return s, n, ddot, m

    def _condition(self, V, C):
        s, _, _, m = self.margin(V, C)
        return s < m

    def _project(self, V, C):
        s, n, _, m = self.margin(V, C)
        active = s < m
        if isinstance(self.inner, SafePolytope):
            out = V + (m - s)[:, None] * n
        else:
            out = V.copy()
            idx = np.flatnonzero(active)
            if len(idx):
                out[idx] = self._newton(V[idx], m[idx])
        return _masked(V, out, active)

    def _newton(self, V, m, track=False):
        p = self.inner
        return newton_to_level(p.shape, V, p.buffer + m, p._covered, p.max_steps, True, track)

    def _margin_grads(self, V, C):
        """Active rows plus ``dm/dv`` and ``dm/dctx`` of the margin ``m = gamma(-n.c)``."""
        s, n, ddot, m = self.margin(V, C)
        active = s < m
        closing = active & (ddot < 0)
        gp = np.where(closing, self.spec.derivative(-ddot), 0.0)
        dm_dc = -gp[:, None] * n
        dm_dv = np.zeros_like(V)
        if isinstance(self.inner, SafeSdf) and np.any(closing):
            k = np.flatnonzero(closing)
            g = np.atleast_2d(self.inner.shape.gradient(V[k]))
            H = self.inner.shape.hessian(V[k]).reshape(len(k), 2, 2)
            nk = n[k]
            # dn/dv = (I - n n^T) H / |g|, so (dn/dv)^T c = H (I - n n^T) c / |g|
            tc = C[k] - nk * np.einsum("ki,ki->k", nk, C[k])[:, None]
            dm_dv[k] = -gp[k, None] * np.einsum("kij,kj->ki", H, tc) / np.linalg.norm(g, axis=1, keepdims=True)
        return active, m, n, dm_dv, dm_dc

    def _level_sensitivity(self, V, m, active, n):
        """``(dP/dv at fixed margin, dP/dm)`` on the active rows."""
        J = np.repeat(np.eye(V.shape[1])[None], len(V), axis=0)
        q = n.copy()
        if isinstance(self.inner, SafeSdf):
            idx = np.flatnonzero(active)
            if len(idx):
                _, J[idx], q[idx] = self._newton(V[idx], m[idx], track=True)
        else:
            J -= np.einsum("ki,kj->kij", n, n)
        return J, q

    def _v_grad(self, V, C, R):
        active, m, n, dm_dv, _ = self._margin_grads(V, C)
        J, q = self._level_sensitivity(V, m, active, n)
        out = _chain_grad(J, R) - np.einsum("ki,ki->k", q, R)[:, None] * dm_dv
        return np.where(active[:, None], out, 0.0)

    def _ctx_grad(self, V, C, R):
        active, m, n, _, dm_dc = self._margin_grads(V, C)
        _, q = self._level_sensitivity(V, m, active, n)
        out = -np.einsum("ki,ki->k", q, R)[:, None] * dm_dc
        return np.where(active[:, None], out, 0.0)

    def to_dict(self):
        return {
            "kind": self.kind,
            "inner": self.inner.to_dict(),
            "gamma": self.spec.gamma,
            "scale": self.spec.scale,
            "exponent": self.spec.exponent,
        }


@dataclass(frozen=True, eq=False)
class ReachMinkowski(Projector):
    """Bring a rigid body (reference ``p``, heading ``ctx``) into contact with a target.

    The condition is the origin lying outside the Minkowski difference; the
    reference is then moved to the closest point of the configuration-space
    target region.
    """

    body: ConvexPolytope
    target: ConvexPolytope
    kind = "reach_minkowski"
    context_dim = 1

    def _solve(self, V, C):
        out = V.copy()
        grad = np.zeros((len(V), 1))
        inside = np.zeros(len(V), bool)
        for k, (p, th) in enumerate(zip(V, C[:, 0])):
            R, dR = _drot(th)
            body = ConvexPolytope(self.body.A @ R.T, self.body.b, self.body.vertices @ R.T)
            md = minkowski_diff(self.target, body)
            if contains(md.result, p):
                inside[k] = True
                continue
            q, j, h = boundary_closest(md.result, p)
            ia, ib = md.pairs[j, 1], md.pairs[(j + 1) % len(md.pairs), 1]
            bstar = (1.0 - h) * self.body.vertices[ia] + h * self.body.vertices[ib]
            out[k] = q
            grad[k, 0] = (p - q) @ (dR @ bstar)
        return out, grad, inside

    def _condition(self, V, C):
        return ~self._solve(V, C)[2]

    def _project(self, V, C):
        return self._solve(V, C)[0]

    def _ctx_grad(self, V, C, R):
        return self._solve(V, C)[1]

    def to_dict(self):
        return {"kind": self.kind, "body": self.body.to_dict(), "polytope": self.target.to_dict()}


def wrap_barrier(p: Projector, spec: BarrierSpec) -> BarrierWrapped:
    if p.kind not in ("safe_polytope", "safe_sdf"):
        raise ValueError(f"barrier wrap needs a point safety projector, got {p.kind}")
    return BarrierWrapped(p, spec)


def condition(p: Projector, v, ctx=None):
    return p.condition(v, ctx)


def project(p: Projector, v, ctx=None):
    return p.project(v, ctx)


def residual(p: Projector, v, ctx=None):
    return p.residual(v, ctx)
