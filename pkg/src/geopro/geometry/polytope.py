"""Planar convex polytopes, segments and the Euclidean projections built on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def convex_hull(points) -> tuple[np.ndarray, np.ndarray]:
    """Andrew's monotone chain.

    Returns the counterclockwise hull vertices and their indices into
    ``points``. Collinear boundary points are dropped.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("convex_hull expects an (n, 2) array")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    if len(order) < 3:
        return pts[order].copy(), order

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def half(idx):
        chain: list[int] = []
        for i in idx:
            while len(chain) >= 2 and cross(pts[chain[-2]], pts[chain[-1]], pts[i]) <= 1e-14:
                chain.pop()
            chain.append(int(i))
        return chain

    lower = half(order)
    upper = half(order[::-1])
    hull = np.array(lower[:-1] + upper[:-1], dtype=int)
    return pts[hull].copy(), hull


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _halfspaces_from_ccw(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    e = np.roll(v, -1, axis=0) - v
    n = np.stack([e[:, 1], -e[:, 0]], axis=1)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    return n, np.einsum("ij,ij->i", n, v)


def _vertices_from_halfspaces(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    m = len(b)
    cand = []
    for i in range(m):
        for j in range(i + 1, m):
            M = A[[i, j]]
            det = np.linalg.det(M)
            if abs(det) < 1e-12:
                continue
            cand.append(np.linalg.solve(M, b[[i, j]]))
    if not cand:
        raise ValueError("half-spaces do not define a bounded polygon")
    cand = np.array(cand)
    scale = max(1.0, float(np.max(np.abs(b))))
    ok = np.all(cand @ A.T <= b + 1e-9 * scale, axis=1)
    if ok.sum() < 3:
        raise ValueError("half-spaces define an empty or degenerate polygon")
    hull, _ = convex_hull(cand[ok])
    if len(hull) < 3:
        raise ValueError("half-spaces define a degenerate polygon")
    return hull


@dataclass(frozen=True, eq=False)
class ConvexPolytope:
    """A 2-D convex polygon held in both H- and V-representation.

    Rows of ``A`` are unit normals, so ``b`` offsets and penetration depths are
    metric. ``vertices`` run counterclockwise. Build instances through the
    ``from_*`` constructors, which keep the two representations consistent.
    """

    A: np.ndarray
    b: np.ndarray
    vertices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen(self.A))
        object.__setattr__(self, "b", _frozen(self.b))
        object.__setattr__(self, "vertices", _frozen(self.vertices))

    @classmethod
    def from_vertices(cls, vertices) -> "ConvexPolytope":
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("need at least three 2-D vertices")
        if _signed_area(v) < 0:
            v = v[::-1]
        if abs(_signed_area(v)) < 1e-14:
            raise ValueError("vertices are collinear")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.any(cross < -1e-12):
            raise ValueError("vertex list is not convex; use from_points for a hull")
        keep = np.linalg.norm(e, axis=1) > 1e-14
        v = v[keep]
        # drop vertices interior to a straight edge
        e = np.roll(v, -1, axis=0) - v
        prev = np.roll(e, 1, axis=0)
        turn = prev[:, 0] * e[:, 1] - prev[:, 1] * e[:, 0]
        v = v[np.abs(turn) > 1e-14]
        A, b = _halfspaces_from_ccw(v)
        return cls(A, b, v)

    @classmethod
    def from_points(cls, points) -> "ConvexPolytope":
        """Convex hull of an arbitrary point set (non-convex outlines are convexified)."""
        hull, _ = convex_hull(points)
        return cls.from_vertices(hull)

    @classmethod
    def from_halfspaces(cls, A, b) -> "ConvexPolytope":
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[1] != 2 or len(A) != len(b):
            raise ValueError("A must be (m, 2) and b of length m")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms <= 0):
            raise ValueError("half-space normals must be non-zero")
        A = A / norms[:, None]
        b = b / norms
        v = _vertices_from_halfspaces(A, b)
        # keep only rows that support the polygon (drop redundant ones)
        slack = b[:, None] - A @ v.T
        support = np.sum(np.abs(slack) <= 1e-9 * max(1.0, float(np.max(np.abs(b)))), axis=1) >= 2
        return cls(A[support], b[support], v)

    @classmethod
    def box(cls, lower, upper) -> "ConvexPolytope":
        (lx, ly), (hx, hy) = lower, upper
        if not (hx > lx and hy > ly):
            raise ValueError("box upper corner must exceed lower corner")
        return cls.from_vertices([(hx, ly), (hx, hy), (lx, hy), (lx, ly)])

    @classmethod
    def regular(cls, center, inradius: float, n_sides: int, rotation_angle: float = 0.0) -> "ConvexPolytope":
        """Regular polygon with the given inscribed-circle radius."""
        if n_sides < 3 or inradius <= 0:
            raise ValueError("need n_sides >= 3 and inradius > 0")
        circ = inradius / np.cos(np.pi / n_sides)
        ang = rotation_angle + np.pi / n_sides + 2 * np.pi * np.arange(n_sides) / n_sides
        pts = np.asarray(center, float) + circ * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return cls.from_vertices(pts)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def edges(self) -> np.ndarray:
        """(n_edges, 2, 2) array of (start, end) vertex pairs, counterclockwise."""
        v = self.vertices
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def transform(self, pose) -> "ConvexPolytope":
        """Rigid transform by an SE(2) pose ``(x, y, theta)``."""
        x, y, th = pose
        v = self.vertices @ rotation(th).T + np.array([x, y])
        return ConvexPolytope.from_vertices(v)

    def translate(self, offset) -> "ConvexPolytope":
        off = np.asarray(offset, float)
        return ConvexPolytope(self.A, self.b + self.A @ off, self.vertices + off)

    def contains(self, x) -> bool:
        return contains(self, x)

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist()}


@dataclass(frozen=True)
class Segment:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a))
        object.__setattr__(self, "b", _frozen(self.b))


def _check_dim(poly: ConvexPolytope, x: np.ndarray):
    if x.shape[-1] != poly.dim:
        raise ValueError(f"point dimension {x.shape[-1]} does not match polytope dimension {poly.dim}")


def contains(poly: ConvexPolytope, x) -> bool | np.ndarray:
    """``A x <= b`` componentwise, with no tolerance. Accepts (n,) or (k, n)."""
    x = np.asarray(x, dtype=float)
    _check_dim(poly, x)
    return np.all(x @ poly.A.T <= poly.b, axis=-1)


def project_hyperplane(a, b: float, x) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    nn = float(a @ a)
    if nn <= 0:
        raise ValueError("hyperplane normal must be non-zero")
    return x - np.multiply.outer((x @ a - b) / nn, a)


def penetration(poly: ConvexPolytope, x) -> tuple[np.ndarray, np.ndarray]:
    """Minimal facet depth ``b_j - a_j x`` and its facet index (lowest index on ties)."""
    x = np.asarray(x, dtype=float)
    slack = poly.b - x @ poly.A.T
    j = np.argmin(slack, axis=-1)
    return np.take_along_axis(slack, np.expand_dims(j, -1), -1)[..., 0], j


def project_out_of_polytope(poly: ConvexPolytope, x) -> np.ndarray:
    """Push an interior point onto the facet plane of least penetration.

    Points outside are returned unchanged.
    """
    x = np.asarray(x, dtype=float)
    _check_dim(poly, x)
    depth, j = penetration(poly, x)
    inside = np.all(x @ poly.A.T <= poly.b, axis=-1)
    moved = x + poly.A[j] * np.expand_dims(depth, -1)
    if x.ndim == 1:
        return moved if inside else x.copy()
    return np.where(inside[:, None], moved, x)


def project_segment(seg: Segment, x) -> tuple[np.ndarray, float]:
    x = np.asarray(x, dtype=float)
    d = seg.b - seg.a
    dd = float(d @ d)
    if dd == 0.0:
        return seg.a.copy(), 0.0
    h = float(np.clip((x - seg.a) @ d / dd, 0.0, 1.0))
    return (1.0 - h) * seg.a + h * seg.b, h


def _segments_closest(starts, ends, x):
    """Closest points of (k, n) query points on each of m segments -> (k, m, n), h (k, m)."""
    d = ends - starts
    dd = np.einsum("ij,ij->i", d, d)
    safe = np.where(dd > 0, dd, 1.0)
    h = np.einsum("kmj,mj->km", x[:, None, :] - starts[None], d) / safe
    h = np.where(dd > 0, np.clip(h, 0.0, 1.0), 0.0)
    pts = (1.0 - h)[..., None] * starts[None] + h[..., None] * ends[None]
    return pts, h


def boundary_closest(poly: ConvexPolytope, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closest boundary points, the edge index used and the edge parameter ``h``."""
    if len(poly.vertices) < 3:
        raise ValueError("boundary projection needs a polygon with at least three vertices")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    _check_dim(poly, X)
    starts = poly.vertices
    ends = np.roll(poly.vertices, -1, axis=0)
    pts, h = _segments_closest(starts, ends, X)
    dist = np.linalg.norm(pts - X[:, None, :], axis=2)
    j = np.argmin(dist, axis=1)
    rows = np.arange(len(X))
    out, hj = pts[rows, j], h[rows, j]
    if single:
        return out[0], j[0], hj[0]
    return out, j, hj


def project_onto_polytope_boundary(poly: ConvexPolytope, x) -> np.ndarray:
    return boundary_closest(poly, x)[0]


def project_onto_polytope(poly: ConvexPolytope, x) -> np.ndarray:
    """Euclidean projection onto the (solid) polygon."""
    x = np.asarray(x, dtype=float)
    on_boundary = project_onto_polytope_boundary(poly, x)
    inside = contains(poly, x)
    if x.ndim == 1:
        return x.copy() if inside else on_boundary
    return np.where(inside[:, None], x, on_boundary)


def signed_distance_polytope(poly: ConvexPolytope, x) -> np.ndarray:
    """Euclidean signed distance to the polygon (negative inside)."""
    x = np.asarray(x, dtype=float)
    q = project_onto_polytope_boundary(poly, x)
    d = np.linalg.norm(np.atleast_2d(x) - np.atleast_2d(q), axis=1)
    s = np.where(np.atleast_1d(contains(poly, x)), -d, d)
    return s[0] if x.ndim == 1 else s


def inflate(poly: ConvexPolytope, buffer: float) -> ConvexPolytope:
    """Offset every facet outward by ``buffer`` (corners stay sharp)."""
    if buffer < 0:
        raise ValueError("buffer must be non-negative")
    if buffer == 0:
        return poly
    return ConvexPolytope.from_halfspaces(poly.A, poly.b + buffer)
