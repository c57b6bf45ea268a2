"""Independent reference implementations used to check the library.

Nothing here imports geopro; every oracle is a deliberately simple (and slow)
construction of the quantity under test.
"""

from __future__ import annotations

import numpy as np


# ------------------------------------------------------------------ polygons


def random_convex_polygon(rng, n_min=3, n_max=9, scale=1.0):
    """Counterclockwise hull of random points on a jittered circle."""
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
        rad = scale * rng.uniform(0.5, 1.5)
        pts = rad * np.stack([np.cos(ang), np.sin(ang)], axis=1) * rng.uniform(0.6, 1.4, (1, 2))
        pts = pts + rng.uniform(-scale, scale, 2)
        hull = monotone_chain(pts)
        if len(hull) >= 3 and polygon_area(hull) > 1e-3 * scale**2:
            return hull


def monotone_chain(points):
    pts = sorted(map(tuple, np.asarray(points, float)))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def polygon_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def inside_polygon(v, x) -> bool:
    """Ray casting, independent of half-space arithmetic."""
    x0, y0 = float(x[0]), float(x[1])
    inside = False
    n = len(v)
    for i in range(n):
        (xa, ya), (xb, yb) = v[i], v[(i + 1) % n]
        if (ya > y0) != (yb > y0):
            xc = xa + (y0 - ya) * (xb - xa) / (yb - ya)
            if xc > x0:
                inside = not inside
    return inside


def sampled_boundary(v, n=10_000):
    """``n`` points spread evenly by arc length over the polygon boundary."""
    e = np.roll(v, -1, axis=0) - v
    lengths = np.linalg.norm(e, axis=1)
    s = np.linspace(0.0, lengths.sum(), n, endpoint=False)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    idx = np.minimum(np.searchsorted(cum, s, side="right") - 1, len(v) - 1)
    t = (s - cum[idx]) / lengths[idx]
    return v[idx] + t[:, None] * e[idx]


def sampled_boundary_distance(v, x, n=10_000):
    pts = sampled_boundary(v, n)
    return float(np.min(np.linalg.norm(pts - np.asarray(x, float), axis=1)))


def point_segment_distance(x, a, b):
    x, a, b = (np.asarray(z, float) for z in (x, a, b))
    d = b - a
    t = np.clip((x - a) @ d / (d @ d), 0.0, 1.0)
    return float(np.linalg.norm(x - a - t * d))


def exact_boundary_distance(v, x):
    return min(point_segment_distance(x, v[i], v[(i + 1) % len(v)]) for i in range(len(v)))


def sat_intersect(p, q) -> bool:
    """Separating-axis test over the edge normals of both polygons (touching counts as overlap)."""
    for poly in (p, q):
        e = np.roll(poly, -1, axis=0) - poly
        for nx, ny in zip(e[:, 1], -e[:, 0]):
            a = np.array([nx, ny])
            pa, qa = p @ a, q @ a
            if pa.max() < qa.min() or qa.max() < pa.min():
                return False
    return True


# ------------------------------------------------------------- linear maps


def dense_rollout_matrices(A, B):
    """Stacked ``x_{1..N} = calA x_0 + calB u`` for time-varying ``A_k, B_k``."""
    N, n, m = B.shape
    calA = np.zeros((N * n, n))
    calB = np.zeros((N * n, N * m))
    phi = np.eye(n)
    for k in range(N):
        phi = A[k] @ phi
        calA[k * n:(k + 1) * n] = phi
        for j in range(k + 1):
            blk = B[j]
            for i in range(j + 1, k + 1):
                blk = A[i] @ blk
            calB[k * n:(k + 1) * n, j * m:(j + 1) * m] = blk
    return calA, calB


def discretize_linear(Ac, Bc, dt, integrator):
    """Exact one-step matrices of Euler or classical RK4 applied to ``x' = Ac x + Bc u``."""
    n = len(Ac)
    M = dt * Ac
    if integrator == "euler":
        return np.eye(n) + M, dt * Bc
    M2 = M @ M
    M3 = M2 @ M
    Ad = np.eye(n) + M + M2 / 2 + M3 / 6 + M3 @ M / 24
    Bd = dt * (np.eye(n) + M / 2 + M2 / 6 + M3 / 24) @ Bc
    return Ad, Bd


# ---------------------------------------------------------------- optimization


def projected_gradient_box(Q, c, lo, hi, iters=100_000):
    """Fixed step ``1/L`` projected gradient on batched box QPs ``0.5 x'Qx + c'x``.

    ``Q`` is (P, n, n); returns the final iterates (P, n).
    """
    L = np.linalg.eigvalsh(Q)[:, -1]
    step = (1.0 / L)[:, None]
    x = np.clip(np.zeros_like(c), lo, hi)
    for _ in range(iters):
        g = np.einsum("pij,pj->pi", Q, x) + c
        x = np.clip(x - step * g, lo, hi)
    return x


def region_distance(region, p):
    """Distance from ``p`` to a region given as ("disc", center, radius) or ("poly", vertices)."""
    if region[0] == "disc":
        return max(0.0, float(np.linalg.norm(np.asarray(p) - region[1])) - region[2])
    v = region[1]
    return 0.0 if inside_polygon(v, p) else exact_boundary_distance(v, p)


def location_grid_search(regions, levels=3, res=1e-3, points=41):
    """Minimize ``d(p2, R1) + d(p2, R3)`` over ``p2`` in ``R2`` on refining grids.

    Fixing the middle point, the best end points are the nearest points of the
    outer regions, so the six-dimensional problem reduces to a 2-D search.
    """
    r1, r2, r3 = regions
    if r2[0] == "disc":
        lo, hi = r2[1] - r2[2], r2[1] + r2[2]
    else:
        lo, hi = r2[1].min(axis=0), r2[1].max(axis=0)

    def f(p):
        if region_distance(r2, p) > 0:
            return np.inf
        return region_distance(r1, p) + region_distance(r3, p)

    best, best_p = np.inf, None
    cells = [(lo, hi)]
    span = hi - lo
    for _ in range(levels):
        cand = []
        for a, b in cells:
            for x in np.linspace(a[0], b[0], points):
                for y in np.linspace(a[1], b[1], points):
                    val = f((x, y))
                    cand.append((val, (x, y)))
        cand.sort(key=lambda t: t[0])
        if cand[0][0] < best:
            best, best_p = cand[0]
        span = span / (points - 1) * 4
        cells = [(np.asarray(p) - span / 2, np.asarray(p) + span / 2) for _, p in cand[:3]]
        if np.max(span) < res:
            break
    return best, np.asarray(best_p)


def boundary_point(v, s):
    """Boundary point at arc length ``s`` (wrapped) from the first vertex."""
    e = np.roll(v, -1, axis=0) - v
    lengths = np.linalg.norm(e, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = s % cum[-1]
    k = min(int(np.searchsorted(cum, s, side="right") - 1), len(v) - 1)
    return v[k] + (s - cum[k]) / lengths[k] * e[k]


def sampled_boundary_argmin(v, x, step=1e-3, refine=80):
    """Closest boundary point by arc-length sampling at ``step``, refined by golden sections.

    The coarse pass picks the best sample; golden-section search over the arc
    length interval of its two neighbours then refines it. Each edge piece is
    convex in arc length, so the search is run separately on both sides of any
    vertex inside the interval.
    """
    x = np.asarray(x, float)
    lengths = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
    per = float(lengths.sum())
    n = max(int(np.ceil(per / step)), 16)
    pts = sampled_boundary(v, n)
    k = int(np.argmin(np.linalg.norm(pts - x, axis=1)))
    h = per / n
    lo, hi = (k - 1) * h, (k + 1) * h
    cuts = [c for c in np.concatenate([[0.0], np.cumsum(lengths)]) for c in (c - per, c, c + per) if lo < c < hi]
    bounds = [lo] + sorted(cuts) + [hi]
    best = pts[k]

    def dist(t):
        return np.linalg.norm(boundary_point(v, t) - x)

    g = (np.sqrt(5) - 1) / 2
    for a, b in zip(bounds[:-1], bounds[1:]):
        for _ in range(refine):
            m1, m2 = b - g * (b - a), a + g * (b - a)
            if dist(m1) < dist(m2):
                b = m2
            else:
                a = m1
        cand = boundary_point(v, 0.5 * (a + b))
        if np.linalg.norm(cand - x) < np.linalg.norm(best - x):
            best = cand
    return best


def sat_min_translation(p, q) -> float:
    """Smallest overlap over all edge-normal axes: the minimal translation separating two convex polygons."""
    best = np.inf
    for poly in (p, q):
        e = np.roll(poly, -1, axis=0) - poly
        for ex, ey in e:
            a = np.array([ey, -ex]) / np.hypot(ex, ey)
            pa, qa = p @ a, q @ a
            best = min(best, min(pa.max() - qa.min(), qa.max() - pa.min()))
    return float(best)


def polygon_distance(p, q) -> float:
    """Closest distance between two disjoint polygons by brute force over vertex-edge pairs."""
    best = np.inf
    for a, b in ((p, q), (q, p)):
        for x in a:
            best = min(best, exact_boundary_distance(b, x))
    return float(best)
