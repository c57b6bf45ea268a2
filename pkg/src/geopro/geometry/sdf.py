"""Signed distance fields: an exact circle and a tensor-product cubic spline field."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError

# uniform cubic B-spline characteristic matrix, rows act on t = [1, s, s^2, s^3]
BSPLINE_M = np.array(
    [
        [1.0, 4.0, 1.0, 0.0],
        [-3.0, 0.0, 3.0, 0.0],
        [3.0, -6.0, 3.0, 0.0],
        [-1.0, 3.0, -3.0, 1.0],
    ]
) / 6.0


class SdfShape:
    kind: str = ""

    def value(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x) -> np.ndarray:
        """Second derivatives, ``(2, 2)`` or batched ``(K, 2, 2)``."""
        raise NotImplementedError

    def value_and_gradient(self, x):
        return self.value(x), self.gradient(x)


@dataclass(frozen=True, eq=False)
class CircleSdf(SdfShape):
    center: np.ndarray
    radius: float
    kind = "circle"

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ValueError("circle radius must be positive")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.center, axis=-1) - self.radius

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        d = x - self.center
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        # the centre has no unique direction; pick +x
        fallback = np.zeros_like(d)
        fallback[..., 0] = 1.0
        return np.where(r > 0, d / np.where(r > 0, r, 1.0), fallback)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        d = x - self.center
        r = np.linalg.norm(d, axis=-1)[..., None, None]
        safe = np.where(r > 0, r, 1.0)
        n = d[..., :, None] / safe
        H = (np.eye(2) - n * np.swapaxes(n, -1, -2)) / safe
        return np.where(r > 0, H, 0.0)


def _power_basis(s):
    return np.stack([np.ones_like(s), s, s * s, s * s * s], axis=-1)


def _power_basis_deriv(s):
    return np.stack([np.zeros_like(s), np.ones_like(s), 2 * s, 3 * s * s], axis=-1)


def _power_basis_deriv2(s):
    return np.stack([np.zeros_like(s), np.zeros_like(s), np.full_like(s, 2.0), 6 * s], axis=-1)


@dataclass(frozen=True, eq=False)
class SplineSdf(SdfShape):
    """Planar field ``t_x^T M Phi M^T t_y`` on a uniform grid of cubic spans.

    ``control`` has shape ``(nx + 3, ny + 3)`` for ``nx`` by ``ny`` spans over
    ``domain = (xmin, xmax, ymin, ymax)``.
    """

    domain: tuple
    control: np.ndarray
    kind = "spline"

    def __post_init__(self):
        ctrl = np.asarray(self.control, dtype=float)
        ctrl.setflags(write=False)
        object.__setattr__(self, "control", ctrl)
        object.__setattr__(self, "domain", tuple(float(v) for v in self.domain))
        if ctrl.ndim != 2 or min(ctrl.shape) < 4:
            raise ValueError("control grid must be at least 4 x 4")

    @property
    def spans(self):
        return self.control.shape[0] - 3, self.control.shape[1] - 3

    def covers(self, x) -> np.ndarray:
        """Rows of ``x`` that lie inside the spline domain."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x0, x1, y0, y1 = self.domain
        return (x[:, 0] >= x0) & (x[:, 0] <= x1) & (x[:, 1] >= y0) & (x[:, 1] <= y1)

    def _locate(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x0, x1, y0, y1 = self.domain
        eps = 1e-12
        if np.any(x[:, 0] < x0 - eps) or np.any(x[:, 0] > x1 + eps) or np.any(x[:, 1] < y0 - eps) or np.any(x[:, 1] > y1 + eps):
            raise DomainError(f"query outside spline domain {self.domain}")
        nx, ny = self.spans
        hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
        u = (x[:, 0] - x0) / hx
        v = (x[:, 1] - y0) / hy
        i = np.clip(np.floor(u).astype(int), 0, nx - 1)
        j = np.clip(np.floor(v).astype(int), 0, ny - 1)
        return u - i, v - j, i, j, hx, hy

    def _patches(self, i, j):
        off = np.arange(4)
        return self.control[(i[:, None] + off)[:, :, None], (j[:, None] + off)[:, None, :]]

    @staticmethod
    def basis_weights(s):
        """Per-span weights of the four active control values, ``t^T M``."""
        return _power_basis(s) @ BSPLINE_M

    def value(self, x):
        single = np.asarray(x).ndim == 1
        su, sv, i, j, _, _ = self._locate(x)
        wx = _power_basis(su) @ BSPLINE_M
        wy = _power_basis(sv) @ BSPLINE_M
        out = np.einsum("ka,kab,kb->k", wx, self._patches(i, j), wy)
        return out[0] if single else out

    def gradient(self, x):
        single = np.asarray(x).ndim == 1
        su, sv, i, j, hx, hy = self._locate(x)
        P = self._patches(i, j)
        wx, wy = _power_basis(su) @ BSPLINE_M, _power_basis(sv) @ BSPLINE_M
        dwx, dwy = _power_basis_deriv(su) @ BSPLINE_M / hx, _power_basis_deriv(sv) @ BSPLINE_M / hy
        gx = np.einsum("ka,kab,kb->k", dwx, P, wy)
        gy = np.einsum("ka,kab,kb->k", wx, P, dwy)
        g = np.stack([gx, gy], axis=1)
        return g[0] if single else g

    def hessian(self, x):
        single = np.asarray(x).ndim == 1
        su, sv, i, j, hx, hy = self._locate(x)
        P = self._patches(i, j)
        wx, wy = _power_basis(su) @ BSPLINE_M, _power_basis(sv) @ BSPLINE_M
        dwx, dwy = _power_basis_deriv(su) @ BSPLINE_M / hx, _power_basis_deriv(sv) @ BSPLINE_M / hy
        ddwx, ddwy = _power_basis_deriv2(su) @ BSPLINE_M / hx**2, _power_basis_deriv2(sv) @ BSPLINE_M / hy**2
        hxx = np.einsum("ka,kab,kb->k", ddwx, P, wy)
        hxy = np.einsum("ka,kab,kb->k", dwx, P, dwy)
        hyy = np.einsum("ka,kab,kb->k", wx, P, ddwy)
        H = np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)
        return H[0] if single else H

    @classmethod
    def fit(cls, field, domain, spans=(16, 16), samples=(81, 81)) -> "SplineSdf":
        """Least-squares fit of control values to ``field`` sampled on a grid."""
        x0, x1, y0, y1 = (float(v) for v in domain)
        nx, ny = spans
        gx = np.linspace(x0, x1, samples[0])
        gy = np.linspace(y0, y1, samples[1])
        X, Y = np.meshgrid(gx, gy, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        target = np.asarray(field(pts), dtype=float).reshape(-1)
        probe = cls(domain, np.zeros((nx + 3, ny + 3)))
        su, sv, i, j, _, _ = probe._locate(pts)
        wx = cls.basis_weights(su)
        wy = cls.basis_weights(sv)
        rows = np.repeat(np.arange(len(pts)), 16)
        off = np.arange(4)
        ci = (i[:, None, None] + off[None, :, None]) * (ny + 3) + (j[:, None, None] + off[None, None, :])
        vals = (wx[:, :, None] * wy[:, None, :]).reshape(-1)
        design = np.zeros((len(pts), (nx + 3) * (ny + 3)))
        np.add.at(design, (rows, ci.reshape(-1)), vals)
        coef, *_ = np.linalg.lstsq(design, target, rcond=None)
        return cls(domain, coef.reshape(nx + 3, ny + 3))


def point_in_polygon(points, polygon) -> np.ndarray:
    """Even-odd rule, works for non-convex outlines."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(polygon, dtype=float)
    b = np.roll(a, -1, axis=0)
    px, py = P[:, 0:1], P[:, 1:2]
    straddle = (a[None, :, 1] > py) != (b[None, :, 1] > py)
    dy = np.where(b[:, 1] == a[:, 1], 1.0, b[:, 1] - a[:, 1])
    xcross = a[None, :, 0] + (py - a[None, :, 1]) * (b[None, :, 0] - a[None, :, 0]) / dy[None]
    return np.count_nonzero(straddle & (px < xcross), axis=1) % 2 == 1


def sampled_boundary_field(boundary, inside):
    """Signed distance to a densely sampled closed curve.

    ``boundary`` is an (m, 2) polyline (closed implicitly); ``inside(points)``
    returns a boolean mask. Used as ground truth when fitting spline fields.
    """
    bnd = np.asarray(boundary, dtype=float)
    starts, ends = bnd, np.roll(bnd, -1, axis=0)
    d = ends - starts
    dd = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)

    def field(points):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(len(P))
        for lo in range(0, len(P), 512):
            chunk = P[lo : lo + 512]
            h = np.clip(np.einsum("kmj,mj->km", chunk[:, None, :] - starts[None], d) / dd, 0.0, 1.0)
            foot = starts[None] + h[..., None] * d[None]
            out[lo : lo + 512] = np.min(np.linalg.norm(foot - chunk[:, None, :], axis=2), axis=1)
        return np.where(inside(P), -out, out)

    return field


def ellipse_field(center, semi_axes, angle=0.0, n=720):
    a, b = semi_axes
    c, s = np.cos(angle), np.sin(angle)
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    local = np.stack([a * np.cos(t), b * np.sin(t)], axis=1)
    rot = np.array([[c, -s], [s, c]])
    boundary = local @ rot.T + np.asarray(center, float)

    def inside(P):
        q = (P - np.asarray(center, float)) @ rot
        return (q[:, 0] / a) ** 2 + (q[:, 1] / b) ** 2 <= 1.0

    return sampled_boundary_field(boundary, inside)


def heart_field(center, size, n=720):
    """Classic parametric heart curve scaled to roughly ``size`` across."""
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    x = 16 * np.sin(t) ** 3
    y = 13 * np.cos(t) - 5 * np.cos(2 * t) - 2 * np.cos(3 * t) - np.cos(4 * t)
    scale = size / 32.0
    boundary = np.stack([x, y], axis=1) * scale + np.asarray(center, float)
    return sampled_boundary_field(boundary, lambda P: point_in_polygon(P, boundary))


def signed_distance(shape: SdfShape, x):
    return shape.value(x)


def sdf_gradient(shape: SdfShape, x):
    return shape.gradient(x)
