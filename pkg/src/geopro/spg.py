"""Spectral projected gradient with a non-monotone (GLL) line search."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import ConvexPolytope, project_onto_polytope


@dataclass
class SpgConfig:
    max_iters: int = 200
    gamma_min: float = 1e-10
    gamma_max: float = 1e10
    nonmonotone_memory: int = 10
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    step_tolerance: float = 1e-8
    initial_gamma: float = 1.0
    variant: str = "bb1"
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0 < self.gamma_min < self.gamma_max:
            raise ValueError("need 0 < gamma_min < gamma_max")
        if self.nonmonotone_memory < 1:
            raise ValueError("nonmonotone_memory must be >= 1")
        if not 0 < self.armijo_c1 < 1 or not 0 < self.backtrack_factor < 1:
            raise ValueError("armijo_c1 and backtrack_factor must lie in (0, 1)")
        if self.variant not in ("bb1", "bb2"):
            raise ValueError("variant must be 'bb1' or 'bb2'")


@dataclass
class SpgState:
    x: np.ndarray
    f: float
    grad: np.ndarray
    gamma: float
    f_history: deque
    prev_x: np.ndarray | None = None
    prev_grad: np.ndarray | None = None
    alpha: float = 1.0
    direction: np.ndarray | None = None


@dataclass
class SpgReport:
    x: np.ndarray
    f: float
    iterations: int
    n_f: int
    n_grad: int
    status: str
    step_norm: float
    gammas: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def spectral_step(s, y, variant="bb1", gamma_min=1e-10, gamma_max=1e10) -> float:
    """Barzilai-Borwein steplength with curvature fallback and clamping."""
    s = np.ravel(s)
    y = np.ravel(y)
    sy = float(s @ y)
    if sy <= 0:
        return gamma_max
    if variant == "bb1":
        g = float(s @ s) / sy
    elif variant == "bb2":
        yy = float(y @ y)
        if yy == 0:
            return gamma_max
        g = sy / yy
    else:
        raise ValueError(f"unknown spectral variant {variant!r}")
    return float(np.clip(g, gamma_min, gamma_max))


def _next_gamma(s, y, cfg: SpgConfig) -> float:
    if cfg.variant == "bb2":
        return spectral_step(s, y, "bb2", cfg.gamma_min, cfg.gamma_max)
    sy = float(np.vdot(s, y))
    if sy <= 0:
        return cfg.gamma_max
    bb1 = float(np.vdot(s, s)) / sy
    if bb1 > cfg.gamma_max:
        return spectral_step(s, y, "bb2", cfg.gamma_min, cfg.gamma_max)
    return float(np.clip(bb1, cfg.gamma_min, cfg.gamma_max))


def spg_minimize(objective, gradient, project, x0, cfg: SpgConfig | None = None, callback=None):
    """Minimize ``objective`` over the set defined by ``project``.

    ``callback(state)`` is called after every accepted step and may be used to
    monitor invariants. Returns ``(x, SpgReport)``; ``x`` is always feasible.
    """
    cfg = cfg or SpgConfig()
    x = project(np.array(x0, dtype=float))
    f = float(objective(x))
    if not np.isfinite(f):
        raise FloatingPointError("objective is not finite at the projected start point")
    g = gradient(x)
    n_f, n_g = 1, 1
    state = SpgState(x, f, g, float(np.clip(cfg.initial_gamma, cfg.gamma_min, cfg.gamma_max)),
                     deque([f], maxlen=cfg.nonmonotone_memory))
    gammas = [state.gamma]
    status, it, dnorm = "max_iters", 0, np.inf
    while it < cfg.max_iters:
        d = project(state.x - state.gamma * state.grad) - state.x
        dnorm = float(np.max(np.abs(d))) if d.size else 0.0
        if dnorm <= cfg.step_tolerance:
            status = "converged"
            break
        gd = float(np.vdot(state.grad, d))
        fmax = max(state.f_history)
        alpha = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks):
            trial = project(state.x + alpha * d)
            ft = float(objective(trial))
            n_f += 1
            if np.isfinite(ft) and ft <= fmax + cfg.armijo_c1 * alpha * gd:
                accepted = True
                break
            alpha *= cfg.backtrack_factor
        if not accepted:
            status = "stalled"
            break
        g_new = gradient(trial)
        n_g += 1
        s = trial - state.x
        y = g_new - state.grad
        state.prev_x, state.prev_grad = state.x, state.grad
        state.x, state.grad, state.f = trial, g_new, ft
        state.alpha, state.direction = alpha, d
        state.f_history.append(ft)
        state.gamma = _next_gamma(s, y, cfg)
        gammas.append(state.gamma)
        it += 1
        if callback is not None:
            callback(state)
    return state.x, SpgReport(state.x, state.f, it, n_f, n_g, status, dnorm, gammas)


@dataclass(frozen=True)
class Disc:
    center: np.ndarray
    radius: float

    def project(self, p):
        c = np.asarray(self.center, dtype=float)
        d = np.asarray(p, dtype=float) - c
        r = float(np.linalg.norm(d))
        return c + d * (self.radius / r) if r > self.radius else np.asarray(p, dtype=float).copy()


def _region_projector(region):
    if isinstance(region, ConvexPolytope):
        return lambda p: project_onto_polytope(region, p)
    if isinstance(region, Disc):
        return region.project
    raise TypeError("regions must be ConvexPolytope or Disc")


def _safe_unit(d):
    n = np.linalg.norm(d)
    return d / n if n > 0 else np.zeros_like(d)


def location_objective(P) -> float:
    P = np.asarray(P).reshape(3, 2)
    return float(np.linalg.norm(P[0] - P[1]) + np.linalg.norm(P[1] - P[2]))


def solve_location_problem(regions, cfg: SpgConfig | None = None, x0=None):
    """Shortest path ``p1 -> p2 -> p3`` with ``p_i`` in ``regions[i]``; returns ``(P, report)``."""
    if len(regions) != 3:
        raise ValueError("the location problem needs exactly three regions")
    projs = [_region_projector(r) for r in regions]

    def project(P):
        P = P.reshape(3, 2)
        return np.stack([projs[i](P[i]) for i in range(3)])

    def grad(P):
        P = P.reshape(3, 2)
        e1 = _safe_unit(P[0] - P[1])
        e2 = _safe_unit(P[1] - P[2])
        return np.stack([e1, -e1 + e2, -e2])

    if x0 is None:
        x0 = np.stack([np.asarray(getattr(r, "center", None) if isinstance(r, Disc) else r.centroid) for r in regions])
    P, rep = spg_minimize(location_objective, grad, project, np.asarray(x0, float).reshape(3, 2), cfg)
    return P, rep
