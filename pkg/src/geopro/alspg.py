"""Augmented-Lagrangian outer loop over single-shooting controls with an SPG inner solver.

The decision variable is the input sequence ``u`` of shape ``(N, n_u)``.
States come from the nonlinear rollout ``x = phi(u)``. Every constraint
binding ``i`` contributes ``rho_i / 2 * ||z - P(z)||^2`` with the shifted task
value ``z = g_i + lambda_i / rho_i``; its gradient is pulled back through the
adjoint recursion of the rollout.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .bindings import ConstraintBinding
from .dynamics import SystemModel, apply_B_transpose, linearize, rollout
from .errors import NumericError
from .spg import SpgConfig, spg_minimize

log = logging.getLogger(__name__)


def _as_matrix(w, n):
    if w is None:
        return np.zeros((n, n))
    w = np.asarray(w, dtype=float)
    if w.ndim == 0:
        return float(w) * np.eye(n)
    if w.ndim == 1:
        return np.diag(w)
    return w


@dataclass
class CostSpec:
    """``sum_k (u_k-u_ref)^T R (u_k-u_ref) + sum_{k>=1} (x_k-x_ref)^T Q (x_k-x_ref)`` plus extras.

    Weights accept a scalar, a diagonal vector or a full matrix. ``Qf`` adds a
    terminal term on ``x_N`` and ``rate`` penalizes ``u_k - u_{k-1}``.
    """

    R: object = 1.0
    Q: object = None
    x_ref: object = None
    Qf: object = None
    xf_ref: object = None
    u_ref: object = None
    rate: object = None

    def resolve(self, n_x, n_u):
        return _ResolvedCost(
            _as_matrix(self.R, n_u),
            _as_matrix(self.Q, n_x),
            np.zeros(n_x) if self.x_ref is None else np.asarray(self.x_ref, float),
            _as_matrix(self.Qf, n_x),
            None if self.xf_ref is None else np.asarray(self.xf_ref, float),
            np.zeros(n_u) if self.u_ref is None else np.asarray(self.u_ref, float),
            _as_matrix(self.rate, n_u),
        )


@dataclass
class _ResolvedCost:
    R: np.ndarray
    Q: np.ndarray
    x_ref: np.ndarray
    Qf: np.ndarray
    xf_ref: np.ndarray | None
    u_ref: np.ndarray
    W: np.ndarray

    def value(self, X, U):
        du = U - self.u_ref
        dx = X[1:] - self.x_ref
        c = np.einsum("ki,ij,kj->", du, self.R, du) + np.einsum("ki,ij,kj->", dx, self.Q, dx)
        ef = X[-1] - (self.x_ref if self.xf_ref is None else self.xf_ref)
        c += ef @ self.Qf @ ef
        if len(U) > 1:
            dr = np.diff(U, axis=0)
            c += np.einsum("ki,ij,kj->", dr, self.W, dr)
        return float(c)

    def gradients(self, X, U):
        """``(J_x for x_1..x_N, J_u)``."""
        du = U - self.u_ref
        dx = X[1:] - self.x_ref
        Jx = dx @ (self.Q + self.Q.T)
        ef = X[-1] - (self.x_ref if self.xf_ref is None else self.xf_ref)
        Jx[-1] += (self.Qf + self.Qf.T) @ ef
        Ju = du @ (self.R + self.R.T)
        if len(U) > 1:
            dr = np.diff(U, axis=0) @ (self.W + self.W.T)
            Ju[1:] += dr
            Ju[:-1] -= dr
        return Jx, Ju


@dataclass
class ProblemSpec:
    model: SystemModel
    x0: np.ndarray
    N: int
    cost: CostSpec = field(default_factory=CostSpec)
    constraints: list = field(default_factory=list)
    input_lower: object = None
    input_upper: object = None

    def __post_init__(self):
        if int(self.N) < 1:
            raise ValueError("horizon N must be >= 1")
        self.N = int(self.N)
        self.x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if len(self.x0) != self.model.n_x:
            raise ValueError("x0 dimension does not match the model")
        nu = self.model.n_u
        self.input_lower = np.full(nu, -np.inf) if self.input_lower is None else np.broadcast_to(
            np.asarray(self.input_lower, float), (nu,)).copy()
        self.input_upper = np.full(nu, np.inf) if self.input_upper is None else np.broadcast_to(
            np.asarray(self.input_upper, float), (nu,)).copy()
        if np.any(self.input_lower > self.input_upper):
            raise ValueError("input box lower bound exceeds upper bound")
        R = self.cost.resolve(self.model.n_x, nu).R
        if np.min(np.linalg.eigvalsh(0.5 * (R + R.T))) < -1e-12:
            raise ValueError("input weight R must be positive semidefinite")
        for b in self.constraints:
            if not isinstance(b, ConstraintBinding):
                raise TypeError("constraints must be ConstraintBinding objects")
            b.active_steps(self.N)
        self._cost = self.cost.resolve(self.model.n_x, nu)
        self._rows = [b.rows(self.N) for b in self.constraints]

    def project_inputs(self, u):
        return np.clip(u, self.input_lower, self.input_upper)

    def zero_multipliers(self):
        return [np.zeros((self.N, b.dim)) for b in self.constraints]


@dataclass
class AlspgConfig:
    rho0: float = 0.1
    beta: float = 5.0
    max_outer: int = 20
    eps_tol: float = 1e-4
    rho_max: float = 1e8
    penalty_decrease_ratio: float = 1.0
    inner: SpgConfig = field(default_factory=SpgConfig)
    early_inner_tol: float = 1e-6
    early_outer: int = 2

    def __post_init__(self):
        if not self.rho0 > 0 or not self.beta > 1:
            raise ValueError("need rho0 > 0 and beta > 1")
        if isinstance(self.inner, dict):
            self.inner = SpgConfig(**self.inner)


@dataclass
class AlspgState:
    u: np.ndarray
    lambdas: list
    rhos: np.ndarray
    v_norm_history: list = field(default_factory=list)
    v_constraint_history: list = field(default_factory=list)
    rho_history: list = field(default_factory=list)
    lambda_history: list = field(default_factory=list)
    outer_iter: int = 0


@dataclass
class SolveReport:
    converged: bool
    outer_iters: int
    inner_iters_total: int
    final_v_norm: float
    objective: float
    solve_time: float
    states: np.ndarray
    inputs: np.ndarray
    status: str = ""
    residuals: list = field(default_factory=list)
    constraint_names: list = field(default_factory=list)
    state: AlspgState | None = None
    inner_statuses: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "converged": bool(self.converged),
            "outer_iters": int(self.outer_iters),
            "inner_iters_total": int(self.inner_iters_total),
            "final_v_norm": float(self.final_v_norm),
            "objective": float(self.objective),
            "solve_time_s": float(self.solve_time),
            "status": self.status,
        }


class _Evaluator:
    """Rollout cache plus constraint evaluation shared by objective and gradient."""

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self._key = None
        self._X = None

    def states(self, u):
        key = u.tobytes()
        if key != self._key:
            self._X = rollout(self.spec.model, self.spec.x0, u)
            self._key = key
        return self._X

    def task(self, b: ConstraintBinding, X, u):
        steps = b.active_steps(self.spec.N)
        src = X[steps] if b.on == "state" else u[steps]
        g = b.task(src)
        ctx = b.context(src) if b.context is not None else None
        return src, g, ctx


def _check(spec, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (spec.N, spec.model.n_u):
        raise ValueError(f"u must have shape ({spec.N}, {spec.model.n_u})")
    return u


def _objective(spec, ev, u, lambdas, rhos):
    X = ev.states(u)
    val = spec._cost.value(X, u)
    for i, b in enumerate(spec.constraints):
        _, g, ctx = ev.task(b, X, u)
        z = g + lambdas[i][spec._rows[i]] / rhos[i]
        r = b.projector.residual(z, ctx)
        val += 0.5 * rhos[i] * float(np.sum(r * r))
    return val


def _gradient(spec, ev, u, lambdas, rhos):
    X = ev.states(u)
    Jx, Ju = spec._cost.gradients(X, u)
    w = Jx
    gu = Ju
    for i, b in enumerate(spec.constraints):
        src, g, ctx = ev.task(b, X, u)
        z = g + lambdas[i][spec._rows[i]] / rhos[i]
        r, dctx = b.projector.penalty(z, ctx)
        contrib = np.einsum("kij,ki->kj", b.task.jacobian(src), r)
        if dctx is not None and b.context is not None:
            contrib = contrib + np.einsum("kij,ki->kj", b.context.jacobian(src), dctx)
        contrib *= rhos[i]
        if b.on == "state":
            np.add.at(w, spec._rows[i], contrib)
        else:
            np.add.at(gu, spec._rows[i], contrib)
    lin = linearize(spec.model, X, u)
    return apply_B_transpose(lin, w) + gu


def al_objective(spec: ProblemSpec, u, lambdas=None, rhos=None) -> float:
    u = _check(spec, u)
    lambdas = spec.zero_multipliers() if lambdas is None else lambdas
    rhos = _default_rhos(spec, rhos)
    return _objective(spec, _Evaluator(spec), u, lambdas, rhos)


def al_gradient(spec: ProblemSpec, u, lambdas=None, rhos=None) -> np.ndarray:
    u = _check(spec, u)
    lambdas = spec.zero_multipliers() if lambdas is None else lambdas
    rhos = _default_rhos(spec, rhos)
    return _gradient(spec, _Evaluator(spec), u, lambdas, rhos)


def _default_rhos(spec, rhos, rho0=0.1):
    if rhos is None:
        return np.full(len(spec.constraints), rho0)
    return np.broadcast_to(np.asarray(rhos, dtype=float), (len(spec.constraints),)).copy()


def residual_V(spec: ProblemSpec, u, lambdas=None, rhos=None, ev=None):
    """Per-constraint ``V_i = g_i - P(g_i + lambda_i / rho_i)`` as ``(N, n_i)`` stacks, and the max-norm."""
    u = _check(spec, u)
    lambdas = spec.zero_multipliers() if lambdas is None else lambdas
    rhos = _default_rhos(spec, rhos)
    ev = ev or _Evaluator(spec)
    X = ev.states(u)
    out = []
    for i, b in enumerate(spec.constraints):
        _, g, ctx = ev.task(b, X, u)
        z = g + lambdas[i][spec._rows[i]] / rhos[i]
        V = np.zeros((spec.N, b.dim))
        V[spec._rows[i]] = g - b.projector.project(z, ctx)
        out.append(V)
    norm = max((float(np.max(np.abs(V))) if V.size else 0.0 for V in out), default=0.0)
    return out, norm


def update_multipliers(state: AlspgState, V) -> AlspgState:
    state.lambdas = [lam + rho * v for lam, rho, v in zip(state.lambdas, state.rhos, V)]
    return state


def update_penalties(state: AlspgState, v_now, v_prev, beta=5.0, rho_max=1e8, ratio=1.0) -> AlspgState:
    """Grow ``rho_i`` by ``beta`` where ``|V_i|`` failed to drop below ``ratio * |V_i|_prev``."""
    v_now = np.asarray(v_now, dtype=float)
    v_prev = np.asarray(v_prev, dtype=float)
    grow = v_now > ratio * v_prev
    state.rhos = np.where(grow, np.minimum(state.rhos * beta, rho_max), state.rhos)
    return state


def _constraint_norms(V):
    return np.array([float(np.max(np.abs(v))) if v.size else 0.0 for v in V])


def alspg_solve(spec: ProblemSpec, u_init=None, cfg: AlspgConfig | None = None) -> SolveReport:
    cfg = cfg or AlspgConfig()
    t0 = time.perf_counter()
    u = np.zeros((spec.N, spec.model.n_u)) if u_init is None else _check(spec, u_init).copy()
    u = spec.project_inputs(u)
    state = AlspgState(u, spec.zero_multipliers(), np.full(len(spec.constraints), float(cfg.rho0)))
    ev = _Evaluator(spec)
    names = [b.name for b in spec.constraints]
    try:
        V, _ = residual_V(spec, u, state.lambdas, state.rhos, ev)
    except NumericError as exc:
        return SolveReport(False, 0, 0, np.inf, np.inf, time.perf_counter() - t0,
                           np.full((spec.N + 1, spec.model.n_x), np.nan), u, status=f"rollout failed: {exc}",
                           constraint_names=names, state=state)
    v_prev = _constraint_norms(V)
    inner_total, statuses, status = 0, [], "max_outer"
    vnorm = float(np.max(v_prev)) if len(v_prev) else 0.0

    for k in range(cfg.max_outer):
        tol = cfg.early_inner_tol if k < cfg.early_outer else cfg.inner.step_tolerance
        inner_cfg = replace(cfg.inner, step_tolerance=max(tol, cfg.inner.step_tolerance))
        lam, rho = state.lambdas, state.rhos

        def f(uu, lam=lam, rho=rho):
            try:
                return _objective(spec, ev, uu, lam, rho)
            except NumericError:
                return np.inf

        def g(uu, lam=lam, rho=rho):
            return _gradient(spec, ev, uu, lam, rho)

        state.u, rep = spg_minimize(f, g, spec.project_inputs, state.u, inner_cfg)
        inner_total += rep.iterations
        statuses.append(rep.status)
        V, vnorm = residual_V(spec, state.u, state.lambdas, state.rhos, ev)
        v_now = _constraint_norms(V)
        update_multipliers(state, V)
        state.outer_iter = k + 1
        state.v_norm_history.append(vnorm)
        state.v_constraint_history.append(v_now)
        state.rho_history.append(state.rhos.copy())
        state.lambda_history.append([l.copy() for l in state.lambdas])
        log.debug("outer %d |V|=%.3e inner=%d (%s)", k, vnorm, rep.iterations, rep.status)
        if vnorm <= cfg.eps_tol:
            status = "converged"
            break
        update_penalties(state, v_now, v_prev, cfg.beta, cfg.rho_max, cfg.penalty_decrease_ratio)
        v_prev = v_now

    X = ev.states(state.u)
    # report the plain constraint residuals (unshifted) for auditing
    plain, _ = residual_V(spec, state.u, None, np.ones(len(spec.constraints)), ev)
    obj = spec._cost.value(X, state.u)
    return SolveReport(
        converged=status == "converged",
        outer_iters=state.outer_iter,
        inner_iters_total=inner_total,
        final_v_norm=vnorm,
        objective=obj,
        solve_time=time.perf_counter() - t0,
        states=X.copy(),
        inputs=state.u.copy(),
        status=status,
        residuals=plain,
        constraint_names=names,
        state=state,
        inner_statuses=statuses,
    )
