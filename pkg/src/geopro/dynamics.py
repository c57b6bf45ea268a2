"""System models, discretization, linearization and the single-shooting adjoint.

States are indexed ``x_0 .. x_N``; the step Jacobians ``A_k = d x_{k+1} / d x_k``
and ``B_k = d x_{k+1} / d u_k`` are stored for ``k = 0 .. N-1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .errors import NumericError


class SystemModel:
    """Continuous dynamics ``f(x, u)`` with analytic Jacobians, discretized by Euler or RK4.

    Subclasses implement ``f``, ``fx`` and ``fu`` on batched arrays ``(K, n)``.
    """

    name = ""
    n_x = 0
    n_u = 0
    state_labels: tuple = ()
    input_labels: tuple = ()

    def __init__(self, dt: float = 0.05, integrator: str = "euler"):
        if not dt > 0:
            raise ValueError("dt must be positive")
        if integrator not in ("euler", "rk4"):
            raise ValueError(f"unknown integrator {integrator!r}")
        self.dt = float(dt)
        self.integrator = integrator

    def f(self, X, U):
        raise NotImplementedError

    def fx(self, X, U):
        raise NotImplementedError

    def fu(self, X, U):
        raise NotImplementedError

    # optional per-point dynamics on plain floats; rollouts use it to skip array overhead
    f_point = None

    def step_point(self, x: list, u: list) -> list:
        dt, f = self.dt, self.f_point
        if self.integrator == "euler":
            return [a + dt * b for a, b in zip(x, f(x, u))]
        k1 = f(x, u)
        k2 = f([a + 0.5 * dt * b for a, b in zip(x, k1)], u)
        k3 = f([a + 0.5 * dt * b for a, b in zip(x, k2)], u)
        k4 = f([a + dt * b for a, b in zip(x, k3)], u)
        return [a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(x, k1, k2, k3, k4)]

    # discrete step, batched
    def step_batch(self, X, U):
        dt = self.dt
        if self.integrator == "euler":
            return X + dt * self.f(X, U)
        k1 = self.f(X, U)
        k2 = self.f(X + 0.5 * dt * k1, U)
        k3 = self.f(X + 0.5 * dt * k2, U)
        k4 = self.f(X + dt * k3, U)
        return X + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def step_jacobians(self, X, U):
        """Batched ``(A, B)`` of the discrete step, shapes ``(K, n_x, n_x)`` and ``(K, n_x, n_u)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        U = np.atleast_2d(np.asarray(U, dtype=float))
        dt = self.dt
        eye = np.eye(self.n_x)[None]
        if self.integrator == "euler":
            return eye + dt * self.fx(X, U), dt * self.fu(X, U)
        # RK4 chain rule: each stage derivative propagated through the previous one
        k1 = self.f(X, U)
        A1, B1 = self.fx(X, U), self.fu(X, U)
        X2 = X + 0.5 * dt * k1
        k2 = self.f(X2, U)
        F2x, F2u = self.fx(X2, U), self.fu(X2, U)
        A2 = F2x @ (eye + 0.5 * dt * A1)
        B2 = F2x @ (0.5 * dt * B1) + F2u
        X3 = X + 0.5 * dt * k2
        F3x, F3u = self.fx(X3, U), self.fu(X3, U)
        A3 = F3x @ (eye + 0.5 * dt * A2)
        B3 = F3x @ (0.5 * dt * B2) + F3u
        k3 = self.f(X3, U)
        X4 = X + dt * k3
        F4x, F4u = self.fx(X4, U), self.fu(X4, U)
        A4 = F4x @ (eye + dt * A3)
        B4 = F4x @ (dt * B3) + F4u
        A = eye + dt / 6.0 * (A1 + 2 * A2 + 2 * A3 + A4)
        B = dt / 6.0 * (B1 + 2 * B2 + 2 * B3 + B4)
        return A, B

    def step(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise NumericError("non-finite state or input passed to step")
        return self.step_batch(x[None], u[None])[0]

    def config(self) -> dict:
        return {"name": self.name, "dt": self.dt, "integrator": self.integrator}


class SingleIntegrator(SystemModel):
    """``x' = u`` in ``n`` dimensions."""

    name = "single_integrator"

    def __init__(self, n: int = 1, dt: float = 1.0, integrator: str = "euler"):
        super().__init__(dt, integrator)
        self.n_x = self.n_u = int(n)
        self.state_labels = tuple(f"x{i}" for i in range(n))
        self.input_labels = tuple(f"u{i}" for i in range(n))

    def f(self, X, U):
        return np.array(U, dtype=float)

    def fx(self, X, U):
        return np.zeros((len(X), self.n_x, self.n_x))

    def fu(self, X, U):
        return np.broadcast_to(np.eye(self.n_x), (len(X), self.n_x, self.n_u)).copy()

    def config(self):
        return {**super().config(), "n": self.n_x}


class DoubleIntegrator(SystemModel):
    """Planar point mass, state ``(c_x, c_y, v_x, v_y)``, input ``(a_x, a_y)``."""

    name = "double_integrator"
    n_x, n_u = 4, 2
    state_labels = ("cx", "cy", "vx", "vy")
    input_labels = ("ax", "ay")

    def f(self, X, U):
        return np.concatenate([X[:, 2:4], U], axis=1)

    def fx(self, X, U):
        J = np.zeros((len(X), 4, 4))
        J[:, 0, 2] = J[:, 1, 3] = 1.0
        return J

    def fu(self, X, U):
        J = np.zeros((len(X), 4, 2))
        J[:, 2, 0] = J[:, 3, 1] = 1.0
        return J


class Unicycle(SystemModel):
    """State ``(c_x, c_y, theta)``, input ``(v, w)``."""

    name = "unicycle"
    n_x, n_u = 3, 2
    state_labels = ("cx", "cy", "theta")
    input_labels = ("v", "w")

    def f(self, X, U):
        th, v, w = X[:, 2], U[:, 0], U[:, 1]
        return np.stack([v * np.cos(th), v * np.sin(th), w], axis=1)

    def f_point(self, x, u):
        return [u[0] * math.cos(x[2]), u[0] * math.sin(x[2]), u[1]]

    def fx(self, X, U):
        th, v = X[:, 2], U[:, 0]
        J = np.zeros((len(X), 3, 3))
        J[:, 0, 2] = -v * np.sin(th)
        J[:, 1, 2] = v * np.cos(th)
        return J

    def fu(self, X, U):
        th = X[:, 2]
        J = np.zeros((len(X), 3, 2))
        J[:, 0, 0] = np.cos(th)
        J[:, 1, 0] = np.sin(th)
        J[:, 2, 1] = 1.0
        return J


class KinematicBicycle(SystemModel):
    """Rear-axle bicycle, state ``(x, y, theta, v)``, input ``(delta, a)``."""

    name = "kinematic_bicycle"
    n_x, n_u = 4, 2
    state_labels = ("x", "y", "theta", "v")
    input_labels = ("delta", "a")

    def __init__(self, dt: float = 0.2, integrator: str = "euler", wheelbase: float = 2.7):
        super().__init__(dt, integrator)
        if not wheelbase > 0:
            raise ValueError("wheelbase must be positive")
        self.wheelbase = float(wheelbase)

    def f(self, X, U):
        th, v = X[:, 2], X[:, 3]
        d, a = U[:, 0], U[:, 1]
        return np.stack([v * np.cos(th), v * np.sin(th), v * np.tan(d) / self.wheelbase, a], axis=1)

    def f_point(self, x, u):
        v = x[3]
        return [v * math.cos(x[2]), v * math.sin(x[2]), v * math.tan(u[0]) / self.wheelbase, u[1]]

    def fx(self, X, U):
        th, v, d = X[:, 2], X[:, 3], U[:, 0]
        c, s = np.cos(th), np.sin(th)
        J = np.zeros((len(X), 4, 4))
        J[:, 0, 2], J[:, 0, 3] = -v * s, c
        J[:, 1, 2], J[:, 1, 3] = v * c, s
        J[:, 2, 3] = np.tan(d) / self.wheelbase
        return J

    def fu(self, X, U):
        v, d = X[:, 3], U[:, 0]
        J = np.zeros((len(X), 4, 2))
        J[:, 2, 0] = v / (self.wheelbase * np.cos(d) ** 2)
        J[:, 3, 1] = 1.0
        return J

    def config(self):
        return {**super().config(), "wheelbase": self.wheelbase}


def arm_fk(q, links=(1.0, 1.0, 1.0)):
    """Planar chain forward kinematics, batched: ``(K, 3)`` joints -> ``(K, 3)`` pose."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    L = np.asarray(links, dtype=float)
    cum = np.cumsum(q, axis=1)
    x = np.cos(cum) @ L
    y = np.sin(cum) @ L
    return np.stack([x, y, cum[:, -1]], axis=1)


def arm_fk_jacobian(q, links=(1.0, 1.0, 1.0)):
    q = np.atleast_2d(np.asarray(q, dtype=float))
    L = np.asarray(links, dtype=float)
    cum = np.cumsum(q, axis=1)
    n = q.shape[1]
    J = np.zeros((len(q), 3, n))
    # joint j moves every link from j onward
    lx = -np.sin(cum) * L
    ly = np.cos(cum) * L
    J[:, 0, :] = np.cumsum(lx[:, ::-1], axis=1)[:, ::-1]
    J[:, 1, :] = np.cumsum(ly[:, ::-1], axis=1)[:, ::-1]
    J[:, 2, :] = 1.0
    return J


class PlanarArm3(SystemModel):
    """Three-link arm with joint-acceleration inputs.

    State ``(q1, q2, q3, dq1, dq2, dq3, c_x, c_y, theta)``; the pose block
    is recomputed from the stepped joints so it always equals FK of ``q``.
    """

    name = "planar_arm3"
    n_x, n_u = 9, 3
    state_labels = ("q1", "q2", "q3", "dq1", "dq2", "dq3", "cx", "cy", "theta")
    input_labels = ("ddq1", "ddq2", "ddq3")

    def __init__(self, dt: float = 0.05, integrator: str = "euler", links=(1.0, 1.0, 1.0)):
        super().__init__(dt, integrator)
        self.links = tuple(float(v) for v in links)

    def forward_kinematics(self, q):
        single = np.ndim(q) == 1
        out = arm_fk(q, self.links)
        return out[0] if single else out

    def fk_jacobian(self, q):
        single = np.ndim(q) == 1
        out = arm_fk_jacobian(q, self.links)
        return out[0] if single else out

    def with_pose(self, q, dq=None):
        q = np.asarray(q, dtype=float)
        dq = np.zeros(3) if dq is None else np.asarray(dq, dtype=float)
        return np.concatenate([q, dq, self.forward_kinematics(q)])

    # the joint block is a linear double integrator, only the pose is nonlinear
    def f(self, X, U):
        return np.concatenate([X[:, 3:6], U, np.zeros((len(X), 3))], axis=1)

    def fx(self, X, U):
        J = np.zeros((len(X), 9, 9))
        J[:, 0:3, 3:6] = np.eye(3)
        return J

    def fu(self, X, U):
        J = np.zeros((len(X), 9, 3))
        J[:, 3:6, :] = np.eye(3)
        return J

    def step_batch(self, X, U):
        Y = super().step_batch(X, U)
        Y[:, 6:9] = arm_fk(Y[:, 0:3], self.links)
        return Y

    def step_jacobians(self, X, U):
        A, B = super().step_jacobians(X, U)
        q_next = super().step_batch(np.atleast_2d(X), np.atleast_2d(U))[:, 0:3]
        Jfk = arm_fk_jacobian(q_next, self.links)
        A[:, 6:9, :] = Jfk @ A[:, 0:3, :]
        B[:, 6:9, :] = Jfk @ B[:, 0:3, :]
        return A, B

    def config(self):
        return {**super().config(), "links": list(self.links)}


MODELS = {
    "single_integrator": SingleIntegrator,
    "double_integrator": DoubleIntegrator,
    "unicycle": Unicycle,
    "kinematic_bicycle": KinematicBicycle,
    "planar_arm3": PlanarArm3,
}


def make_model(name: str, **params) -> SystemModel:
    if name not in MODELS:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    return MODELS[name](**params)


def step(model: SystemModel, x, u):
    return model.step(x, u)


def rollout(model: SystemModel, x0, u) -> np.ndarray:
    """Nonlinear forward simulation, returns ``x_0 .. x_N`` as ``(N + 1, n_x)``."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    x = np.asarray(x0, dtype=float).reshape(1, -1)
    if x.shape[1] != model.n_x or u.shape[1] != model.n_u:
        raise ValueError("state or input dimension does not match the model")
    if model.f_point is not None:
        rows = [x[0].tolist()]
        with np.errstate(all="ignore"):
            try:
                for uk in u.tolist():
                    rows.append(model.step_point(rows[-1], uk))
            except (OverflowError, ValueError):
                raise NumericError("rollout diverged to non-finite states") from None
        X = np.array(rows)
    else:
        X = np.empty((len(u) + 1, model.n_x))
        X[0] = x[0]
        stepper = model.step_batch
        for k in range(len(u)):
            x = stepper(x, u[k : k + 1])
            X[k + 1] = x[0]
    if not np.all(np.isfinite(X)):
        raise NumericError("rollout diverged to non-finite states")
    return X


@dataclass(frozen=True, eq=False)
class LinearizedRollout:
    A: np.ndarray  # (N, n_x, n_x)
    B: np.ndarray  # (N, n_x, n_u)
    x_nominal: np.ndarray  # (N + 1, n_x)
    u_nominal: np.ndarray  # (N, n_u)

    @property
    def N(self) -> int:
        return len(self.B)


def linearize(model: SystemModel, x_nom, u_nom) -> LinearizedRollout:
    x_nom = np.asarray(x_nom, dtype=float)
    u_nom = np.atleast_2d(np.asarray(u_nom, dtype=float))
    if len(x_nom) != len(u_nom) + 1:
        raise ValueError("x_nom must have one more entry than u_nom")
    A, B = model.step_jacobians(x_nom[:-1], u_nom)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise NumericError("non-finite step Jacobians")
    return LinearizedRollout(A, B, x_nom, u_nom)


def apply_B(lin: LinearizedRollout, du) -> np.ndarray:
    """Perturbations ``dx_1 .. dx_N`` from input perturbations, by forward recursion."""
    du = np.atleast_2d(np.asarray(du, dtype=float))
    if len(du) != lin.N:
        raise ValueError("du length must equal the horizon")
    out = np.empty((lin.N, lin.A.shape[1]))
    dx = np.zeros(lin.A.shape[1])
    for k in range(lin.N):
        dx = lin.A[k] @ dx + lin.B[k] @ du[k]
        out[k] = dx
    return out


def apply_B_transpose(lin: LinearizedRollout, w) -> np.ndarray:
    """``B^T w`` for ``w = (w_1 .. w_N)`` attached to states ``x_1 .. x_N``, by the adjoint recursion."""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    N = lin.N
    if len(w) != N:
        raise ValueError("w length must equal the horizon")
    z = np.empty((N, lin.B.shape[2]))
    lam = w[N - 1].copy()
    z[N - 1] = lin.B[N - 1].T @ lam
    for k in range(N - 2, -1, -1):
        lam = w[k] + lin.A[k + 1].T @ lam
        z[k] = lin.B[k].T @ lam
    return z
