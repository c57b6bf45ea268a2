"""Constraint bindings: attach a projector to the trajectory through a task map."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .projectors import Projector

FD_STEP = 1e-6


class TaskMap:
    """Map from batched states ``(K, n_x)`` to task vectors ``(K, n_i)``."""

    out_dim: int

    def __call__(self, X) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, X) -> np.ndarray:
        """Batched Jacobian ``(K, n_i, n_x)``."""
        raise NotImplementedError


@dataclass(frozen=True)
class Selector(TaskMap):
    indices: tuple

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    @property
    def out_dim(self):
        return len(self.indices)

    def __call__(self, X):
        return np.asarray(X)[:, list(self.indices)]

    def jacobian(self, X):
        X = np.asarray(X)
        J = np.zeros((len(X), len(self.indices), X.shape[1]))
        J[:, np.arange(len(self.indices)), list(self.indices)] = 1.0
        return J


def fd_jacobian(fn, X, step=FD_STEP):
    """Central-difference Jacobian of a batched map."""
    X = np.asarray(X, dtype=float)
    cols = []
    for j in range(X.shape[1]):
        E = np.zeros_like(X)
        E[:, j] = step
        cols.append((fn(X + E) - fn(X - E)) / (2 * step))
    return np.stack(cols, axis=2)


@dataclass(frozen=True, eq=False)
class FunctionTask(TaskMap):
    """Arbitrary batched task ``fn``; ``jac`` falls back to central differences."""

    fn: Callable
    out_dim: int
    jac: Callable | None = None

    def __call__(self, X):
        return np.asarray(self.fn(np.asarray(X, dtype=float)), dtype=float).reshape(len(X), self.out_dim)

    def jacobian(self, X):
        if self.jac is not None:
            return np.asarray(self.jac(np.asarray(X, dtype=float)), dtype=float)
        return fd_jacobian(self, X)


@dataclass(frozen=True, eq=False)
class ConstraintBinding:
    """One solver constraint ``g_i(x_k) in C_i`` over a set of horizon steps.

    ``on="state"`` bindings read ``x_k`` for ``k`` in 1..N, ``on="input"``
    bindings read ``u_k`` for ``k`` in 0..N-1. ``context`` maps the same vector
    to the projector context when the projector needs one. ``steps=None``
    means every admissible step.
    """

    projector: Projector
    task: TaskMap
    steps: tuple | None = None
    on: str = "state"
    context: TaskMap | None = None
    name: str = ""

    def __post_init__(self):
        if self.on not in ("state", "input"):
            raise ValueError("binding must act on 'state' or 'input'")
        if self.task.out_dim != self.projector.output_dim:
            raise ValueError(
                f"task map outputs {self.task.out_dim} values, projector expects {self.projector.output_dim}"
            )
        if self.projector.context_dim:
            if self.context is None:
                raise ValueError(f"{self.projector.kind} needs a context map")
            if self.context.out_dim != self.projector.context_dim:
                raise ValueError("context map dimension does not match the projector")
        if self.steps is not None:
            object.__setattr__(self, "steps", tuple(sorted({int(k) for k in self.steps})))
        if not self.name:
            object.__setattr__(self, "name", self.projector.kind)

    @property
    def dim(self) -> int:
        return self.projector.output_dim

    def active_steps(self, N: int) -> np.ndarray:
        lo, hi = (1, N) if self.on == "state" else (0, N - 1)
        if self.steps is None:
            return np.arange(lo, hi + 1)
        s = np.asarray(self.steps, dtype=int)
        if len(s) and (s.min() < lo or s.max() > hi):
            raise ValueError(f"binding {self.name!r} steps must lie in [{lo}, {hi}] for N={N}")
        return s

    def rows(self, N: int) -> np.ndarray:
        """Row indices into the (N, n_i) multiplier stack for the active steps."""
        s = self.active_steps(N)
        return s - 1 if self.on == "state" else s


def compose(behaviors) -> list:
    """Conjunction of behaviors; each binding stays a separate constraint."""
    out = list(behaviors)
    if not out:
        raise ValueError("compose needs at least one binding")
    for b in out:
        if not isinstance(b, ConstraintBinding):
            raise TypeError("compose expects ConstraintBinding items")
    return out
