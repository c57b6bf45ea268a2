"""Test utilities that need the library: switch detection for finite-difference checks."""

import numpy as np

from geopro.alspg import al_objective
from geopro.dynamics import rollout
from geopro.geometry import boundary_closest
from geopro.projectors import (
    BarrierWrapped,
    BoxLimit,
    ReachContact,
    ReachInside,
    ReachMinkowski,
    ReachSdf,
    ReachSegment,
    SafeMinkowski,
    SafePolytope,
    SafeSdf,
)


def _h_flags(h):
    return np.stack([h <= 0.0, h >= 1.0], axis=-1)


def branch_signature(p, Z, C):
    """Discrete branch taken by a projector at every row: any change means a non-smooth switch."""
    parts = [np.asarray(p.condition(Z, C), bool).ravel()]
    if isinstance(p, SafePolytope):
        parts.append(p.facet_distance(Z)[1])
    elif isinstance(p, SafeSdf):
        parts.append(p._covered(Z))
    elif isinstance(p, SafeMinkowski):
        rows, _, j, _ = p._pick(Z, C)
        parts += [j, rows.support[np.arange(len(Z)), j]]
    elif isinstance(p, BoxLimit):
        parts += [(Z < p.lower).ravel(), (Z > p.upper).ravel()]
    elif isinstance(p, (ReachContact, ReachInside)):
        _, j, h = boundary_closest(p.target, Z)
        parts += [np.atleast_1d(j), _h_flags(np.atleast_1d(h)).ravel()]
    elif isinstance(p, ReachSegment):
        d = p.segment.b - p.segment.a
        parts.append(_h_flags((Z - p.segment.a) @ d / (d @ d)).ravel())
    elif isinstance(p, ReachSdf):
        parts.append(p._covered(Z))
    elif isinstance(p, ReachMinkowski):
        parts.append(p._solve(Z, C)[2])
    elif isinstance(p, BarrierWrapped):
        s, _, ddot, m = p.margin(Z, C)
        parts += [s < m, ddot < 0]
        parts.append(branch_signature(p.inner, Z, None if p.inner.context_dim == 0 else C))
    return np.concatenate([np.asarray(q, float).ravel() for q in parts])


def problem_signature(spec, u, lambdas, rhos):
    X = rollout(spec.model, spec.x0, u)
    out = []
    for i, b in enumerate(spec.constraints):
        steps = b.active_steps(spec.N)
        src = X[steps] if b.on == "state" else u[steps]
        ctx = b.context(src) if b.context is not None else None
        Z = b.task(src) + lambdas[i][b.rows(spec.N)] / rhos[i]
        out.append(branch_signature(b.projector, Z, ctx))
    return np.concatenate(out) if out else np.zeros(0)


def fd_gradient(spec, u, lambdas, rhos, h=1e-6):
    g = np.zeros_like(u)
    sig0 = problem_signature(spec, u, lambdas, rhos)
    switched = False
    for idx in np.ndindex(u.shape):
        e = np.zeros_like(u)
        e[idx] = h
        for sgn in (1, -1):
            if not np.array_equal(problem_signature(spec, u + sgn * e, lambdas, rhos), sig0):
                switched = True
                break
        if switched:
            return None
        g[idx] = (al_objective(spec, u + e, lambdas, rhos) - al_objective(spec, u - e, lambdas, rhos)) / (2 * h)
    return g
