"""Minkowski differences of planar convex polygons.

Two routes are provided. :func:`minkowski_diff` builds the difference polygon
from the convex hull of pairwise vertex differences and is the general tool.
:func:`cspace_halfspaces` evaluates the configuration-space obstacle of a
rotating body directly in H-representation from support functions, batched
over many orientations; the solver uses it on every gradient evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polytope import ConvexPolytope, boundary_closest, contains, convex_hull, penetration


@dataclass(frozen=True, eq=False)
class MinkowskiDiff:
    """``result`` is ``{a - b : a in A, b in B}``.

    ``pairs[i] = (ia, ib)`` records which vertices of A and B produced hull
    vertex ``i``.
    """

    result: ConvexPolytope
    pairs: np.ndarray

    def contains_origin(self) -> bool:
        return bool(contains(self.result, np.zeros(2)))


def minkowski_diff(ga: ConvexPolytope, gb: ConvexPolytope) -> MinkowskiDiff:
    va, vb = np.asarray(ga.vertices), np.asarray(gb.vertices)
    if len(va) == 0 or len(vb) == 0:
        raise ValueError("minkowski_diff needs non-empty vertex lists")
    diff = (va[:, None, :] - vb[None, :, :]).reshape(-1, 2)
    hull, idx = convex_hull(diff)
    pairs = np.stack(np.unravel_index(idx, (len(va), len(vb))), axis=1)
    return MinkowskiDiff(ConvexPolytope.from_vertices(hull), pairs)


def polytope_clearance(ga: ConvexPolytope, gb: ConvexPolytope) -> float:
    """Signed distance between two polygons; negative values are penetration depths."""
    md = minkowski_diff(ga, gb).result
    origin = np.zeros(2)
    if contains(md, origin):
        return -float(penetration(md, origin)[0])
    return float(np.linalg.norm(boundary_closest(md, origin)[0]))


def _drot(theta):
    c, s = np.cos(theta), np.sin(theta)
    R = np.empty(theta.shape + (2, 2))
    R[..., 0, 0], R[..., 0, 1], R[..., 1, 0], R[..., 1, 1] = c, -s, s, c
    dR = np.empty_like(R)
    dR[..., 0, 0], dR[..., 0, 1], dR[..., 1, 0], dR[..., 1, 1] = -s, -c, c, -s
    return R, dR


@dataclass(frozen=True)
class CSpaceRows:
    """Batched H-representation of ``obstacle - R(theta) body``.

    normals: (K, m, 2) unit rows; offsets: (K, m); ``kind[j]`` is 0 for rows
    coming from obstacle edges and 1 for rows from body edges; ``support``
    holds the supporting body vertex (kind 0) or obstacle vertex (kind 1).
    """

    normals: np.ndarray
    offsets: np.ndarray
    kind: np.ndarray
    support: np.ndarray
    R: np.ndarray
    dR: np.ndarray


def cspace_halfspaces(body: ConvexPolytope, obstacle: ConvexPolytope, theta) -> CSpaceRows:
    """Support-function H-rep of the set of reference positions in collision.

    A body placed at reference ``p`` with heading ``theta`` overlaps
    ``obstacle`` iff ``p`` satisfies every row. Rows from parallel edge pairs
    may be duplicated; duplicates do not change membership or depth.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    R, dR = _drot(theta)
    K = len(theta)
    bv = np.asarray(body.vertices)
    ov = np.asarray(obstacle.vertices)
    # rotated body vertices, (K, nb, 2)
    rb = bv @ R.transpose(0, 2, 1)

    n_obs = np.broadcast_to(obstacle.A, (K,) + obstacle.A.shape)
    s_body = -(rb @ obstacle.A.T).transpose(0, 2, 1)  # (K, m_obs, nb)
    k_body = np.argmax(s_body, axis=2)
    c_obs = obstacle.b[None, :] + np.max(s_body, axis=2)

    n_rob = -(body.A @ R.transpose(0, 2, 1))  # (K, m_body, 2)
    s_obs = n_rob @ ov.T
    k_obs = np.argmax(s_obs, axis=2)
    c_rob = np.max(s_obs, axis=2) + body.b[None, :]

    normals = np.concatenate([n_obs, n_rob], axis=1)
    offsets = np.concatenate([c_obs, c_rob], axis=1)
    kind = np.concatenate([np.zeros(len(obstacle.b), int), np.ones(len(body.b), int)])
    support = np.concatenate([k_body, k_obs], axis=1)
    return CSpaceRows(normals, offsets, kind, support, R, dR)
