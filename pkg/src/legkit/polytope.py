"""Torque and velocity capability polytopes.

The joint-space capability set of a transmission is the image of the
symmetric actuator limit box under a linear map, i.e. a zonotope. In the
plane it is built directly from its generators (sorted by direction and
chained); higher dimensions fall back to the hull of the box corners.
"""

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .topology import torque_map


@dataclass(frozen=True, eq=False)
class Polytope2:
    """Planar zonotope. ``vertices`` run counterclockwise from the largest-x vertex."""

    vertices: np.ndarray      # (k, 2)
    generators: np.ndarray    # (n, 2), one row per actuator: M[:, i] * limit_i
    degenerate: bool = False

    @property
    def scale(self):
        return float(np.abs(self.vertices).max()) if len(self.vertices) else 0.0

    def edges(self):
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def halfplanes(self):
        """Outward unit normals ``a`` and offsets ``b`` with ``a @ x <= b`` inside."""
        A, b = [], []
        for p, q in self.edges():
            e = q - p
            n = np.array([e[1], -e[0]])
            n /= np.linalg.norm(n)
            A.append(n)
            b.append(n @ p)
        return np.array(A), np.array(b)

    def signed_distance(self, x):
        """Distance to the boundary, positive inside and negative outside."""
        x = np.asarray(x, dtype=float)
        if self.degenerate:
            return -_dist_to_segments(x, self.vertices)
        A, b = self.halfplanes()
        slack = b - A @ x
        if (slack >= 0.0).all():
            return float(slack.min())
        return -_dist_to_segments(x, self.vertices, closed=True)


@dataclass(frozen=True, eq=False)
class PolytopeN:
    """Capability set in more than two joint dimensions (vertex list plus facets)."""

    vertices: np.ndarray
    generators: np.ndarray
    equations: np.ndarray = None   # rows (a, c) with a @ x + c <= 0 inside, |a| = 1
    degenerate: bool = False

    def signed_distance(self, x):
        # exact inside; outside this is the largest facet violation (a lower
        # bound on the Euclidean distance)
        if self.equations is None:
            return -math.inf
        x = np.asarray(x, dtype=float)
        return float(-(self.equations[:, :-1] @ x + self.equations[:, -1]).max())


def _dist_to_segments(x, verts, closed=False):
    verts = np.atleast_2d(verts)
    if len(verts) == 1:
        return float(np.linalg.norm(x - verts[0]))
    n = len(verts) if closed else len(verts) - 1
    best = math.inf
    for i in range(n):
        p, q = verts[i], verts[(i + 1) % len(verts)]
        e = q - p
        t = np.clip((x - p) @ e / (e @ e), 0.0, 1.0)
        best = min(best, float(np.linalg.norm(x - (p + t * e))))
    return best


def _start_order(V):
    """Rotate a ccw cycle so it starts at the largest-x vertex (ties: largest y)."""
    tol = 1e-12 * max(1.0, float(np.abs(V).max()))
    xmax = V[:, 0].max()
    cand = np.flatnonzero(V[:, 0] >= xmax - tol)
    k = cand[np.argmax(V[cand, 1])]
    return np.roll(V, -k, axis=0)


def _zonotope2(G):
    """Vertices of sum_i [-g_i, g_i] for generator rows ``G`` (2-D)."""
    scale = float(np.abs(G).max()) if G.size else 0.0
    tol = 1e-12 * scale
    gens = []
    for g in G:
        if np.linalg.norm(g) <= tol:
            continue
        if g[1] < 0 or (g[1] == 0 and g[0] < 0):
            g = -g
        gens.append(g.astype(float))
    if not gens:
        return np.zeros((1, 2)), True
    gens.sort(key=lambda g: math.atan2(g[1], g[0]))
    merged = [gens[0]]
    for g in gens[1:]:
        h = merged[-1]
        if abs(h[0] * g[1] - h[1] * g[0]) <= 1e-12 * np.linalg.norm(h) * np.linalg.norm(g):
            merged[-1] = h + g
        else:
            merged.append(g)
    if len(merged) == 1:
        g = merged[0]
        return _start_order(np.array([g, -g])), True
    v = -np.sum(merged, axis=0)
    verts = []
    for g in merged:
        verts.append(v)
        v = v + 2.0 * g
    for g in merged:
        verts.append(v)
        v = v - 2.0 * g
    return _start_order(np.array(verts)), False


def capability_polytope(limits, M):
    """Image of the box prod [-l_i, l_i] under ``M``.

    For a torque polytope pass ``M = torque_map(J)``; for a velocity polytope
    pass ``M = J``. Two-row maps give a :class:`Polytope2`, larger ones a
    :class:`PolytopeN`. Rank-deficient maps are flagged ``degenerate``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    limits = np.broadcast_to(np.asarray(limits, dtype=float), (M.shape[1],))
    if (limits < 0).any():
        raise ValueError("actuator limits must be non-negative")
    G = (M * limits).T
    if M.shape[0] == 2:
        verts, degenerate = _zonotope2(G)
        return Polytope2(vertices=verts, generators=G, degenerate=degenerate)
    corners = box_corner_images(limits, M)
    try:
        hull = ConvexHull(corners)
    except (QhullError, ValueError):
        uniq = np.unique(np.round(corners, 12), axis=0)
        return PolytopeN(vertices=uniq, generators=G, degenerate=True)
    return PolytopeN(vertices=corners[hull.vertices], generators=G, equations=hull.equations)


def box_corner_images(limits, M):
    """All ``2**n`` images of the limit box corners."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    limits = np.broadcast_to(np.asarray(limits, dtype=float), (M.shape[1],))
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=M.shape[1])))
    return (signs * limits) @ M.T


def torque_polytope(J, torque_limits):
    return capability_polytope(torque_limits, torque_map(J))


def velocity_polytope(J, velocity_limits):
    return capability_polytope(velocity_limits, J)


@dataclass(frozen=True)
class RequirementSet:
    """Axis cross: each joint reaches its peak while the others rest."""

    peaks: tuple

    def __post_init__(self):
        peaks = tuple(float(p) for p in self.peaks)
        if any(p < 0 for p in peaks):
            raise ValueError("requirement peaks must be >= 0")
        object.__setattr__(self, "peaks", peaks)

    def endpoints(self):
        n = len(self.peaks)
        pts = []
        for k, p in enumerate(self.peaks):
            if p > 0:
                e = np.zeros(n)
                e[k] = p
                pts += [e, -e]
        return pts or [np.zeros(n)]


def contains(poly, req, rtol=1e-12):
    """Whether every arm of the requirement cross fits inside ``poly``.

    Returns ``(inside, margin)`` where margin is the signed distance of the
    worst arm endpoint to the boundary.
    """
    margin = min(poly.signed_distance(x) for x in req.endpoints())
    scale = max(1.0, float(np.abs(poly.vertices).max()))
    return bool(margin >= -rtol * scale), float(margin)


def gear_polytope(kind, n, tau_max, joints=2):
    if kind == "serial":
        J = np.eye(joints) / n
    elif kind in ("differential", "differential_pair"):
        h = 1.0 / (2.0 * n)
        J = np.array([[h, h], [h, -h]])
    else:
        raise ValueError(f"unknown topology kind {kind!r}")
    return torque_polytope(J, tau_max)


def closed_form_gear_ratio(kind, tau_req, tau_max):
    if kind == "serial":
        return tau_req / tau_max
    return tau_req / (2.0 * tau_max)


def min_gear_ratio(kind, req, tau_max, rtol=1e-9):
    """Smallest gear ratio whose torque polytope covers ``req`` (bisection)."""
    if not tau_max > 0:
        raise ValueError("tau_max must be > 0")
    if not isinstance(req, RequirementSet):
        req = RequirementSet(req)
    if not max(req.peaks, default=0.0) > 0:
        raise ValueError("requirement peaks must be > 0")
    joints = len(req.peaks)
    # both kinds scale linearly with the ratio: P(n) = n * P(1), so the
    # facets are computed once and only the requirement is rescaled
    unit = gear_polytope(kind, 1.0, tau_max, joints)
    if isinstance(unit, Polytope2):
        A, b = unit.halfplanes()
    else:
        A, b = unit.equations[:, :-1], -unit.equations[:, -1]
    X = np.array(req.endpoints())
    reach = (X @ A.T).max(axis=0)
    scale1 = float(np.abs(unit.vertices).max())

    def ok(n):
        # same tolerance as contains() on the polytope of ratio n
        return bool((n * b - reach).min() >= -1e-12 * max(1.0, n * scale1))

    hi = 1.0
    while not ok(hi):
        hi *= 2.0
    lo = hi / 2.0
    while ok(lo) and lo > 1e-300:
        hi, lo = lo, lo / 2.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def write_vertices_csv(poly, path, labels=("x", "y")):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["index", *labels])
        for i, v in enumerate(poly.vertices):
            w.writerow([i, *("%.17g" % (float(c) + 0.0) for c in v)])
