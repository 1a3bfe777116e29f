"""
Straight-line flights to the wall.

Forward flights x + tau v and the back-time flights x - v (t - s) of the
trajectory formula share one intersection routine, Domain.exit_times.
"""

import logging

from dataclasses import dataclass

import numpy as np

from .WallPatch import WallPatch
from .KineticResponse import DomainError

log = logging.getLogger(__name__)

## points this far outside (relative to the domain scale) are rejected
OUTSIDE_TOLERANCE = 1e-10

@dataclass
class BoundaryHit:
    time: float             # time of flight, >= 0
    point: np.ndarray       # on the boundary
    normal: np.ndarray      # outward unit normal at point
    wall: WallPatch

##
# Result of a back-time flight from (t, x, v): the backward exit time t1, the
# position x1 = x - v (t - t1), and whether the datum (t1 <= 0) is reached
# before the wall.
@dataclass
class BackTimeHit:
    t1: float
    x1: np.ndarray
    hit: BoundaryHit
    reached_datum: bool

def check_start(x, v, dom, op):
    level = float(dom.level(x))
    tol = OUTSIDE_TOLERANCE * dom.scale
    if level > tol:
        raise DomainError(f"{op}: point {x.tolist()} lies outside {dom}")
    if level > -1e-12 * dom.diameter:
        # on the wall: only inward flights have a positive exit time
        if float(dom.normal_at(x) @ v) >= 0.0 and np.any(v != 0.0):
            raise DomainError(f"{op}: flight from boundary point {x.tolist()} must point inward (n.v < 0)")

def first_exit_batch(x, v, dom):
    """
    Vectorized forward exits for (N, 3) positions and velocities. Returns
    (tau, points, normals); rows that never hit carry tau = inf and NaN points.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    tau = dom.exit_times(x, v)
    finite = np.isfinite(tau)

    points = np.full(x.shape, np.nan)
    normals = np.full(x.shape, np.nan)
    if np.any(finite):
        points[finite] = dom.project_to_boundary(x[finite] + tau[finite, None] * v[finite])
        normals[finite] = dom.normal_at(points[finite])
    return tau, points, normals

def first_exit_forward(x, v, dom):
    """
    First boundary hit of x + tau v, tau > 0, or None when the flight never
    reaches the wall (v = 0, or parallel to the slab faces or disk axis).
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    check_start(x, v, dom, "first_exit_forward")

    tau, points, normals = first_exit_batch(x, v, dom)
    if not np.isfinite(tau[0]):
        return None

    wall = dom.wall_patch(points[0])
    return BoundaryHit(time=float(tau[0]), point=points[0], normal=wall.normal, wall=wall)

def back_time_batch(t, x, v, dom):
    """
    Back-time flights for rows of (x, v) from times t (scalar or (N,)).
    Returns (t1, points, normals) with t1 = t - tau; rows with t1 <= 0 reach
    the datum first, and rows that never meet the wall get t1 = -inf.
    """
    tau, points, normals = first_exit_batch(x, -np.asarray(v, dtype=float), dom)
    return np.asarray(t, dtype=float) - tau, points, normals

def back_time_hit(t, x, v, dom):
    """
    Backward flight X(s) = x - v (t - s) from time t. The exit time is
    t1 = t - tau with tau the forward exit time of (x, -v); t1 <= 0 means the
    initial datum is reached first. A flight that never meets the wall gets
    t1 = -inf and no hit.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    hit = first_exit_forward(x, -v, dom)
    if hit is None:
        return BackTimeHit(t1=-np.inf, x1=None, hit=None, reached_datum=True)

    t1 = t - hit.time
    return BackTimeHit(t1=t1, x1=hit.point, hit=hit, reached_datum=t1 <= 0.0)
