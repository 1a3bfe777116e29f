import logging

import numpy as np

from .KineticResponse import DomainError

log = logging.getLogger(__name__)

##
# A point of the wall: its temperature, outward unit normal n and a tangent
# frame (tau1, tau2) with {tau1, tau2, n} orthonormal and right-handed
# (tau1 x tau2 = n).
#
# Velocities are split as v = v_par[0] tau1 + v_par[1] tau2 + v_perp n, with
# v_perp = n.v signed. Gas molecules striking the wall have n.u > 0; molecules
# re-emitted into the gas have n.v < 0.
class WallPatch:

    def __init__(self, temperature, normal=(0.0, 0.0, -1.0), tangent=None):
        self.temperature = float(temperature)
        if not self.temperature > 0:
            raise DomainError(f"WallPatch: temperature must be positive (got {self.temperature})")

        n = np.asarray(normal, dtype=float)
        length = np.linalg.norm(n)
        if n.shape != (3,) or not length > 0:
            raise DomainError(f"WallPatch: normal must be a nonzero 3-vector (got {normal})")
        self.normal = n / length

        if tangent is None:
            # start from the axis least aligned with n
            tangent = np.eye(3)[int(np.argmin(np.abs(self.normal)))]
        t = np.asarray(tangent, dtype=float)
        t = t - np.dot(t, self.normal) * self.normal
        if not np.linalg.norm(t) > 1e-12:
            raise DomainError("WallPatch: tangent is parallel to the normal")
        self.tau1 = t / np.linalg.norm(t)
        self.tau2 = np.cross(self.normal, self.tau1)

    def frame(self):
        return np.stack([self.tau1, self.tau2, self.normal])

    ## signed n.v for one velocity or an (N, 3) array
    def normal_component(self, v):
        return np.asarray(v, dtype=float) @ self.normal

    ## (v_perp, v_par) with v_par the two tangential coordinates
    def decompose(self, v):
        v = np.asarray(v, dtype=float)
        return v @ self.normal, np.stack([v @ self.tau1, v @ self.tau2], axis=-1)

    def compose(self, v_perp, v_par):
        v_par = np.asarray(v_par, dtype=float)
        return (np.asarray(v_perp, dtype=float)[..., None] * self.normal
                + v_par[..., 0:1] * self.tau1
                + v_par[..., 1:2] * self.tau2)

    ## specular image v - 2 n (n.v)
    def mirror(self, v):
        v = np.asarray(v, dtype=float)
        return v - 2.0 * (v @ self.normal)[..., None] * self.normal

    def __str__(self):
        return f"WallPatch(T_w {self.temperature}, n {self.normal.tolist()})"

##
# Split of one velocity in a wall frame. Kept as a value object for callers
# that want named components rather than arrays.
class HalfSpaceVelocity:

    def __init__(self, v_perp, v_par):
        self.v_perp = float(v_perp)
        self.v_par  = np.asarray(v_par, dtype=float).reshape(2)

    @classmethod
    def from_velocity(cls, v, wall):
        v_perp, v_par = wall.decompose(v)
        return cls(v_perp, v_par)

    def to_velocity(self, wall):
        return wall.compose(np.asarray(self.v_perp), self.v_par)

    def __str__(self):
        return f"(v_perp {self.v_perp}, v_par {self.v_par.tolist()})"
