import math
import logging

import numpy as np

from . import utils
from .WallPatch import WallPatch
from .KineticResponse import DomainError, ConfigurationError

log = logging.getLogger(__name__)

##
# Wall temperature as a function of the boundary point.
#
#   const:<v>           T_w = v everywhere
#   faces:<v0>,<v1>     slab only: face x1 = 0 at v0, face x1 = width at v1
#   angular:<T0>,<amp>  ball or disk: T_w = T0 + amp cos(theta), cos(theta) = x1 / |x|
class WallTemperature:

    CONST   = "const"
    FACES   = "faces"
    ANGULAR = "angular"

    def __init__(self, kind, values):
        self.kind = kind
        self.values = tuple(float(x) for x in values)

        expected = {self.CONST: 1, self.FACES: 2, self.ANGULAR: 2}
        if kind not in expected:
            raise ConfigurationError(f"unknown wall_temp kind {kind} (expected const, faces or angular)")
        if len(self.values) != expected[kind]:
            raise ConfigurationError(f"wall_temp {kind} takes {expected[kind]} value(s), got {len(self.values)}")
        if not self.min_Tw > 0:
            raise DomainError(f"wall temperature must stay positive (min {self.min_Tw})")

    @classmethod
    def parse(cls, text):
        """Parse "const:1.0", "faces:1,2" or "angular:1,0.05"."""
        if isinstance(text, (int, float)):
            return cls(cls.CONST, [text])
        kind, sep, rest = str(text).strip().partition(":")
        if not sep:
            try:
                return cls(cls.CONST, [float(kind)])
            except ValueError:
                pass
            raise ConfigurationError(f"wall_temp must look like kind:values (got {text})")
        try:
            values = [float(tok) for tok in rest.split(",") if tok.strip()]
        except ValueError:
            raise ConfigurationError(f"wall_temp has a non-numeric value: {text}")
        return cls(kind.strip().lower(), values)

    @property
    def T_M(self):
        if self.kind == self.CONST:
            return self.values[0]
        if self.kind == self.FACES:
            return max(self.values)
        return self.values[0] + abs(self.values[1])

    @property
    def min_Tw(self):
        if self.kind == self.CONST:
            return self.values[0]
        if self.kind == self.FACES:
            return min(self.values)
        return self.values[0] - abs(self.values[1])

    def __str__(self):
        return f"{self.kind}:{','.join(utils.format_float(x) for x in self.values)}"

##
# A bounded (or periodically wrapped) spatial domain with analytic boundary.
#
#   ball   |x| < radius
#   disk   x1^2 + x2^2 < radius^2, unbounded in x3
#   slab   0 < x1 < width, x2 and x3 wrapped with period periodic_length
#
# Every query taking points accepts one point (3,) or an (N, 3) array.
class Domain:

    BALL = "ball"
    DISK = "disk"
    SLAB = "slab"

    SHAPES = [BALL, DISK, SLAB]

    ## relative discriminant below which a boundary flight counts as grazing
    GRAZING = 1e-14

    ## inward nudge for grazing flights, relative to scale
    NUDGE = 1e-12

    def __init__(self, shape, size, wall_temp="const:1", periodic_length=1.0):
        shape = str(shape).strip().lower()
        if shape not in self.SHAPES:
            raise ConfigurationError(f"unknown domain {shape} (expected ball, disk or slab)")
        self.shape = shape
        self.size = float(size)
        if not self.size > 0:
            raise DomainError(f"domain {'width' if shape == self.SLAB else 'radius'} must be positive (got {size})")

        self.periodic_length = float(periodic_length)
        if not self.periodic_length > 0:
            raise DomainError(f"periodic_length must be positive (got {periodic_length})")

        self.wall_temp = wall_temp if isinstance(wall_temp, WallTemperature) else WallTemperature.parse(wall_temp)
        if self.wall_temp.kind == WallTemperature.FACES and shape != self.SLAB:
            raise ConfigurationError("wall_temp faces:<v0>,<v1> needs domain = slab")
        if self.wall_temp.kind == WallTemperature.ANGULAR and shape == self.SLAB:
            raise ConfigurationError("wall_temp angular:<T0>,<amp> needs domain = ball or disk")

    @classmethod
    def ball(cls, radius=1.0, wall_temp="const:1"):
        return cls(cls.BALL, radius, wall_temp)

    @classmethod
    def disk(cls, radius=1.0, wall_temp="const:1"):
        return cls(cls.DISK, radius, wall_temp)

    @classmethod
    def slab(cls, width=1.0, wall_temp="const:1", periodic_length=1.0):
        return cls(cls.SLAB, width, wall_temp, periodic_length)

    # ##########################################################################
    # properties
    # ##########################################################################

    @property
    def radius(self):
        return self.size if self.shape != self.SLAB else None

    @property
    def width(self):
        return self.size if self.shape == self.SLAB else None

    ## length used for relative tolerances
    @property
    def scale(self):
        return self.size

    @property
    def diameter(self):
        return self.size if self.shape == self.SLAB else 2.0 * self.size

    @property
    def T_M(self):
        return self.wall_temp.T_M

    @property
    def min_Tw(self):
        return self.wall_temp.min_Tw

    ## ball volume, disk cross-section per unit length, slab periodic cell
    @property
    def volume(self):
        if self.shape == self.BALL:
            return 4.0 / 3.0 * math.pi * self.size ** 3
        if self.shape == self.DISK:
            return math.pi * self.size ** 2
        return self.size * self.periodic_length ** 2

    # ##########################################################################
    # point queries
    # ##########################################################################

    ## signed implicit function: negative inside, zero on the boundary
    def level(self, x):
        x = np.asarray(x, dtype=float)
        if self.shape == self.BALL:
            return utils.norm(x) - self.size
        if self.shape == self.DISK:
            return np.hypot(x[..., 0], x[..., 1]) - self.size
        return np.maximum(-x[..., 0], x[..., 0] - self.size)

    def contains(self, x, tol=1e-10):
        return self.level(x) <= tol * self.scale

    def normal_at(self, x):
        x = np.asarray(x, dtype=float)
        if self.shape == self.BALL:
            return utils.unit(x)
        if self.shape == self.DISK:
            planar = x.copy()
            planar[..., 2] = 0.0
            return utils.unit(planar)
        n = np.zeros_like(x)
        n[..., 0] = np.where(x[..., 0] < 0.5 * self.size, -1.0, 1.0)
        return n

    def wall_temperature(self, x):
        x = np.asarray(x, dtype=float)
        wt = self.wall_temp
        if wt.kind == WallTemperature.CONST:
            values = np.full(x.shape[:-1], wt.values[0])
        elif wt.kind == WallTemperature.FACES:
            values = np.where(x[..., 0] < 0.5 * self.size, wt.values[0], wt.values[1])
        else:
            if self.shape == self.BALL:
                rho = utils.norm(x)
            else:
                rho = np.hypot(x[..., 0], x[..., 1])
            values = wt.values[0] + wt.values[1] * x[..., 0] / rho
        return values if np.ndim(values) else float(values)

    def wall_patch(self, x):
        return WallPatch(self.wall_temperature(x), normal=self.normal_at(x))

    ## move points that are within rounding of the boundary exactly onto it
    def project_to_boundary(self, x):
        x = np.array(x, dtype=float)
        if self.shape == self.BALL:
            return self.size * utils.unit(x)
        if self.shape == self.DISK:
            rho = np.hypot(x[..., 0], x[..., 1])
            x[..., 0] *= self.size / rho
            x[..., 1] *= self.size / rho
            return x
        x[..., 0] = np.where(x[..., 0] < 0.5 * self.size, 0.0, self.size)
        return x

    ## periodic wrap of the slab's tangential coordinates; identity otherwise
    def wrap(self, x):
        if self.shape != self.SLAB:
            return x
        x = np.array(x, dtype=float)
        x[..., 1:] = np.mod(x[..., 1:], self.periodic_length)
        return x

    def sample_uniform(self, n, rng):
        if self.shape == self.BALL:
            radius = self.size * rng.random(n) ** (1.0 / 3.0)
            return radius[:, None] * utils.sample_unit_sphere(n, rng)
        if self.shape == self.DISK:
            radius = self.size * np.sqrt(rng.random(n))
            phi = rng.uniform(0.0, 2.0 * math.pi, n)
            return np.stack([radius * np.cos(phi), radius * np.sin(phi), np.zeros(n)], axis=-1)
        return np.stack([self.size * rng.random(n),
                         self.periodic_length * rng.random(n),
                         self.periodic_length * rng.random(n)], axis=-1)

    # ##########################################################################
    # flights
    # ##########################################################################

    def _quadratic_exit(self, x, v):
        """Larger root of |P(x + tau v)|^2 = R^2 with P the ball or disk projection."""
        if self.shape == self.DISK:
            x = x[:, :2]
            v = v[:, :2]
        a = utils.dot(v, v)
        b = utils.dot(x, v)
        c = utils.dot(x, x) - self.size ** 2
        disc = b * b - a * c

        with np.errstate(divide="ignore", invalid="ignore"):
            root = np.sqrt(np.maximum(disc, 0.0))
            tau = np.where(b <= 0.0, (root - b) / a, -c / (b + root))
            grazing = disc < self.GRAZING * a * self.size ** 2
        tau = np.where(a > 0.0, tau, np.inf)
        return tau, grazing & (a > 0.0)

    def _exit_once(self, x, v):
        if self.shape == self.SLAB:
            v1 = v[:, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                tau = np.where(v1 > 0.0, (self.size - x[:, 0]) / v1,
                      np.where(v1 < 0.0, -x[:, 0] / v1, np.inf))
            return np.maximum(tau, 0.0), np.zeros(len(x), dtype=bool)
        return self._quadratic_exit(x, v)

    def exit_times(self, x, v):
        """
        Smallest tau > 0 with x + tau v on the boundary, row by row; inf where
        the flight never reaches the wall (v = 0, or parallel to the slab faces
        or the disk axis). Grazing rows are nudged inward once and retried.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        x, v = np.broadcast_arrays(x, v)

        tau, grazing = self._exit_once(x, v)
        if np.any(grazing):
            log.debug("exit_times: nudging %d grazing flight(s)", int(np.count_nonzero(grazing)))
            nudged = x[grazing] - self.NUDGE * self.scale * self.normal_at(x[grazing])
            tau_g, _ = self._exit_once(nudged, v[grazing])
            tau = tau.copy()
            tau[grazing] = tau_g
        return tau

    def __str__(self):
        what = "width" if self.shape == self.SLAB else "radius"
        return f"Domain({self.shape}, {what} {self.size}, T_w {self.wall_temp})"
