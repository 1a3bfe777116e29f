"""
Binary collisions with kernel B(v - u, omega) = |v - u|^kappa |cos angle(v - u, omega)|.

    u' = u - [(u - v).omega] omega
    v' = v + [(u - v).omega] omega

    Q(F1, F2)(v) = Q_gain - nu(F1)(v) F2(v)
    Q_gain(F1, F2)(v) = int int B F1(u') F2(v') d omega du
    nu(F)(v) = int int B F(u) d omega du = 2 pi int |v - u|^kappa F(u) du

The last identity uses int |cos| d omega = 2 pi over the unit sphere.
"""

import math
import logging

from dataclasses import dataclass

import numpy as np

from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy import special
from scipy.interpolate import RegularGridInterpolator

from . import utils
from .KineticResponse import DomainError

log = logging.getLogger(__name__)

## pairs closer than this are dropped from Monte Carlo sums
COINCIDENCE = 1e-8

## int over the unit sphere of |cos|
SPHERE_COS = 2.0 * math.pi

class CollisionModel:
    """Kernel exponent kappa in (-3, 1]; the angular factor is fixed to |cos|."""

    def __init__(self, kappa=1.0):
        self.kappa = float(kappa)
        if not -3.0 < self.kappa <= 1.0:
            raise DomainError(f"kappa must satisfy -3 < kappa <= 1 (got {kappa})")

    def speed_factor(self, w):
        """|w|^kappa for relative speeds w >= 0; zero where w vanishes and kappa <= 0."""
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(w > 0.0, np.power(np.where(w > 0.0, w, 1.0), self.kappa), 0.0)
        return out if np.ndim(out) else float(out)

    def __str__(self):
        return f"CollisionModel(kappa {self.kappa})"

# ##############################################################################
#                                                                              #
#                                Velocity grid                                 #
#                                                                              #
# ##############################################################################

class VelocityGrid:
    """
    Cubic lattice of M^3 nodes on [-V_max, V_max]^3, M odd so that 0 is a node.
    Every node carries the quadrature weight dv^3.
    """

    def __init__(self, M, V_max, T_M=1.0):
        self.M = int(M)
        self.V_max = float(V_max)
        if self.M < 3 or self.M % 2 == 0:
            raise DomainError(f"VelocityGrid: M must be odd and at least 3 (got {M})")
        if self.V_max < 6.0 * math.sqrt(T_M) * (1.0 - 1e-12):
            raise DomainError(f"VelocityGrid: V_max {V_max} is below 6 sqrt(T_M) = {6.0 * math.sqrt(T_M):.6g}")

        # integer multiples of dv keep the lattice exactly symmetric about 0
        half = self.M // 2
        self.dv = self.V_max / half
        self.axis = np.arange(-half, half + 1) * self.dv
        self.weight = self.dv ** 3
        mesh = np.meshgrid(self.axis, self.axis, self.axis, indexing="ij")
        self.points = np.stack(mesh, axis=-1).reshape(-1, 3)

    @property
    def size(self):
        return self.M ** 3

    @property
    def shape(self):
        return (self.M, self.M, self.M)

    def contains(self, v):
        return np.all(np.abs(np.asarray(v, dtype=float)) <= self.V_max * (1.0 + 1e-12), axis=-1)

    def index_of(self, v):
        """Flat index of the node at v, or None when v is not a node."""
        v = np.asarray(v, dtype=float)
        i = np.rint((v + self.V_max) / self.dv).astype(int)
        if np.any(i < 0) or np.any(i >= self.M) or not np.allclose(self.axis[i], v, atol=1e-12 * self.V_max):
            return None
        return int(np.ravel_multi_index(tuple(i), self.shape))

    def __str__(self):
        return f"VelocityGrid(M {self.M}, V_max {self.V_max:g})"

class GridDistribution:
    """
    Node values of a distribution F on a VelocityGrid, callable at arbitrary
    velocities. Interpolation is trilinear in F / mu_ref with
    mu_ref = e^{-|v|^2 / 2 T_ref}, so any Maxwellian at T_ref is reproduced
    exactly; queries outside the box use the ratio at the nearest face.
    """

    def __init__(self, grid, values, T_ref=1.0):
        self.grid = grid
        self.values = np.asarray(values, dtype=float).reshape(grid.size)
        self.T_ref = float(T_ref)
        ratio = self.values / self._reference(grid.points)
        self._interp = RegularGridInterpolator((grid.axis, grid.axis, grid.axis),
                                               ratio.reshape(grid.shape), method="linear")

    @classmethod
    def from_function(cls, grid, f, T_ref=1.0):
        return cls(grid, f(grid.points), T_ref)

    def _reference(self, v):
        return np.exp(-utils.dot(v, v) / (2.0 * self.T_ref))

    def __call__(self, v):
        v = np.atleast_2d(np.asarray(v, dtype=float))
        clipped = np.clip(v, -self.grid.V_max, self.grid.V_max)
        return self._interp(clipped) * self._reference(v)

    def integral(self):
        return float(np.sum(self.values) * self.grid.weight)

# ##############################################################################
#                                                                              #
#                               Collision map                                  #
#                                                                              #
# ##############################################################################

def _check_unit(omega, op):
    if np.any(np.abs(utils.norm(omega) - 1.0) > 1e-12):
        raise DomainError(f"{op}: omega must be a unit vector")

def post_collision(u, v, omega):
    """(u', v') for single vectors or (N, 3) batches; conserves momentum and energy."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    omega = np.asarray(omega, dtype=float)
    _check_unit(omega, "post_collision")
    proj = utils.dot(u - v, omega)[..., None] * omega
    return u - proj, v + proj

def kernel_B(u, v, omega, model):
    """|v - u|^kappa |cos angle(v - u, omega)|; zero when u = v."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    omega = np.asarray(omega, dtype=float)
    _check_unit(omega, "kernel_B")
    w = v - u
    speed = utils.norm(w)
    coincident = speed == 0.0
    if np.any(coincident) and model.kappa < 0.0:
        log.debug("kernel_B: u = v with kappa %g; B taken as 0", model.kappa)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.abs(utils.dot(w, omega)) / np.where(coincident, 1.0, speed)
    out = np.where(coincident, 0.0, model.speed_factor(speed) * cos)
    return out if np.ndim(out) else float(out)

# ##############################################################################
#                                                                              #
#                             Collision frequency                              #
#                                                                              #
# ##############################################################################

def nu_maxwellian(v, T=1.0, density=1.0):
    """
    Closed form of nu(F)(v) for kappa = 1 and F = density * normalized
    Maxwellian at T:

        2 pi sqrt(T) [ sqrt(2/pi) e^{-a^2/2} + (a + 1/a) erf(a / sqrt 2) ],  a = |v| / sqrt(T)

    with the value 2 pi sqrt(T) sqrt(8 / pi) at v = 0.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    a = utils.norm(v) / math.sqrt(T)
    small = a < 1e-8
    safe = np.where(small, 1.0, a)
    mean = np.where(small, math.sqrt(8.0 / math.pi),
                    math.sqrt(2.0 / math.pi) * np.exp(-safe * safe / 2.0)
                    + (safe + 1.0 / safe) * special.erf(safe / math.sqrt(2.0)))
    out = density * SPHERE_COS * math.sqrt(T) * mean
    return out if len(out) > 1 else float(out[0])

def mean_collision_frequency(T, model, density=1.0):
    """
    Average of nu(mu_T) over mu_T for a normalized Maxwellian:

        2 pi (4 T)^{kappa/2} Gamma((3 + kappa)/2) / Gamma(3/2)

    i.e. 8 sqrt(pi T) for hard spheres.
    """
    k = model.kappa
    return density * SPHERE_COS * (4.0 * T) ** (k / 2.0) * special.gamma((3.0 + k) / 2.0) / special.gamma(1.5)

def _nu_grid(F, v, model):
    grid = F.grid
    v = np.atleast_2d(np.asarray(v, dtype=float))
    out = np.empty(len(v))
    # equal-volume ball around a coincident node
    radius = grid.dv * (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)
    singular = 4.0 * math.pi * radius ** (3.0 + model.kappa) / (3.0 + model.kappa)
    for i, vi in enumerate(v):
        speed = utils.norm(grid.points - vi)
        total = np.sum(model.speed_factor(speed) * F.values) * grid.weight
        j = grid.index_of(vi)
        if j is not None:
            total += singular * F.values[j]
        out[i] = SPHERE_COS * total
    return out

def _nu_mc(F, v, model, n_mc, rng, T_imp):
    v = np.atleast_2d(np.asarray(v, dtype=float))
    u = rng.normal(0.0, math.sqrt(T_imp), (n_mc, 3))
    g = (2.0 * math.pi * T_imp) ** -1.5 * np.exp(-utils.dot(u, u) / (2.0 * T_imp))
    ratio = np.asarray(F(u), dtype=float) / g
    out = np.empty(len(v))
    for i, vi in enumerate(v):
        speed = utils.norm(vi - u)
        keep = speed >= COINCIDENCE
        out[i] = SPHERE_COS * np.sum(model.speed_factor(speed[keep]) * ratio[keep]) / n_mc
    return out

def nu_of(F, v, model, n_mc=None, rng=None, T_imp=1.0):
    """
    Loss frequency nu(F)(v) at one velocity (3,) or several (N, 3).

    F is either a GridDistribution (deterministic node sum with the
    coincident cell integrated analytically) or a vectorized density
    callable, in which case u is sampled from a Gaussian at T_imp with
    n_mc draws from rng.
    """
    if isinstance(F, GridDistribution):
        out = _nu_grid(F, v, model)
    else:
        if n_mc is None or n_mc <= 0:
            raise DomainError(f"nu_of: n_mc must be positive (got {n_mc})")
        if rng is None:
            raise DomainError("nu_of: Monte Carlo evaluation needs an rng")
        out = _nu_mc(F, v, model, int(n_mc), rng, T_imp)
    return out if np.ndim(v) > 1 else float(out[0])

# ##############################################################################
#                                                                              #
#                                 Gain term                                    #
#                                                                              #
# ##############################################################################

@dataclass
class GainEstimate:
    value: float            # Q_gain estimate
    stderr: float
    loss: float             # nu(F1)(v) F2(v) on the same samples
    net: float              # value - loss
    net_stderr: float
    nu: float = None        # nu(F1)(v) on the same samples

def _gain_samples(F1, F2, v, model, n_mc, rng, T_imp):
    """
    Per-sample gain, loss and frequency terms, shape (N, n_mc), with
    u ~ N(0, T_imp) and omega uniform. One sample set serves every row of v.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    u = rng.normal(0.0, math.sqrt(T_imp), (n_mc, 3))
    omega = utils.sample_unit_sphere(n_mc, rng)
    g = (2.0 * math.pi * T_imp) ** -1.5 * np.exp(-utils.dot(u, u) / (2.0 * T_imp))

    vv = v[:, None, :]
    uu = np.broadcast_to(u[None, :, :], (len(v), n_mc, 3))
    om = np.broadcast_to(omega[None, :, :], uu.shape)
    weight = 4.0 * math.pi * kernel_B(uu, vv, om, model) / g[None, :]
    weight = np.where(utils.norm(vv - uu) >= COINCIDENCE, weight, 0.0)

    u_post, v_post = post_collision(uu.reshape(-1, 3), np.broadcast_to(vv, uu.shape).reshape(-1, 3), om.reshape(-1, 3))
    gain = weight * (np.asarray(F1(u_post)) * np.asarray(F2(v_post))).reshape(weight.shape)
    freq = weight * np.asarray(F1(u)).reshape(1, -1)
    loss = freq * np.asarray(F2(v)).reshape(-1, 1)
    return gain, loss, freq

def _mean_and_error(x):
    """Row means of (N, n) samples and their standard errors."""
    n = x.shape[-1]
    mean = np.mean(x, axis=-1)
    err = np.std(x, axis=-1, ddof=1) / math.sqrt(n) if n > 1 else np.full_like(mean, math.inf)
    return mean, err

def _scalar(a, single):
    return float(a[0]) if single else a

def q_gain_estimate(F1, F2, v, model, n_mc, rng, T_imp=1.0):
    """
    Monte Carlo Q_gain(F1, F2)(v) and the loss nu(F1)(v) F2(v) on common
    random numbers, so Q(mu, mu) vanishes sample by sample.

    v is one velocity (3,) or a batch (N, 3) sharing one sample set; the
    fields of the result are floats or (N,) arrays accordingly.
    """
    if n_mc is None or n_mc <= 1:
        raise DomainError(f"q_gain_estimate: n_mc must be at least 2 (got {n_mc})")
    single = np.ndim(v) == 1
    gain, loss, freq = _gain_samples(F1, F2, v, model, int(n_mc), rng, T_imp)
    value, stderr = _mean_and_error(gain)
    net, net_stderr = _mean_and_error(gain - loss)
    return GainEstimate(value=_scalar(value, single), stderr=_scalar(stderr, single),
                        loss=_scalar(np.mean(loss, axis=-1), single),
                        net=_scalar(net, single), net_stderr=_scalar(net_stderr, single),
                        nu=_scalar(np.mean(freq, axis=-1), single))

def nu_estimate(F, v, model, n_mc, rng, T_imp=1.0):
    """(nu(F)(v), stderr) using the same (u, omega) sampling as q_gain_estimate."""
    if n_mc is None or n_mc <= 1:
        raise DomainError(f"nu_estimate: n_mc must be at least 2 (got {n_mc})")
    v = np.asarray(v, dtype=float)
    u = rng.normal(0.0, math.sqrt(T_imp), (n_mc, 3))
    omega = utils.sample_unit_sphere(n_mc, rng)
    g = (2.0 * math.pi * T_imp) ** -1.5 * np.exp(-utils.dot(u, u) / (2.0 * T_imp))
    speed = utils.norm(v[None, :] - u)
    terms = np.where(speed >= COINCIDENCE,
                     4.0 * math.pi * kernel_B(u, v[None, :], omega, model) * F(u) / g, 0.0)
    value, stderr = _mean_and_error(terms)
    return float(value), float(stderr)

def q_gain_quadrature(F1, F2, v, model, T_imp=1.0, n_u=20, n_cos=16, n_phi=32):
    """
    Deterministic Q_gain(F1, F2)(v): Gauss-Hermite in each component of u
    (weight e^{-u^2 / 2 T_imp}), Gauss-Legendre in cos(polar angle) and the
    trapezoid rule in azimuth for omega.
    """
    v = np.asarray(v, dtype=float)
    x, w = hermegauss(n_u)
    nodes = math.sqrt(T_imp) * x
    w_axis = math.sqrt(T_imp) * w * np.exp(x * x / 2.0)
    U = np.stack(np.meshgrid(nodes, nodes, nodes, indexing="ij"), axis=-1).reshape(-1, 3)
    W = np.einsum("i,j,k->ijk", w_axis, w_axis, w_axis).reshape(-1)

    c, wc = leggauss(n_cos)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    C, P = np.meshgrid(c, phi, indexing="ij")
    s = np.sqrt(1.0 - C * C)
    omegas = np.stack([s * np.cos(P), s * np.sin(P), C], axis=-1).reshape(-1, 3)
    w_omega = np.repeat(wc, n_phi) * (2.0 * math.pi / n_phi)

    total = 0.0
    for omega, wo in zip(omegas, w_omega):
        om = np.broadcast_to(omega, U.shape)
        B = kernel_B(U, v[None, :], om, model)
        u_post, v_post = post_collision(U, np.broadcast_to(v, U.shape), om)
        total += wo * float(np.sum(W * B * F1(u_post) * F2(v_post)))
    return total

# ##############################################################################
#                                                                              #
#                             Weighted gain Gamma                              #
#                                                                              #
# ##############################################################################

def h_weight(v, theta, s, T_M):
    """e^{(theta - s)|v|^2} / sqrt(mu) with mu = e^{-|v|^2 / 2 T_M}; F = h / h_weight."""
    v = np.asarray(v, dtype=float)
    v2 = utils.dot(v, v)
    return np.exp((theta - s) * v2 + v2 / (4.0 * T_M))

def gamma_gain(h, v, model, rng, theta, s=0.0, T_M=1.0, n_mc=256, density=1.0):
    """
    Weighted gain e^{(theta - s)|v|^2} Gamma_gain(f, f)(v) with
    Gamma_gain(f1, f2) = Q_gain(sqrt(mu) f1, sqrt(mu) f2) / sqrt(mu), for the
    h-field h on a VelocityGrid (a GridDistribution of h values).

    v is one node or an (N, 3) batch of nodes sharing one sample set.
    Returns a GainEstimate in h units; its nu field is density * nu(F)(v).
    """
    if not 0.0 < theta < 1.0 / (4.0 * T_M):
        raise DomainError(f"gamma_gain: theta must lie in (0, 1/(4 T_M)) (got {theta})")
    v = np.asarray(v, dtype=float)
    grid = h.grid
    inside = grid.contains(v)
    if not np.all(inside):
        bad = v if v.ndim == 1 else v[~inside][0]
        raise DomainError(f"gamma_gain: node {bad.tolist()} lies outside {grid}")

    F = GridDistribution(grid, h.values / h_weight(grid.points, theta, s, T_M), T_ref=T_M)
    est = q_gain_estimate(F, F, v, model, n_mc, rng, T_imp=T_M)
    scale = density * h_weight(v, theta, s, T_M)
    if v.ndim == 1:
        scale = float(scale)
    return GainEstimate(value=scale * est.value, stderr=scale * est.stderr, loss=scale * est.loss,
                        net=scale * est.net, net_stderr=scale * est.net_stderr, nu=density * est.nu)
