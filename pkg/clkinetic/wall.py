"""
Gas-surface scattering laws.

Conventions (per wall point with outward normal n):

  - an incident velocity u strikes the wall, n.u > 0
  - a re-emitted velocity v goes back into the gas, n.v < 0
  - R(u -> v) is a probability density in v over {n.v < 0}

The Cercignani-Lampis density is evaluated in log space: the I0 factor is
taken as exp(y) * i0e(y) and the exponentials are combined before
exponentiating, so narrow kernels (small r) neither overflow nor underflow
prematurely.
"""

import math
import logging

from dataclasses import dataclass

import numpy as np

from numpy.polynomial.legendre import leggauss
from scipy import integrate

from . import utils
from .analytics import bessel_i0e
from .AccommodationPair import AccommodationPair
from .BoundaryModel import BoundaryModel
from .KineticResponse import DomainError

log = logging.getLogger(__name__)

## incident normal components below this count as grazing, not as wrong-sign
GRAZING_TOLERANCE = 1e-12

# ##############################################################################
#                                                                              #
#                         Maxwellians and weights                              #
#                                                                              #
# ##############################################################################

def maxwellian_density(v, T):
    """Normalized Maxwellian (2 pi T)^{-3/2} e^{-|v|^2 / 2T}."""
    v = np.asarray(v, dtype=float)
    return (2.0 * math.pi * T) ** -1.5 * np.exp(-utils.dot(v, v) / (2.0 * T))

def global_maxwellian(v, T_M):
    """Unnormalized weight e^{-|v|^2 / 2 T_M} built on the hottest wall temperature."""
    v = np.asarray(v, dtype=float)
    return np.exp(-utils.dot(v, v) / (2.0 * T_M))

def weight_theta(v, theta):
    v = np.asarray(v, dtype=float)
    return np.exp(theta * utils.dot(v, v))

def bracket(v):
    v = np.asarray(v, dtype=float)
    return np.sqrt(utils.dot(v, v) + 1.0)

# ##############################################################################
#                                                                              #
#                              Densities                                       #
#                                                                              #
# ##############################################################################

def _check_incident(u_perp, op, strict=True):
    bad = u_perp <= 0 if strict else u_perp < -GRAZING_TOLERANCE
    if np.any(bad):
        raise DomainError(f"{op}: incident velocity must strike the wall (n.u > 0)")

def _check_emitted(v_perp, op):
    if np.any(v_perp >= 0):
        raise DomainError(f"{op}: re-emitted velocity must leave the wall (n.v < 0)")

def _require_density(r, op):
    if not r.admissible():
        raise DomainError(f"{op}: {r} is a deterministic limit with no density; use the specular or bounce-back model")

def cl_log_density(u, v, wall, r):
    """
    log R(u -> v) for the Cercignani-Lampis kernel, broadcasting over leading
    axes of u and v. No sign checks; see cl_density.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    T = wall.temperature
    n = wall.normal

    u_perp = u @ n
    v_perp = v @ n
    u_par = u - u_perp[..., None] * n
    v_par = v - v_perp[..., None] * n

    rp, rt = r.r_perp, r.r_par
    a_par = rt * (2.0 - rt)

    d_par = v_par - (1.0 - rt) * u_par
    exponent = -(utils.dot(d_par, d_par) / a_par
                 + (v_perp * v_perp + (1.0 - rp) * u_perp * u_perp) / rp) / (2.0 * T)

    # I0 is even; magnitudes keep the argument nonnegative
    y = math.sqrt(1.0 - rp) * np.abs(v_perp) * np.abs(u_perp) / (T * rp)

    log_prefactor = -math.log(rp * a_par * math.pi / 2.0) - 2.0 * math.log(2.0 * T)
    with np.errstate(divide="ignore"):
        return (log_prefactor + np.log(np.abs(v_perp)) + exponent
                + y + np.log(bessel_i0e(y)))

def cl_density(u, v, wall, r):
    """
    Cercignani-Lampis kernel R(u -> v) at a wall point.

    Parameters
    ----------
    u : (3,) or (N, 3) incident velocity, n.u > 0
    v : (3,) or (N, 3) re-emitted velocity, n.v < 0
    wall : WallPatch
    r : AccommodationPair, admissible (0 < r_perp <= 1, 0 < r_par < 2)

    Returns
    -------
    float or ndarray of nonnegative densities
    """
    _require_density(r, "cl_density")
    _check_incident(wall.normal_component(u), "cl_density")
    _check_emitted(wall.normal_component(v), "cl_density")
    value = np.exp(cl_log_density(u, v, wall, r))
    return value if np.ndim(value) else float(value)

def diffuse_density(v, wall):
    """2 / (pi (2 T_w)^2) e^{-|v|^2 / 2 T_w} |n.v|, independent of the incident velocity."""
    v = np.asarray(v, dtype=float)
    v_perp = wall.normal_component(v)
    _check_emitted(v_perp, "diffuse_density")
    T = wall.temperature
    value = 2.0 / (math.pi * (2.0 * T) ** 2) * np.exp(-utils.dot(v, v) / (2.0 * T)) * np.abs(v_perp)
    return value if np.ndim(value) else float(value)

##
# Maxwell kernel c * diffuse + (1 - c) * delta(v - mirror(u)). The continuous
# part is a density; the atom is carried separately with its weight and location.
@dataclass
class MaxwellDensity:
    continuous: object
    atom_weight: float
    atom: np.ndarray

def maxwell_density(u, v, wall, c):
    if not 0.0 <= c <= 1.0:
        raise DomainError(f"maxwell_density: c must lie in [0, 1] (got {c})")
    _check_incident(wall.normal_component(u), "maxwell_density")
    continuous = c * diffuse_density(v, wall)
    return MaxwellDensity(continuous=continuous, atom_weight=1.0 - c, atom=wall.mirror(u))

##
# Continuous density of any model where one exists (None for deterministic laws).
def model_density(model, u, v, wall):
    if model.tag == BoundaryModel.MAXWELL:
        return maxwell_density(u, v, wall, model.c).continuous
    pair = model.accommodation()
    if pair.singular():
        return None
    if pair.is_diffuse():
        return diffuse_density(v, wall)
    return cl_density(u, v, wall, pair)

# ##############################################################################
#                                                                              #
#                              Sampling                                        #
#                                                                              #
# ##############################################################################

def _projected_gaussian(normals, rng):
    """Isotropic standard Gaussian in each row's tangent plane."""
    g = rng.standard_normal(normals.shape)
    return g - utils.dot(g, normals)[:, None] * normals

def _sample_cl_rows(u, normals, temps, r, rng):
    """
    Exact C-L sampling, one row per wall event.

      v_par  ~ N((1 - r_par) u_par, T r_par (2 - r_par) Id_2)
      |v_perp| = sqrt(X^2 + Y^2), X ~ N(sqrt(1 - r_perp) u_perp, T r_perp), Y ~ N(0, T r_perp)
    """
    if r.is_specular():
        return u - 2.0 * utils.dot(u, normals)[:, None] * normals
    if r.is_bounce_back():
        return -u

    u_perp = utils.dot(u, normals)
    u_par = u - u_perp[:, None] * normals
    rp, rt = r.r_perp, r.r_par

    v_par = (1.0 - rt) * u_par + np.sqrt(temps * rt * (2.0 - rt))[:, None] * _projected_gaussian(normals, rng)

    sigma = np.sqrt(temps * rp)
    x = math.sqrt(1.0 - rp) * u_perp + sigma * rng.standard_normal(len(u))
    y = sigma * rng.standard_normal(len(u))
    speed = np.hypot(x, y)
    return v_par - speed[:, None] * normals

def _rows(u, wall):
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u2 = np.atleast_2d(u)
    normals = np.broadcast_to(wall.normal, u2.shape)
    temps = np.full(len(u2), wall.temperature)
    return single, u2, normals, temps

def cl_sample(u, wall, r, rng):
    """
    Draw re-emitted velocities from R(u -> .) for one velocity (3,) or a batch
    (N, 3). Singular pairs fall through to the exact specular or bounce-back map.
    """
    r = r if isinstance(r, AccommodationPair) else AccommodationPair(*r)
    single, u2, normals, temps = _rows(u, wall)
    _check_incident(u2 @ wall.normal, "cl_sample")
    v = _sample_cl_rows(u2, normals, temps, r, rng)
    return v[0] if single else v

def maxwell_sample(u, wall, c, rng):
    """
    Returns (v, atom) where atom flags the rows that took the specular branch.
    """
    if not 0.0 <= c <= 1.0:
        raise DomainError(f"maxwell_sample: c must lie in [0, 1] (got {c})")
    single, u2, normals, temps = _rows(u, wall)
    _check_incident(u2 @ wall.normal, "maxwell_sample")
    v, atom = _sample_maxwell_rows(u2, normals, temps, c, rng)
    return (v[0], bool(atom[0])) if single else (v, atom)

def _sample_maxwell_rows(u, normals, temps, c, rng):
    atom = rng.random(len(u)) >= c
    v = _sample_cl_rows(u, normals, temps, AccommodationPair(1.0, 1.0), rng)
    mirrored = u - 2.0 * utils.dot(u, normals)[:, None] * normals
    v[atom] = mirrored[atom]
    return v, atom

def reflect(model, u, normals, temps, rng):
    """
    Re-emit a batch of incident velocities u (N, 3) at wall points with
    per-row outward normals (N, 3) and temperatures (N,).
    """
    u = np.asarray(u, dtype=float)
    if len(u) == 0:
        return u.copy()
    _check_incident(utils.dot(u, normals), "reflect", strict=False)
    if model.tag == BoundaryModel.MAXWELL:
        v, _ = _sample_maxwell_rows(u, normals, temps, model.c, rng)
        return v
    return _sample_cl_rows(u, normals, temps, model.accommodation(), rng)

# ##############################################################################
#                                                                              #
#                              Moments                                         #
#                                                                              #
# ##############################################################################

@dataclass
class KernelMoments:
    mean_par: np.ndarray        # E[v_par] as a 3-vector in the tangent plane
    mean_perp_square: float     # E[v_perp^2]
    mean_par_square: float      # E[|v_par|^2]
    incident_energy: float = 0.0
    wall_energy: float = 0.0    # mean energy re-emitted by a diffuse wall, 2 T_w

    @property
    def mean_energy(self):
        return 0.5 * (self.mean_perp_square + self.mean_par_square)

    ## (E_in - E_out) / (E_in - E_wall); 1 for diffuse, 0 for specular, undefined at E_in = E_wall
    @property
    def energy_accommodation(self):
        gap = self.incident_energy - self.wall_energy
        return (self.incident_energy - self.mean_energy) / gap if gap != 0.0 else math.nan

def cl_moments(u, wall, r):
    """Closed-form first and second moments of R(u -> .)."""
    u = np.asarray(u, dtype=float)
    T = wall.temperature
    u_perp = float(u @ wall.normal)
    u_par = u - u_perp * wall.normal
    rp, rt = r.r_perp, r.r_par
    return KernelMoments(
        mean_par=(1.0 - rt) * u_par,
        mean_perp_square=2.0 * T * rp + (1.0 - rp) * u_perp * u_perp,
        mean_par_square=2.0 * T * rt * (2.0 - rt) + (1.0 - rt) ** 2 * float(u_par @ u_par),
        incident_energy=0.5 * float(u @ u),
        wall_energy=2.0 * T)

# ##############################################################################
#                                                                              #
#                         Maxwellian push-forward                              #
#                                                                              #
# ##############################################################################

@dataclass
class PushforwardMaxwellian:
    """
    Image of the flux-normalized half-space Maxwellian at T0 under the C-L
    wall: a tangential Gaussian with temperature T_par times a normal factor
    (1/T_perp) e^{-v_perp^2 / 2 T_perp}.
    """
    T_par: float
    T_perp: float
    wall: object

    def density(self, v):
        v = np.asarray(v, dtype=float)
        v_perp, v_par = self.wall.decompose(v)
        return (np.exp(-utils.dot(v_par, v_par) / (2.0 * self.T_par)) / (2.0 * math.pi * self.T_par)
                * np.exp(-v_perp * v_perp / (2.0 * self.T_perp)) / self.T_perp)

    def flux_integral(self):
        """int_{n.v<0} density |n.v| dv by quadrature (equals one)."""
        normal, _ = integrate.quad(lambda s: s / self.T_perp * math.exp(-s * s / (2.0 * self.T_perp)),
                                   0.0, np.inf, epsabs=0.0, epsrel=1e-13)
        line, _ = integrate.quad(lambda x: math.exp(-x * x / (2.0 * self.T_par)) / math.sqrt(2.0 * math.pi * self.T_par),
                                 -np.inf, np.inf, epsabs=0.0, epsrel=1e-13)
        return normal * line * line

def cl_pushforward_maxwellian(wall, r, T0):
    if not T0 > 0:
        raise DomainError(f"cl_pushforward_maxwellian: T0 must be positive (got {T0})")
    T = wall.temperature
    return PushforwardMaxwellian(
        T_par=T0 * (1.0 - r.r_par) ** 2 + T * r.r_par * (2.0 - r.r_par),
        T_perp=T0 * (1.0 - r.r_perp) + T * r.r_perp,
        wall=wall)

def half_space_maxwellian(v, wall, T0):
    """Flux-normalized half-space Maxwellian (2 pi T0^2)^{-1} e^{-|v|^2 / 2 T0}."""
    v = np.asarray(v, dtype=float)
    return np.exp(-utils.dot(v, v) / (2.0 * T0)) / (2.0 * math.pi * T0 * T0)

# ##############################################################################
#                                                                              #
#                        Quadrature over half-spaces                           #
#                                                                              #
# ##############################################################################

## nodes per Gauss-Legendre panel and trapezoid nodes per tangential sigma
RESOLUTIONS = {
    "coarse": {"panel": 48,  "per_sigma": 2.0, "tolerance": 1e-4},
    "medium": {"panel": 96,  "per_sigma": 3.0, "tolerance": 1e-6},
    "fine":   {"panel": 160, "per_sigma": 4.0, "tolerance": 1e-8},
}

def _resolution(name):
    if name not in RESOLUTIONS:
        raise DomainError(f"unknown quadrature resolution {name} (expected {', '.join(RESOLUTIONS)})")
    return RESOLUTIONS[name]

def _normal_nodes(center, width, n):
    """Gauss-Legendre nodes on [0, center + 12 width], split around the peak."""
    x, w = leggauss(n)
    lo = max(0.0, center - 12.0 * width)
    hi = center + 12.0 * width
    panels = [(lo, hi)] if lo == 0.0 else [(0.0, lo), (lo, hi)]
    nodes, weights = [], []
    for a, b in panels:
        nodes.append(0.5 * (b - a) * x + 0.5 * (b + a))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)

def _tangent_nodes(center, sigma, per_sigma):
    h = sigma / per_sigma
    half = 12.0 * sigma
    count = int(math.ceil(2.0 * half / h)) + 1
    x = np.linspace(center - half, center + half, count)
    return x, np.full(count, x[1] - x[0])

def _half_space_sum(f, wall, par_center, par_sigma, perp_center, perp_width, res, sign):
    """
    Tensor-product quadrature of f(v) over one half-space: trapezoid in the two
    tangential coordinates, Gauss-Legendre in |v_perp|. sign = -1 integrates
    over n.v < 0, +1 over n.v > 0.
    """
    x1, w1 = _tangent_nodes(par_center[0], par_sigma, res["per_sigma"])
    x2, w2 = _tangent_nodes(par_center[1], par_sigma, res["per_sigma"])
    s, ws = _normal_nodes(perp_center, perp_width, res["panel"])

    total = 0.0
    for a, wa in zip(x1, w1):
        # one tangential slab at a time keeps memory bounded
        P2, S = np.meshgrid(x2, s, indexing="ij")
        v = (a * wall.tau1 + P2[..., None] * wall.tau2 + sign * S[..., None] * wall.normal)
        total += wa * float(np.einsum("i,j,ij->", w2, ws, f(v)))
    return total

def verify_normalization(u, wall, r, resolution="medium"):
    """
    int_{n.v<0} R(u -> v) dv by quadrature. The result should lie within
    RESOLUTIONS[resolution]["tolerance"] of one.
    """
    u = np.asarray(u, dtype=float)
    u_perp = float(u @ wall.normal)
    _check_incident(u_perp, "verify_normalization")
    res = _resolution(resolution)
    T = wall.temperature

    if r.is_diffuse():
        f = lambda v: diffuse_density(v, wall)
    else:
        _require_density(r, "verify_normalization")
        f = lambda v: np.exp(cl_log_density(u, v, wall, r))

    u_par = np.array([u @ wall.tau1, u @ wall.tau2])
    par_center = (1.0 - r.r_par) * u_par
    par_sigma = math.sqrt(T * r.r_par * (2.0 - r.r_par))
    perp_center = math.sqrt(1.0 - r.r_perp) * u_perp
    perp_width = math.sqrt(T * r.r_perp)
    value = _half_space_sum(f, wall, par_center, par_sigma, perp_center, perp_width, res, -1.0)
    log.debug("verify_normalization: u %s, %s, %s -> %.15g", u.tolist(), wall, r, value)
    return value

def pushforward_quadrature(v, wall, r, T0, resolution="medium"):
    """
    (1/|n.v|) int_{n.u>0} R(u -> v) mu0(u) (n.u) du by 3-D quadrature, with mu0
    the flux-normalized half-space Maxwellian at T0. Compare with
    cl_pushforward_maxwellian(wall, r, T0).density(v).
    """
    _require_density(r, "pushforward_quadrature")
    v = np.asarray(v, dtype=float)
    v_perp = float(v @ wall.normal)
    _check_emitted(v_perp, "pushforward_quadrature")
    res = _resolution(resolution)
    T = wall.temperature

    def f(u):
        return (np.exp(cl_log_density(u, v, wall, r)) * half_space_maxwellian(u, wall, T0)
                * (u @ wall.normal))

    # in u the tangential kernel is centred on v_par / (1 - r_par); the Maxwellian on 0
    width_par = math.sqrt(T0)
    if r.r_par != 1.0:
        width_par = max(width_par, math.sqrt(T * r.par_factor) / abs(1.0 - r.r_par))
    width_perp = max(math.sqrt(T0), math.sqrt(T * r.r_perp))
    value = _half_space_sum(f, wall, np.zeros(2), width_par, 0.0, width_perp, res, 1.0)
    return value / abs(v_perp)

def pushforward_flux_mismatch(wall, r, T0, resolution="medium"):
    """
    int_{n.v<0} (mu_pushforward - mu0) |n.v| dv. Both densities are flux
    normalized, so the linearized wall source carries no net mass.
    """
    res = _resolution(resolution)
    pf = cl_pushforward_maxwellian(wall, r, T0)

    def f(v):
        return (pf.density(v) - half_space_maxwellian(v, wall, T0)) * np.abs(v @ wall.normal)

    width = math.sqrt(max(T0, pf.T_par, pf.T_perp))
    return _half_space_sum(f, wall, np.zeros(2), width, 0.0, width, res, -1.0)

def verify_reciprocity(u, v, wall, r):
    """
    Largest relative defect of
        R(u -> v) e^{-|u|^2/2T} |n.u| = R(-v -> -u) e^{-|v|^2/2T} |n.v|
    over the rows of u (N, 3) and v (N, 3), compared in log space.
    """
    _require_density(r, "verify_reciprocity")
    u = np.atleast_2d(np.asarray(u, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    _check_incident(u @ wall.normal, "verify_reciprocity")
    _check_emitted(v @ wall.normal, "verify_reciprocity")
    T = wall.temperature

    lhs = cl_log_density(u, v, wall, r) - utils.dot(u, u) / (2.0 * T) + np.log(np.abs(u @ wall.normal))
    rhs = cl_log_density(-v, -u, wall, r) - utils.dot(v, v) / (2.0 * T) + np.log(np.abs(v @ wall.normal))
    return float(np.max(np.abs(np.expm1(lhs - rhs))))
