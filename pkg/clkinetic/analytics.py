"""
Special functions and Gaussian integral identities used by the wall kernel.

Every closed form in this module has an independent quadrature companion so the
two can be checked against each other (see ``clkinetic.verification`` and the
test-suite). The quadratures never use the completed-square form of the
integrand that the closed forms are derived from.
"""

import math
import logging

from dataclasses import dataclass, field

import numpy as np

from scipy import integrate

from .KineticResponse import DomainError

log = logging.getLogger(__name__)

## |y| at or below this uses the power series; above it the scaled integral
SERIES_LIMIT = 15.0

## largest |y| for which e^{|y|} (and so I0) is representable
OVERFLOW_LIMIT = 709.0

# ##############################################################################
#                                                                              #
#                                Bessel I0                                     #
#                                                                              #
# ##############################################################################

def i0_series(y):
    """
    Power series sum_k (y^2/4)^k / (k!)^2, truncated once the next term drops
    below 1e-16 of the partial sum.

    Only y^2 enters, so i0_series(y) and i0_series(-y) run the identical term
    sequence and agree bit for bit.
    """
    q = 0.25 * np.square(np.asarray(y, dtype=float))
    total = np.ones_like(q)
    term = np.ones_like(q)
    k = 0
    while True:
        k += 1
        term = term * q / (k * k)
        total = total + term
        if np.all(term <= 1e-16 * total) or k > 500:
            break
    return total

def i0e_integral(y):
    """
    e^{-|y|} I0(y) = pi^-1 int_0^pi e^{|y|(cos phi - 1)} d phi.

    The integrand is smooth, even and 2 pi periodic in phi, so the trapezoid
    rule on [0, pi] converges geometrically. The node count grows like
    sqrt(|y|), the width of the peak at phi = 0.
    """
    a = np.abs(np.asarray(y, dtype=float))
    flat = a.reshape(-1)
    out = np.empty_like(flat)
    if flat.size == 0:
        return out.reshape(a.shape)

    n_nodes = int(math.ceil(6.0 * math.sqrt(float(flat.max())))) + 33
    phi = np.linspace(0.0, math.pi, n_nodes)
    weights = np.full(n_nodes, math.pi / (n_nodes - 1))
    weights[0] *= 0.5
    weights[-1] *= 0.5
    c1 = np.cos(phi) - 1.0

    chunk = max(1, 4_000_000 // n_nodes)
    for start in range(0, flat.size, chunk):
        block = flat[start:start + chunk]
        out[start:start + chunk] = np.exp(np.outer(block, c1)) @ weights / math.pi
    return out.reshape(a.shape)

def bessel_i0e(y):
    """Exponentially scaled I0: e^{-|y|} I0(y), finite for every finite y."""
    y = np.asarray(y, dtype=float)
    a = np.atleast_1d(np.abs(y))
    out = np.empty_like(a)
    small = a <= SERIES_LIMIT
    if np.any(small):
        out[small] = i0_series(a[small]) * np.exp(-a[small])
    if np.any(~small):
        out[~small] = i0e_integral(a[~small])
    return out.reshape(y.shape) if y.ndim else float(out[0])

def bessel_i0(y):
    """
    Modified Bessel function I0(y) = pi^-1 int_0^pi e^{y cos phi} d phi.

    Power series for |y| <= 15, scaled integral beyond. Values past the
    double-precision exponent range come back as +inf; use bessel_i0_checked
    to get the overflow signal explicitly.
    """
    value, _ = bessel_i0_checked(y)
    return value

def bessel_i0_checked(y):
    """Returns (I0(y), overflowed) where overflowed flags any saturated entry."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise DomainError("bessel_i0: argument must be finite")

    a = np.atleast_1d(np.abs(y))
    out = np.empty_like(a)
    small = a <= SERIES_LIMIT
    if np.any(small):
        out[small] = i0_series(a[small])
    big = ~small
    if np.any(big):
        with np.errstate(over="ignore"):
            out[big] = i0e_integral(a[big]) * np.exp(a[big])

    overflowed = bool(np.any(a > OVERFLOW_LIMIT))
    if overflowed:
        log.warning("bessel_i0: argument beyond %g saturates to inf", OVERFLOW_LIMIT)
        out[a > OVERFLOW_LIMIT] = np.inf
    return (out.reshape(y.shape) if y.ndim else float(out[0])), overflowed

def i0_quadrature(y):
    """Independent check value: adaptive quadrature of the defining integral."""
    y = float(y)
    value, _ = integrate.quad(lambda phi: math.exp(abs(y) * (math.cos(phi) - 1.0)), 0.0, math.pi,
                              epsabs=0.0, epsrel=1e-13, limit=200)
    return value / math.pi * math.exp(abs(y))

# ##############################################################################
#                                                                              #
#                                GaussParams                                   #
#                                                                              #
# ##############################################################################

@dataclass
class GaussParams:
    """
    Parameters of the integrals  e^{(a+eps)|v|^2} e^{-b|v-w|^2}.

    a and eps may be zero or negative; only b > 0 and a + eps < b are required.
    w has one component for the half-line (normal) identities and two for the
    plane (tangential) identities.
    """
    a: float
    b: float
    eps: float = 0.0
    w: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.a = float(self.a)
        self.b = float(self.b)
        self.eps = float(self.eps)
        self.w = np.atleast_1d(np.asarray(self.w, dtype=float))

        if not self.b > 0:
            raise DomainError(f"GaussParams: b must be positive (b={self.b})")
        if not self.a + self.eps < self.b:
            raise DomainError(f"GaussParams: need a + eps < b (a={self.a}, eps={self.eps}, b={self.b})")
        if self.eps < 0:
            raise DomainError(f"GaussParams: eps must be nonnegative (eps={self.eps})")
        if self.w.shape not in [(1,), (2,)]:
            raise DomainError(f"GaussParams: w must have 1 or 2 components (got {self.w.shape})")

    @property
    def dim(self):
        return self.w.shape[0]

    ## b - a - eps
    @property
    def gap(self):
        return self.b - self.a - self.eps

    @property
    def w2(self):
        return float(np.dot(self.w, self.w))

    ## log of the whole-range closed form, b/gap * exp((a+eps) b / gap * |w|^2)
    def log_closed_form(self):
        return math.log(self.b / self.gap) + (self.a + self.eps) * self.b / self.gap * self.w2

    ## peak location b w / gap of the completed square
    def center(self):
        return self.b * self.w / self.gap

    def __str__(self):
        return f"GaussParams(a={self.a}, b={self.b}, eps={self.eps}, w={self.w.tolist()})"

def _require_dim(p, dim, op):
    if p.dim != dim:
        raise DomainError(f"{op}: w must have {dim} component(s), got {p.dim}")

def _require_delta(delta, op):
    if not 0.0 < delta < 1.0:
        raise DomainError(f"{op}: delta must lie in (0, 1), got {delta}")

# ##############################################################################
#                                                                              #
#                         Closed forms (plane, R^2)                            #
#                                                                              #
# ##############################################################################

## (b/pi) int_{R^2} e^{(a+eps)|v|^2} e^{-b|v-w|^2} dv in closed form
def gauss_plane_integral(p):
    _require_dim(p, 2, "gauss_plane_integral")
    return math.exp(p.log_closed_form())

## closed-form bound on the same integral restricted to |v - b w/gap| > 1/delta
def gauss_plane_tail(p, delta):
    _require_dim(p, 2, "gauss_plane_tail")
    _require_delta(delta, "gauss_plane_tail")
    return math.exp(-p.gap / delta**2 + p.log_closed_form())

# ##############################################################################
#                                                                              #
#                      Closed forms (half-line, Rice type)                     #
#                                                                              #
# ##############################################################################

## 2b int_0^inf v e^{(a+eps)v^2} e^{-bv^2} e^{-bw^2} I0(2bvw) dv in closed form
def gauss_halfline_rice_integral(p):
    _require_dim(p, 1, "gauss_halfline_rice_integral")
    if p.w[0] < 0:
        raise DomainError("gauss_halfline_rice_integral: w must be nonnegative")
    return math.exp(p.log_closed_form())

def gauss_halfline_head_bound(p, delta):
    _require_delta(delta, "gauss_halfline_head_bound")
    return delta * gauss_halfline_rice_integral(p)

def gauss_halfline_shifted_tail_bound(p, delta):
    _require_delta(delta, "gauss_halfline_shifted_tail_bound")
    return math.exp(-p.gap / (4.0 * delta**2)) * gauss_halfline_rice_integral(p)

# ##############################################################################
#                                                                              #
#                             Quadrature oracles                               #
#                                                                              #
# ##############################################################################

## ln(1e18): integrand is cut where it falls below 1e-18 of its peak
TRUNCATION_DECADES = 41.45

def _refined_trapezoid(evaluate, n0=64, rtol=1e-9, max_level=5):
    """
    Fixed-grid trapezoid with Richardson-style check: double the node count
    until two successive values agree to rtol.
    """
    n = n0
    previous = evaluate(n)
    for _ in range(max_level):
        n *= 2
        current = evaluate(n)
        if abs(current - previous) <= rtol * abs(current):
            return current
        previous = current
    log.warning("refined trapezoid stopped at %d nodes (last change %.3g)", n,
                abs(current - previous) / max(abs(current), 1e-300))
    return current

def _plane_integrand(p, v1, v2):
    r2 = v1 * v1 + v2 * v2
    d2 = (v1 - p.w[0])**2 + (v2 - p.w[1])**2
    return p.b / math.pi * np.exp((p.a + p.eps) * r2 - p.b * d2)

def plane_quadrature(p):
    """Tensor-product trapezoid of the plane integral over a box around the peak."""
    _require_dim(p, 2, "plane_quadrature")
    c = p.center()
    half = math.sqrt(TRUNCATION_DECADES / p.gap)

    def evaluate(n):
        x = np.linspace(c[0] - half, c[0] + half, n + 1)
        y = np.linspace(c[1] - half, c[1] + half, n + 1)
        X, Y = np.meshgrid(x, y, indexing="ij")
        inner = integrate.trapezoid(_plane_integrand(p, X, Y), y, axis=1)
        return float(integrate.trapezoid(inner, x))

    return _refined_trapezoid(evaluate)

def plane_tail_quadrature(p, delta):
    """
    The plane integrand integrated over |v - b w/gap| > 1/delta, in polar
    coordinates around the peak: periodic trapezoid in angle, adaptive
    quadrature in radius.
    """
    _require_dim(p, 2, "plane_tail_quadrature")
    _require_delta(delta, "plane_tail_quadrature")
    c = p.center()

    def ring(rho):
        def evaluate(n):
            phi = np.arange(n) * (2.0 * math.pi / n)
            f = _plane_integrand(p, c[0] + rho * np.cos(phi), c[1] + rho * np.sin(phi))
            return 2.0 * math.pi * float(np.mean(f))
        return rho * _refined_trapezoid(evaluate, rtol=1e-12)

    value, _ = integrate.quad(ring, 1.0 / delta, np.inf, epsabs=0.0, epsrel=1e-10, limit=200)
    return value

def _halfline_integrand(p):
    b, w = p.b, float(p.w[0])
    s = p.a + p.eps - b

    def f(v):
        y = 2.0 * b * v * w
        # log-space: e^{-b w^2} I0(y) = e^{-b w^2 + y} i0e(y)
        return 2.0 * b * v * math.exp(s * v * v - b * w * w + y) * bessel_i0e(y)
    return f

def _quad(f, lo, hi):
    value, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-12, limit=400)
    return value

def halfline_quadrature(p):
    """Adaptive quadrature of the half-line Rice-type integral."""
    _require_dim(p, 1, "halfline_quadrature")
    f = _halfline_integrand(p)
    c = float(p.center()[0])
    hi = c + math.sqrt(TRUNCATION_DECADES / p.gap) + 1.0
    if c > 0:
        return _quad(f, 0.0, c) + _quad(f, c, hi)
    return _quad(f, 0.0, hi)

def gauss_halfline_truncations(p, delta, mode):
    """
    Numeric value of the half-line integral restricted to (0, delta)
    (mode "head") or to (b w/gap + 1/delta, inf) (mode "shifted_tail").

    Contract checked by callers: head <= delta * closed form (for
    delta * gap <= 1) and shifted_tail <= exp(-gap / (4 delta^2)) * closed form.
    """
    _require_dim(p, 1, "gauss_halfline_truncations")
    _require_delta(delta, "gauss_halfline_truncations")
    f = _halfline_integrand(p)
    if mode == "head":
        return _quad(f, 0.0, delta)
    elif mode == "shifted_tail":
        lo = float(p.center()[0]) + 1.0 / delta
        hi = lo + math.sqrt(TRUNCATION_DECADES / p.gap) + 1.0
        return _quad(f, lo, hi)
    raise DomainError(f"gauss_halfline_truncations: unknown mode {mode}")

def rice_normal_mass(u_perp, r_perp):
    """
    (2/r) int_0^inf v e^{-v^2/r} e^{-(1-r)u^2/r} I0(2 sqrt(1-r) v u / r) dv,
    which equals one for every u and 0 < r <= 1.
    """
    if not 0.0 < r_perp <= 1.0:
        raise DomainError(f"rice_normal_mass: r_perp must lie in (0, 1], got {r_perp}")
    u = abs(float(u_perp))
    k = math.sqrt(1.0 - r_perp)
    p = GaussParams(a=0.0, b=1.0 / r_perp, eps=0.0, w=[k * u])
    # with b = 1/r and w = sqrt(1-r) u the integrand above is exactly the
    # half-line integrand of p, so this is an independent normalization check
    return halfline_quadrature(p)
