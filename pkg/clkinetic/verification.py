"""
Self-checks run by the verify command: every closed form in analytics and
wall against its independent quadrature or sampler, plus the collision map
and ladder identities. Each check yields a CheckResult; the command prints
them as a PASS/FAIL table and writes them as CSV.
"""

import math
import time
import logging

from dataclasses import dataclass

import numpy as np

from . import utils
from . import wall
from . import analytics
from . import collision
from . import theorem_constants
from .WallPatch import WallPatch
from .AccommodationPair import AccommodationPair

log = logging.getLogger(__name__)

STREAM_VERIFY = 5

@dataclass
class CheckResult:
    suite: str
    name: str
    value: float        # worst defect observed
    limit: float
    draws: int
    seconds: float = 0.0

    HEADER = ["suite", "check", "status", "worst", "limit", "draws", "seconds"]

    @property
    def passed(self):
        return bool(self.value <= self.limit)

    def row(self):
        return [self.suite, self.name, "PASS" if self.passed else "FAIL",
                utils.format_float(self.value), utils.format_float(self.limit),
                str(self.draws), "%.3f" % self.seconds]

def _timed(suite, name, limit, draws, func):
    start = time.perf_counter()
    value = float(func())
    result = CheckResult(suite, name, value, limit, draws, time.perf_counter() - start)
    log.info("%-10s %-34s %s (worst %.3g, limit %.3g)", suite, name,
             "PASS" if result.passed else "FAIL", value, limit)
    return result

def _rel(a, b):
    return abs(a - b) / abs(b)

# ##############################################################################
#                                                                              #
#                               Random draws                                   #
#                                                                              #
# ##############################################################################

def random_pair(rng, r_lo=0.05):
    return AccommodationPair(rng.uniform(r_lo, 1.0), rng.uniform(r_lo, 2.0 - r_lo))

def random_patch(rng, T_lo=0.5, T_hi=2.0):
    normal = utils.sample_unit_sphere(1, rng)[0]
    return WallPatch(rng.uniform(T_lo, T_hi), normal=normal)

def random_incident(patch, rng, min_perp=0.1):
    """Incident velocity with n.u >= min_perp and moderate tangential part."""
    par = rng.normal(0.0, 1.0, 2)
    perp = min_perp + abs(rng.normal(0.0, 1.0))
    return patch.compose(np.asarray(perp), par)

def random_plane_params(rng):
    a = rng.uniform(-1.0, 0.5)
    b = rng.uniform(1.0, 3.0)
    eps = rng.uniform(0.0, 0.2)
    return analytics.GaussParams(a=a, b=b, eps=eps, w=rng.normal(0.0, 1.0, 2))

def random_halfline_params(rng):
    a = rng.uniform(-1.0, 0.5)
    b = rng.uniform(1.0, 3.0)
    eps = rng.uniform(0.0, 0.2)
    return analytics.GaussParams(a=a, b=b, eps=eps, w=[abs(rng.normal(0.0, 1.0))])

# ##############################################################################
#                                                                              #
#                                   Suites                                     #
#                                                                              #
# ##############################################################################

def analytics_suite(rng, draws=10, tail_draws=20):
    suite = "analytics"
    out = []

    def i0():
        ys = np.concatenate([np.linspace(-30.0, 30.0, 61), [1e-8, 14.999, 15.001, 200.0]])
        return max(_rel(analytics.bessel_i0(y), analytics.i0_quadrature(y)) for y in ys)
    out.append(_timed(suite, "bessel_i0 vs quadrature", 1e-12, 65, i0))

    def plane():
        return max(_rel(analytics.gauss_plane_integral(p), analytics.plane_quadrature(p))
                   for p in (random_plane_params(rng) for _ in range(draws)))
    out.append(_timed(suite, "plane closed form", 1e-6, draws, plane))

    def halfline():
        return max(_rel(analytics.gauss_halfline_rice_integral(p), analytics.halfline_quadrature(p))
                   for p in (random_halfline_params(rng) for _ in range(draws)))
    out.append(_timed(suite, "half-line closed form", 1e-6, draws, halfline))

    # bound checks report max(numeric / bound); anything at or below one passes
    def plane_tail():
        worst = 0.0
        for _ in range(tail_draws):
            p = random_plane_params(rng)
            delta = rng.uniform(0.3, 0.9)
            worst = max(worst, analytics.plane_tail_quadrature(p, delta) / analytics.gauss_plane_tail(p, delta))
        return worst
    out.append(_timed(suite, "plane tail bound (ratio)", 1.0 + 1e-8, tail_draws, plane_tail))

    def halfline_bounds():
        worst = 0.0
        for _ in range(tail_draws):
            p = random_halfline_params(rng)
            # the head bound needs delta * gap <= 1
            delta = rng.uniform(0.05, min(0.9, 1.0 / p.gap))
            head = analytics.gauss_halfline_truncations(p, delta, "head")
            tail = analytics.gauss_halfline_truncations(p, delta, "shifted_tail")
            worst = max(worst,
                        head / analytics.gauss_halfline_head_bound(p, delta),
                        tail / analytics.gauss_halfline_shifted_tail_bound(p, delta))
        return worst
    out.append(_timed(suite, "half-line truncation bounds (ratio)", 1.0 + 1e-8, tail_draws, halfline_bounds))

    def rice():
        return max(abs(analytics.rice_normal_mass(rng.uniform(0.0, 3.0), rng.uniform(0.05, 1.0)) - 1.0)
                   for _ in range(draws))
    out.append(_timed(suite, "Rice normal mass", 1e-8, draws, rice))
    return out

def wall_suite(rng, resolution="medium", draws=25, pairs=1000, samples=200000):
    suite = "wall"
    out = []

    def normalization():
        worst = 0.0
        for _ in range(draws):
            patch = random_patch(rng)
            r = random_pair(rng)
            worst = max(worst, abs(wall.verify_normalization(random_incident(patch, rng), patch, r, resolution) - 1.0))
        return worst
    out.append(_timed(suite, "kernel normalization", 1e-5, draws, normalization))

    def reciprocity():
        worst = 0.0
        for _ in range(10):
            patch = random_patch(rng)
            r = random_pair(rng)
            u = np.array([random_incident(patch, rng) for _ in range(pairs // 10)])
            v = np.array([-random_incident(patch, rng) for _ in range(pairs // 10)])
            worst = max(worst, wall.verify_reciprocity(u, v, patch, r))
        return worst
    out.append(_timed(suite, "reciprocity", 1e-12, pairs, reciprocity))

    def pushforward():
        worst = 0.0
        for _ in range(3):
            patch = random_patch(rng)
            r = random_pair(rng, r_lo=0.2)
            T0 = rng.uniform(0.5, 2.0)
            pf = wall.cl_pushforward_maxwellian(patch, r, T0)
            v = -random_incident(patch, rng, min_perp=0.3)
            worst = max(worst, _rel(wall.pushforward_quadrature(v, patch, r, T0, resolution), float(pf.density(v))))
        return worst
    out.append(_timed(suite, "Maxwellian push-forward", 1e-6, 3, pushforward))

    def flux():
        worst = 0.0
        for _ in range(5):
            patch = random_patch(rng)
            pf = wall.cl_pushforward_maxwellian(patch, random_pair(rng), rng.uniform(0.5, 2.0))
            worst = max(worst, abs(pf.flux_integral() - 1.0))
        return worst
    out.append(_timed(suite, "push-forward flux", 1e-8, 5, flux))

    def net_flux():
        worst = 0.0
        for _ in range(3):
            patch = random_patch(rng)
            worst = max(worst, abs(wall.pushforward_flux_mismatch(patch, random_pair(rng, r_lo=0.2),
                                                                 rng.uniform(0.5, 2.0), resolution)))
        return worst
    out.append(_timed(suite, "linearized source net flux", 1e-6, 3, net_flux))

    def collapse():
        worst = 0.0
        for _ in range(100):
            patch = random_patch(rng)
            pf = wall.cl_pushforward_maxwellian(patch, random_pair(rng), patch.temperature)
            worst = max(worst, _rel(pf.T_par, patch.temperature), _rel(pf.T_perp, patch.temperature))
        return worst
    out.append(_timed(suite, "equilibrium collapse", 1e-12, 100, collapse))

    # sample means against closed-form moments, in standard errors
    def moments():
        worst = 0.0
        for _ in range(5):
            patch = random_patch(rng)
            r = random_pair(rng)
            u = random_incident(patch, rng)
            v = wall.cl_sample(np.tile(u, (samples, 1)), patch, r, rng)
            exact = wall.cl_moments(u, patch, r)
            par = v - np.outer(v @ patch.normal, patch.normal)
            par_sq = utils.dot(par, par)
            perp_sq = (v @ patch.normal) ** 2
            for sample, target in ((par_sq, exact.mean_par_square), (perp_sq, exact.mean_perp_square)):
                se = sample.std(ddof=1) / math.sqrt(samples)
                worst = max(worst, abs(sample.mean() - target) / se)
        return worst
    out.append(_timed(suite, "sampler second moments (sigmas)", 4.0, 5, moments))
    return out

def collision_suite(rng, triples=100000):
    suite = "collision"

    def conservation():
        u = rng.normal(0.0, 2.0, (triples, 3))
        v = rng.normal(0.0, 2.0, (triples, 3))
        omega = utils.sample_unit_sphere(triples, rng)
        u2, v2 = collision.post_collision(u, v, omega)
        scale = 1.0 + utils.dot(u, u) + utils.dot(v, v)
        momentum = utils.norm((u2 + v2) - (u + v)) / np.sqrt(scale)
        energy = np.abs(utils.dot(u2, u2) + utils.dot(v2, v2) - utils.dot(u, u) - utils.dot(v, v)) / scale
        return max(float(momentum.max()), float(energy.max()))
    return [_timed(suite, "momentum and energy", 1e-12, triples, conservation)]

def theorem_suite(rng, draws=100):
    suite = "theorem"

    def ladder():
        worst = 0.0
        for _ in range(draws):
            xi = rng.uniform(1.0, 10.0)
            T_M = rng.uniform(0.1, 10.0)
            r_min = rng.uniform(0.05, 1.0)
            l = int(rng.integers(1, 31))
            closed = theorem_constants.t_ladder(l + 1, 1, xi, T_M, r_min)
            stepped = theorem_constants.t_ladder_recurrence(l + 1, 1, xi, T_M, r_min)
            worst = max(worst, _rel(closed, stepped))
        return worst
    return [_timed(suite, "ladder closed form vs recurrence", 1e-14, draws, ladder)]

SUITES = {
    "analytics": analytics_suite,
    "wall":      wall_suite,
    "collision": collision_suite,
    "theorem":   theorem_suite,
}

def run_suites(seed, names=None, resolution="medium"):
    """Run the named suites (all by default) on streams (seed, STREAM_VERIFY, i)."""
    names = list(SUITES) if names is None else names
    results = []
    for i, name in enumerate(names):
        rng = utils.stream(seed, STREAM_VERIFY, i)
        if name == "wall":
            results.extend(SUITES[name](rng, resolution=resolution))
        else:
            results.extend(SUITES[name](rng))
    return results

def format_table(results):
    width = max(len(r.name) for r in results)
    lines = [f"{'suite':<10} {'check':<{width}} status  worst"]
    for r in results:
        lines.append(f"{r.suite:<10} {r.name:<{width}} {'PASS' if r.passed else 'FAIL':<7} {r.value:.3g} (limit {r.limit:.3g})")
    return lines
