"""
Stochastic back-time cycles.

Going backward from (t, x, v) the characteristic flies x - v (t - s) until it
meets the wall at (t_1, x_1). There the previous velocity is conditioned by

    d sigma(v_1, v_0) = R(-v_0 -> -v_1) dv_1

so -v_1 is a re-emission of the incident velocity -v_0, and the cycle goes on
from (t_1, x_1, v_1) until t_k <= 0 or k reaches k_max.
"""

import math
import logging

from dataclasses import dataclass, field

import numpy as np

from . import utils
from . import wall
from . import geometry
from . import theorem_constants
from .BackTimeCycle import BackTimeCycle, ReachedDatum, Truncated
from .KineticResponse import DomainError, ConsistencyError

log = logging.getLogger(__name__)

## second element of every cycle stream key
STREAM_CYCLES = 1

K_MAX_DEFAULT = 64

def dsigma_sample(model, v_prev, normals, temps, rng):
    """
    Draw v_k from d sigma(., v_{k-1}) for rows of v_prev (N, 3) at wall points
    with outward normals (N, 3): -v_k is the re-emission of -v_{k-1}, so the
    result has n.v_k > 0.
    """
    return -wall.reflect(model, -np.asarray(v_prev, dtype=float), normals, temps, rng)

def sample_cycle(t, x, v, dom, model, k_max=K_MAX_DEFAULT, rng=None):
    """
    One back-time cycle from (t, x, v), run as a cycle_block of one trial.
    Returns a BackTimeCycle terminated by ReachedDatum(k) or Truncated(k_max).
    """
    if k_max <= 0:
        raise DomainError(f"sample_cycle: k_max must be positive (got {k_max})")
    if rng is None:
        rng = np.random.default_rng()
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    geometry.check_start(x, -v, dom, "sample_cycle")

    cycle = cycle_block(t, x[None, :], v[None, :], dom, model, k_max, rng, keep=True).cycles[0]
    if cycle.truncated():
        log.debug("sample_cycle: truncated at k_max %d (t_k %.6g)", k_max, cycle.times[-1])
    return cycle

# ##############################################################################
#                                                                              #
#                                  Census                                      #
#                                                                              #
# ##############################################################################

def in_velocity_set(v, n, delta):
    """|v.n| > delta and |v| <= 1/delta, row by row."""
    return (np.abs(utils.dot(v, n)) > delta) & (utils.norm(v) <= 1.0 / delta)

@dataclass
class CensusResult:
    members: np.ndarray     # bool per interaction k = 1..hits
    count: int
    min_gap: float          # smallest t_j - t_j' over consecutive members (inf with < 2 members)

def velocity_set_census(cycle, delta):
    if not 0.0 < delta < 1.0:
        raise DomainError(f"velocity_set_census: delta must lie in (0, 1) (got {delta})")
    if cycle.hits == 0:
        return CensusResult(members=np.zeros(0, dtype=bool), count=0, min_gap=math.inf)

    members = in_velocity_set(np.array(cycle.velocities), np.array(cycle.normals), delta)
    times = np.array(cycle.times)[members]
    min_gap = float(np.min(-np.diff(times))) if len(times) > 1 else math.inf
    return CensusResult(members=members, count=int(np.count_nonzero(members)), min_gap=min_gap)

# ##############################################################################
#                                                                              #
#                              Decay statistics                                #
#                                                                              #
# ##############################################################################

@dataclass
class BlockTally:
    hits: np.ndarray            # per trial: interactions with t_k > 0 (capped at k_max)
    truncated: int
    census_in: int = 0
    census_out: int = 0
    min_gap: float = math.inf
    cycles: list = None

def _assemble(t, x0, v0, k_max, hits, alive, last_time, steps):
    """BackTimeCycles from the per-step arrays (k_max, N, ...) of cycle_block."""
    times, points, velocities, normals = steps
    out = []
    for i in range(len(x0)):
        cycle = BackTimeCycle(t=float(t), x=x0[i], v=v0[i])
        for k in range(hits[i]):
            cycle.append(times[k, i], points[k, i], velocities[k, i], normals[k, i])
        if alive[i]:
            cycle.termination = Truncated(k_max)
        else:
            cycle.termination = ReachedDatum(int(hits[i]))
            cycle.last_time = float(last_time[i])
        out.append(cycle)
    return out

def cycle_block(t, x, v, dom, model, k_max, rng, delta=None, keep=False):
    """
    Run len(x) back-time cycles from time t side by side.

    The tally always carries the per-trial hit counts. With delta each cycle
    goes through velocity_set_census and the census totals are filled in;
    with keep the BackTimeCycles themselves are returned in tally.cycles.
    """
    if k_max <= 0:
        raise DomainError(f"cycle_block: k_max must be positive (got {k_max})")
    x0 = np.array(x, dtype=float)
    v0 = np.array(v, dtype=float)
    n = len(x0)
    x, v = x0.copy(), v0.copy()
    t_now = np.full(n, float(t))
    alive = np.ones(n, dtype=bool)
    hits = np.zeros(n, dtype=int)
    last_time = np.full(n, math.nan)
    times = np.full((k_max, n), math.nan)
    points = np.full((k_max, n, 3), math.nan)
    velocities = np.full((k_max, n, 3), math.nan)
    normals = np.full((k_max, n, 3), math.nan)

    for k in range(k_max):
        idx = np.flatnonzero(alive)
        if len(idx) == 0:
            break

        t_k, wall_points, wall_normals = geometry.back_time_batch(t_now[idx], x[idx], v[idx], dom)
        reached = ~(t_k > 0.0)
        alive[idx[reached]] = False
        last_time[idx[reached]] = t_k[reached]

        moving = ~reached
        idx = idx[moving]
        if len(idx) == 0:
            break
        wall_points, wall_normals = wall_points[moving], wall_normals[moving]
        temps = np.atleast_1d(dom.wall_temperature(wall_points))

        v[idx] = dsigma_sample(model, v[idx], wall_normals, temps, rng)
        x[idx] = dom.wrap(wall_points)
        t_now[idx] = t_k[moving]
        hits[idx] = k + 1
        times[k, idx] = t_now[idx]
        points[k, idx] = x[idx]
        velocities[k, idx] = v[idx]
        normals[k, idx] = wall_normals

    tally = BlockTally(hits=hits, truncated=int(np.count_nonzero(alive)))
    if delta is None and not keep:
        return tally

    built = _assemble(t, x0, v0, k_max, hits, alive, last_time, (times, points, velocities, normals))
    if delta is not None:
        for cycle in built:
            census = velocity_set_census(cycle, delta)
            tally.census_in += census.count
            tally.census_out += cycle.hits - census.count
            tally.min_gap = min(tally.min_gap, census.min_gap)
    if keep:
        tally.cycles = built
    return tally

@dataclass
class CycleStats:
    k: np.ndarray
    trials: int
    hits: np.ndarray            # trials with t_k > 0, per k
    p_hat: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    truncated: int = 0
    census_in: int = 0
    census_out: int = 0
    min_gap: float = math.inf
    delta: float = None
    hypothesis: object = None
    violations: list = field(default_factory=list)

    HEADER = ["k", "trials", "hits", "p_hat", "ci_low", "ci_high"]

    @property
    def monotone(self):
        return not self.violations

    ## fitted c in min_gap >= c delta^3
    @property
    def gap_constant(self):
        if self.delta is None or not math.isfinite(self.min_gap):
            return math.inf
        return self.min_gap / self.delta ** 3

    def rows(self):
        return [[str(int(k)), str(self.trials), str(int(h)),
                 utils.format_float(p), utils.format_float(lo), utils.format_float(hi)]
                for k, h, p, lo, hi in zip(self.k, self.hits, self.p_hat, self.ci_low, self.ci_high)]

def significant_increases(hits, trials, sigmas=3.0):
    """Indices k where P(t_{k+1} > 0) exceeds P(t_k > 0) by more than sigmas combined errors."""
    p = np.asarray(hits, dtype=float) / trials
    out = []
    for i in range(len(p) - 1):
        spread = math.hypot(utils.binomial_sigma(p[i], trials), utils.binomial_sigma(p[i + 1], trials))
        if p[i + 1] - p[i] > sigmas * max(spread, 1.0 / trials):
            out.append(i + 1)
    return out

def _hypothesis(config, model):
    pair = model.accommodation()
    if pair is None:
        return None
    try:
        return theorem_constants.check_hypotheses(config.T_M, config.min_Tw, pair, config.theta)
    except DomainError as e:
        log.warning("interaction_decay: hypothesis check skipped: %s", e)
        return None

def interaction_decay(config, x=None, v=None):
    """
    Estimate P(t_k > 0), k = 1..k_max, at horizon config.cycle_t.

    Anchors are x uniform in the domain and v from the Maxwellian at T_M,
    unless a fixed anchor (x, v) is given. Trials run in blocks of
    config.block_size, each on the stream (seed, STREAM_CYCLES, block).
    """
    dom = config.build_domain()
    model = config.boundary_model()
    trials, k_max, t = config.trials, config.k_max, config.cycle_t
    sd = math.sqrt(config.T_M)

    def run(block, start, stop):
        rng = utils.stream(config.seed, STREAM_CYCLES, block)
        n = stop - start
        xs = dom.sample_uniform(n, rng) if x is None else np.tile(np.asarray(x, dtype=float), (n, 1))
        vs = rng.normal(0.0, sd, (n, 3)) if v is None else np.tile(np.asarray(v, dtype=float), (n, 1))
        return cycle_block(t, xs, vs, dom, model, k_max, rng, delta=config.delta)

    tallies = utils.run_blocks(run, trials, config.block_size, config.threads)
    per_trial = np.concatenate([tally.hits for tally in tallies])

    k = np.arange(1, k_max + 1)
    hits = np.array([np.count_nonzero(per_trial >= kk) for kk in k])
    intervals = [utils.wilson_interval(h, trials) for h in hits]

    stats = CycleStats(k=k, trials=trials, hits=hits, p_hat=hits / trials,
                       ci_low=np.array([lo for lo, _ in intervals]),
                       ci_high=np.array([hi for _, hi in intervals]),
                       truncated=sum(tally.truncated for tally in tallies),
                       census_in=sum(tally.census_in for tally in tallies),
                       census_out=sum(tally.census_out for tally in tallies),
                       min_gap=min(tally.min_gap for tally in tallies),
                       delta=config.delta,
                       hypothesis=_hypothesis(config, model))

    stats.violations = significant_increases(hits, trials)
    if stats.violations:
        raise ConsistencyError(f"interaction_decay: P(t_k > 0) increases significantly at k {stats.violations}")
    if stats.truncated:
        log.info("interaction_decay: %d of %d cycles truncated at k_max %d", stats.truncated, trials, k_max)

    log.info("interaction_decay: %s in %s, t %g, %d trials, P(t_1 > 0) %.6g",
             model, dom, t, trials, stats.p_hat[0])
    return stats
