"""
Iteration scheme on a slab 0 < x1 < L with a wall at each face.

Each sweep m -> m + 1 solves the linear problem

    d_t F' + v1 d_x F' + nu(F) F' = Q_gain(F, F)

along characteristics, with F = F^m frozen in the collision terms and the
wall inflow of F' built from the outgoing trace of F (lagged wall closure;
F^0 = F_0 at every time). The weighted field is
h = e^{(theta - t)|v|^2} F / sqrt(mu), mu = e^{-|v|^2 / 2 T_M}.

Time is measured in mean free flights: the collision operator is scaled by
density, by default 1 / <nu> of the Maxwellian at T_M.
"""

import math
import logging

from dataclasses import dataclass, field

import numpy as np

from . import utils
from . import wall
from . import theorem_constants
from .WallPatch import WallPatch
from .BoundaryModel import BoundaryModel
from .Domain import Domain
from .collision import (CollisionModel, VelocityGrid, GridDistribution, gamma_gain, h_weight,
                        mean_collision_frequency)
from .KineticResponse import ConfigurationError, ConsistencyError, DivergenceError, DomainError

log = logging.getLogger(__name__)

## second element of every solver stream key
STREAM_SLAB = 3

DEFAULT_T_END = 0.1

## relative amplitude of the perturbed datum, and the beam's temperature ratio
PERTURBATION = 0.1
BEAM_AMPLITUDE = 0.1
BEAM_TEMPERATURE = 0.5

SINKHORN_TOL = 1e-13
SINKHORN_MAX_ITER = 2000

# ##############################################################################
#                                                                              #
#                             Wall scattering                                  #
#                                                                              #
# ##############################################################################

@dataclass
class WallScattering:
    """
    Discrete re-emission at one wall: matrix[a, b] is the probability that a
    molecule striking with node out_idx[a] leaves with node in_idx[b].
    """
    normal: np.ndarray
    temperature: float
    out_idx: np.ndarray
    in_idx: np.ndarray
    matrix: np.ndarray
    raw_defect: float = 0.0

    def inflow(self, trace, grid):
        """F at the incoming nodes from F at the outgoing nodes, flux preserving."""
        out_speed = np.abs(grid.points[self.out_idx] @ self.normal)
        in_speed = np.abs(grid.points[self.in_idx] @ self.normal)
        return (trace * out_speed) @ self.matrix / in_speed

def _node_indices(grid, vs):
    i = np.rint((vs + grid.V_max) / grid.dv).astype(int)
    if np.any(i < 0) or np.any(i >= grid.M):
        raise ConfigurationError("scattering target falls outside the velocity grid")
    return np.ravel_multi_index((i[:, 0], i[:, 1], i[:, 2]), grid.shape)

def _permutation(grid, out_idx, in_idx, targets):
    position = {int(j): b for b, j in enumerate(in_idx)}
    matrix = np.zeros((len(out_idx), len(in_idx)))
    for a, j in enumerate(_node_indices(grid, targets)):
        matrix[a, position[int(j)]] = 1.0
    return matrix

def sinkhorn_balance(K, row_target, col_target):
    """
    Scale K (nonnegative) as diag(a) K diag(b) so its row sums equal
    row_target and column sums equal col_target.
    """
    G = np.array(K, dtype=float)
    for it in range(SINKHORN_MAX_ITER):
        rows = G.sum(axis=1)
        G *= (row_target / np.where(rows > 0, rows, 1.0))[:, None]
        cols = G.sum(axis=0)
        G *= (col_target / np.where(cols > 0, cols, 1.0))[None, :]
        err = np.max(np.abs(G.sum(axis=1) - row_target) / row_target)
        if err < SINKHORN_TOL:
            log.debug("sinkhorn_balance: converged in %d iterations", it + 1)
            break
    else:
        log.warning("sinkhorn_balance: row error %.3g after %d iterations", err, SINKHORN_MAX_ITER)
    return G

def scattering_matrix(model, patch, grid):
    """
    WallScattering for a BoundaryModel at a wall with constant temperature.
    Kernels with a density are tabulated, then balanced so that every row is a
    probability vector and the wall Maxwellian's outgoing flux is mapped onto
    its incoming flux.
    """
    n = patch.normal
    proj = grid.points @ n
    out_idx = np.flatnonzero(proj > 0.0)
    in_idx = np.flatnonzero(proj < 0.0)
    u = grid.points[out_idx]
    v = grid.points[in_idx]

    if model.tag != BoundaryModel.MAXWELL and model.deterministic():
        targets = -u if model.accommodation().is_bounce_back() else patch.mirror(u)
        return WallScattering(n, patch.temperature, out_idx, in_idx, _permutation(grid, out_idx, in_idx, targets))

    pair = model.accommodation() if model.tag != BoundaryModel.MAXWELL else None
    if pair is None or pair.is_diffuse():
        log_R = np.log(np.broadcast_to(wall.diffuse_density(v, patch), (len(u), len(v))))
    else:
        log_R = wall.cl_log_density(u[:, None, :], v[None, :, :], patch, pair)
    K = np.exp(log_R) * grid.weight

    rows = K.sum(axis=1)
    if np.any(rows <= 0.0):
        raise ConfigurationError(f"scattering matrix for {model} has empty rows; refine the velocity grid")
    raw_defect = float(np.max(np.abs(rows - 1.0)))
    if raw_defect > 1e-4:
        log.warning("scattering matrix for %s: raw normalization defect %.3g on %s", model, raw_defect, grid)
    else:
        log.debug("scattering matrix for %s: raw normalization defect %.3g", model, raw_defect)

    T = patch.temperature
    phi = np.exp(-utils.dot(u, u) / (2.0 * T)) * (u @ n)
    psi = np.exp(-utils.dot(v, v) / (2.0 * T)) * np.abs(v @ n)
    psi *= phi.sum() / psi.sum()
    G = sinkhorn_balance(K * phi[:, None], phi, psi)
    matrix = G / phi[:, None]

    if model.tag == BoundaryModel.MAXWELL:
        specular = _permutation(grid, out_idx, in_idx, patch.mirror(u))
        matrix = model.c * matrix + (1.0 - model.c) * specular
    return WallScattering(n, T, out_idx, in_idx, matrix, raw_defect)

# ##############################################################################
#                                                                              #
#                               Problem setup                                  #
#                                                                              #
# ##############################################################################

class SlabProblem:
    """Everything fixed across iterations: grids, time step, walls, streams."""

    def __init__(self, width, wall_temps, model, collision_model, grid, nx, t_end,
                 theta, T_M, seed=0, n_mc=64, cfl=1.0, density=None, threads=1):
        if cfl > 1.0:
            raise ConfigurationError(f"CFL condition violated: cfl {cfl} > 1")
        if not 0.0 < theta < 1.0 / (4.0 * T_M):
            raise ConfigurationError(f"theta must lie in (0, 1/(4 T_M)) (got {theta})")
        self.width = float(width)
        self.model = model
        self.collision_model = collision_model
        self.grid = grid
        self.nx = int(nx)
        self.theta = float(theta)
        self.T_M = float(T_M)
        self.seed = int(seed)
        self.n_mc = int(n_mc)
        self.threads = int(threads)
        self.density = density if density is not None else 1.0 / mean_collision_frequency(T_M, collision_model)

        self.dx = self.width / self.nx
        self.x = (np.arange(self.nx) + 0.5) * self.dx
        v1 = grid.points[:, 0]
        dt = cfl * self.dx / np.max(np.abs(v1))
        self.Nt = max(1, int(math.ceil(t_end / dt - 1e-12)))
        self.dt = t_end / self.Nt
        self.t_end = float(t_end)
        self.times = np.arange(self.Nt + 1) * self.dt

        self.walls = (
            scattering_matrix(model, WallPatch(wall_temps[0], normal=(-1.0, 0.0, 0.0)), grid),
            scattering_matrix(model, WallPatch(wall_temps[1], normal=(1.0, 0.0, 0.0)), grid))

        self._prepare_characteristics(v1)
        self.sqrt_mu = np.sqrt(wall.global_maxwellian(grid.points, self.T_M))

    def _prepare_characteristics(self, v1):
        """Foot points x_i - v1 dt as two-point stencils on [0, x_0 .. x_{nx-1}, L]."""
        aug = np.concatenate([[0.0], self.x, [self.width]])
        foot = self.x[:, None] - v1[None, :] * self.dt
        self.cross = (foot < 0.0) | (foot > self.width)

        clipped = np.clip(foot, 0.0, self.width)
        j = np.clip(np.searchsorted(aug, clipped, side="right") - 1, 0, len(aug) - 2)
        self.left = j
        self.frac = (clipped - aug[j]) / (aug[j + 1] - aug[j])

        upstream = np.where(v1 > 0.0, self.x[:, None], self.width - self.x[:, None])
        with np.errstate(divide="ignore"):
            self.wall_time = np.where(self.cross, upstream / np.abs(v1)[None, :], 0.0)

    def h_of(self, F, t):
        return wall.weight_theta(self.grid.points, self.theta - t) * F / self.sqrt_mu

    def trace(self, F_t):
        """Outgoing F at each wall (first-cell values) for one time level (nx, Nv)."""
        return (F_t[0, self.walls[0].out_idx], F_t[-1, self.walls[1].out_idx])

    def inflow(self, F_t):
        out0, out1 = self.trace(F_t)
        return (self.walls[0].inflow(out0, self.grid), self.walls[1].inflow(out1, self.grid))

# ##############################################################################
#                                                                              #
#                              Initial data                                    #
#                                                                              #
# ##############################################################################

def initial_datum(kind, problem):
    """F_0 on (nx, Nv) for zero, equilibrium, perturbed or beam."""
    grid, T_M = problem.grid, problem.T_M
    mu = wall.maxwellian_density(grid.points, T_M)
    shape = (problem.nx, grid.size)
    if kind == "zero":
        return np.zeros(shape)
    if kind == "equilibrium":
        return np.broadcast_to(mu, shape).copy()
    if kind == "perturbed":
        modulation = 1.0 + PERTURBATION * np.cos(2.0 * math.pi * problem.x / problem.width)
        return modulation[:, None] * mu[None, :]
    if kind == "beam":
        center = np.array([math.sqrt(T_M), 0.0, 0.0])
        beam = BEAM_AMPLITUDE * wall.maxwellian_density(grid.points - center, BEAM_TEMPERATURE * T_M)
        return np.broadcast_to(beam, shape).copy()
    raise ConfigurationError(f"unknown datum {kind}")

# ##############################################################################
#                                                                              #
#                                 Iteration                                    #
#                                                                              #
# ##############################################################################

@dataclass
class IterationState:
    m: int
    F: np.ndarray               # (Nt + 1, nx, Nv)
    sup_h: float = 0.0

@dataclass
class SolveReport:
    sup_h: list = field(default_factory=list)
    diff: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    flux_residual: list = field(default_factory=list)
    C: float = None
    converged: bool = False
    iterations: int = 0
    mass_change: float = None
    raw_defects: tuple = ()
    hypothesis: object = None
    final: np.ndarray = None    # F at t_end, (nx, Nv)
    problem: object = None

    HEADER = ["m", "sup_h", "diff", "mass", "flux_residual"]

    def rows(self):
        return [[str(m + 1)] + [utils.format_float(x) for x in (s, d, ms, fr)]
                for m, (s, d, ms, fr) in enumerate(zip(self.sup_h, self.diff, self.mass, self.flux_residual))]

def _safe_rate(nu, dt):
    """(1 - e^{-nu dt}) / nu, equal to dt at nu = 0."""
    x = nu * dt
    small = np.abs(x) < 1e-12
    return np.where(small, dt, -np.expm1(-np.where(small, 1.0, x)) / np.where(nu == 0.0, 1.0, nu))

def collision_terms(F_cell, problem, rng, t=0.0):
    """
    (nu(F)(v), Q_gain(F, F)(v)) at every velocity node for one cell at time t,
    both scaled by density. The gain comes from gamma_gain on the h-field and
    is mapped back to F units; one (u, omega) sample set serves all nodes.
    """
    grid, T_M = problem.grid, problem.T_M
    if not np.any(F_cell):
        return np.zeros(grid.size), np.zeros(grid.size)

    h = GridDistribution(grid, problem.h_of(F_cell, t), T_ref=T_M)
    est = gamma_gain(h, grid.points, problem.collision_model, rng, problem.theta, s=t, T_M=T_M,
                     n_mc=problem.n_mc, density=problem.density)
    return est.nu, est.value / h_weight(grid.points, problem.theta, t, T_M)

def advance_iteration(state, problem, F0):
    """
    One sweep F^m -> F^{m+1} over the whole horizon. Collision samples for
    time level n and cell i come from the stream (seed, STREAM_SLAB, n, i),
    independent of m.
    """
    grid = problem.grid
    F_old = state.F
    Nv = grid.size
    F_new = np.empty_like(F_old)
    F_new[0] = F0

    # lagged closure: inflow for the new iterate from the old iterate's traces
    inflow = [problem.inflow(F_old[n]) for n in range(problem.Nt + 1)]
    w0, w1 = problem.walls

    scale = np.max(F0) if np.any(F0) else 1.0
    for n in range(problem.Nt):
        def cell(i, start, stop):
            rng = utils.stream(problem.seed, STREAM_SLAB, n, i)
            return collision_terms(F_old[n, i], problem, rng, problem.times[n])
        terms = utils.run_blocks(cell, problem.nx, 1, problem.threads)
        nu = np.stack([t[0] for t in terms])
        gain = np.stack([t[1] for t in terms])

        aug = np.zeros((problem.nx + 2, Nv))
        aug[1:-1] = F_new[n]
        aug[0, w0.in_idx] = inflow[n][0]
        aug[-1, w1.in_idx] = inflow[n][1]

        cols = np.arange(Nv)[None, :]
        foot = (1.0 - problem.frac) * aug[problem.left, cols] + problem.frac * aug[problem.left + 1, cols]
        result = foot * np.exp(-nu * problem.dt) + gain * _safe_rate(nu, problem.dt)

        if np.any(problem.cross):
            # characteristics that left a wall during the step
            wall_now = np.zeros((2, Nv))
            wall_next = np.zeros((2, Nv))
            wall_now[0, w0.in_idx], wall_now[1, w1.in_idx] = inflow[n]
            wall_next[0, w0.in_idx], wall_next[1, w1.in_idx] = inflow[n + 1]
            side = np.where(grid.points[:, 0] > 0.0, 0, 1)
            s = problem.wall_time
            frac = s / problem.dt
            value = frac * wall_now[side, np.arange(Nv)][None, :] + (1.0 - frac) * wall_next[side, np.arange(Nv)][None, :]
            crossed = value * np.exp(-nu * s) + gain * _safe_rate(nu, s)
            result = np.where(problem.cross, crossed, result)

        if np.min(result) < -1e-12 * scale:
            raise ConsistencyError(f"advance_iteration: negative density {np.min(result):.3g} at m {state.m + 1}, step {n + 1}")
        F_new[n + 1] = result

    sup_h = max(float(np.max(np.abs(problem.h_of(F_new[n], t)))) for n, t in enumerate(problem.times))
    return IterationState(m=state.m + 1, F=F_new, sup_h=sup_h)

def _diff_h(a, b, problem):
    return max(float(np.max(np.abs(problem.h_of(a.F[n] - b.F[n], t)))) for n, t in enumerate(problem.times))

def _mass(F_t, problem):
    return float(np.sum(F_t) * problem.grid.weight * problem.dx)

def _flux_residual(F_t, problem):
    """max over walls of |net flux| / one-sided outgoing flux at one time level."""
    grid = problem.grid
    out = []
    inflow = problem.inflow(F_t)
    for wall_scattering, trace, F_in in zip(problem.walls, problem.trace(F_t), inflow):
        n = wall_scattering.normal
        out_flux = np.sum(trace * (grid.points[wall_scattering.out_idx] @ n)) * grid.weight
        in_flux = np.sum(F_in * np.abs(grid.points[wall_scattering.in_idx] @ n)) * grid.weight
        out.append(abs(out_flux - in_flux) / out_flux if out_flux > 0 else 0.0)
    return max(out)

def iterate(problem, F0, tol=1e-8, m_max=50):
    """Run the scheme from F^0 = F_0 until the sup-difference drops below tol."""
    F0 = np.asarray(F0, dtype=float)
    state = IterationState(m=0, F=np.broadcast_to(F0, (problem.Nt + 1,) + F0.shape).copy())
    state.sup_h = max(float(np.max(np.abs(problem.h_of(F0, t)))) for t in problem.times)

    report = SolveReport(problem=problem, raw_defects=tuple(w.raw_defect for w in problem.walls))
    h0 = float(np.max(np.abs(problem.h_of(F0, 0.0))))
    mass0 = _mass(F0, problem)

    for m in range(1, m_max + 1):
        new = advance_iteration(state, problem, F0)
        diff = _diff_h(new, state, problem)
        report.sup_h.append(new.sup_h)
        report.diff.append(diff)
        report.mass.append(_mass(new.F[-1], problem))
        report.flux_residual.append(_flux_residual(new.F[-1], problem))
        report.iterations = m
        report.final = new.F[-1]
        state = new
        log.debug("iterate: m %d, sup_h %.6g, diff %.6g", m, new.sup_h, diff)

        if m > 3 and report.sup_h[-1] > 10.0 * report.sup_h[-4] \
                and report.sup_h[-1] > report.sup_h[-2] > report.sup_h[-3]:
            raise DivergenceError(f"iteration diverges: sup_h {report.sup_h[-4]:.3g} -> {report.sup_h[-1]:.3g}", report)
        if diff < tol:
            report.converged = True
            break

    report.C = state.sup_h / h0 if h0 > 0 else 1.0
    report.mass_change = abs(report.mass[-1] - mass0) / mass0 if mass0 > 0 else abs(report.mass[-1])
    log.info("iterate: %s after %d iterations, C %.6g, mass change %.3g",
             "converged" if report.converged else "stopped", report.iterations, report.C, report.mass_change)
    return report

def build_problem(config):
    dom = config.build_domain()
    if dom.shape != Domain.SLAB:
        raise ConfigurationError(f"solve-slab needs domain = slab (got {dom.shape})")
    wt = dom.wall_temp
    temps = wt.values if wt.kind == "faces" else (wt.values[0], wt.values[0])
    grid = VelocityGrid(config.grid_M, config.v_max, config.T_M)
    t_end = config.get("t_end", DEFAULT_T_END)
    return SlabProblem(dom.width, temps, config.boundary_model(), CollisionModel(config.kappa), grid,
                       config.nx, t_end, config.theta, config.T_M, seed=config.seed, n_mc=config.n_mc,
                       cfl=config.cfl, density=config.get("density"), threads=config.threads)

def solve(config):
    """
    Build the slab problem from config, report the theorem hypotheses (a
    failing hypothesis is logged, not enforced) and iterate to convergence.
    """
    problem = build_problem(config)
    hypothesis = None
    pair = problem.model.accommodation()
    if pair is not None:
        try:
            hypothesis = theorem_constants.check_hypotheses(config.T_M, config.min_Tw, pair, config.theta)
        except DomainError as e:
            log.warning("solve: hypothesis check skipped: %s", e)

    F0 = initial_datum(config.datum, problem)
    report = iterate(problem, F0, tol=config.tol, m_max=config.m_max)
    report.hypothesis = hypothesis
    return report

def velocity_slice(report):
    """Rows (x, v1, F, h) of the final state along v2 = v3 = 0."""
    problem = report.problem
    grid = problem.grid
    on_axis = np.flatnonzero((grid.points[:, 1] == 0.0) & (grid.points[:, 2] == 0.0))
    h = problem.h_of(report.final, problem.t_end)
    rows = []
    for i, x in enumerate(problem.x):
        for j in on_axis:
            rows.append([utils.format_float(v) for v in (x, grid.points[j, 0], report.final[i, j], h[i, j])])
    return rows
