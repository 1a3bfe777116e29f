import math

import numpy as np
import pytest

from numpy.testing import assert_allclose

from clkinetic import particle_sim
from clkinetic.Domain import Domain
from clkinetic.BoundaryModel import BoundaryModel
from clkinetic.KineticResponse import ConfigurationError, DomainError

SMALL = dict(n_particles=2000, block_size=500, t_end=2.0, n_samples=3)

@pytest.mark.parametrize("dom, chord", [(Domain.ball(1.5), 2.0), (Domain.disk(1.0), 2.0), (Domain.slab(0.5), 1.0)])
def test_mean_chord(dom, chord):
    assert_allclose(particle_sim.mean_chord(dom), chord)

def test_mean_flight_time():
    assert_allclose(particle_sim.mean_flight_time(Domain.slab(1.0), math.pi / 2.0), 1.0)

# ##############################################################################
# Mover
# ##############################################################################

def test_specular_flight_keeps_speeds(rng):
    dom = Domain.ball(1.0)
    x = dom.sample_uniform(500, rng)
    v = rng.normal(size=(500, 3))
    speeds = np.linalg.norm(v, axis=1)
    tally = particle_sim.WallTally()
    events = particle_sim.fly(x, v, 5.0, dom, BoundaryModel.specular(), rng, tally)
    assert events > 0
    assert tally.events[0] == events
    assert_allclose(np.linalg.norm(v, axis=1), speeds, rtol=1e-12)
    assert_allclose(tally.energy_in, tally.energy_out, rtol=1e-12)
    assert np.all(dom.contains(x))

def test_diffuse_flight_stays_inside_the_slab(rng):
    dom = Domain.slab(1.0, "faces:1,2", periodic_length=0.5)
    x = dom.sample_uniform(500, rng)
    v = rng.normal(size=(500, 3))
    tally = particle_sim.WallTally()
    particle_sim.fly(x, v, 3.0, dom, BoundaryModel.diffuse(), rng, tally)
    assert np.all((x[:, 0] >= 0.0) & (x[:, 0] <= 1.0))
    assert np.all((x[:, 1:] >= 0.0) & (x[:, 1:] <= 0.5))
    assert np.all(tally.events > 0)

# ##############################################################################
# Transient runs
# ##############################################################################

def test_specular_run_conserves_mass_and_energy(make_config):
    obs = particle_sim.run_transient(make_config(model="specular", **SMALL))
    assert_allclose(obs.mass, 1.0)
    assert_allclose(obs.energy, obs.energy[0], rtol=1e-12)
    assert_allclose(obs.times[-1], 2.0 * obs.flight_time)
    assert obs.n_particles == 2000
    assert obs.particle(3).weight == obs.weight == 1.0 / 2000

def test_equilibrium_run_stays_maxwellian(make_config):
    obs = particle_sim.run_transient(make_config(model="diffuse", n_particles=20000, block_size=5000,
                                                 t_end=3.0, n_samples=4))
    assert particle_sim.drift_significance(obs.energy, obs.energy_se) < 5.0
    assert np.all(np.abs(obs.momentum) < 5.0 * obs.momentum_se)
    assert obs.speed_pvalue > 1e-4
    assert obs.balance_pvalue is not None

def test_run_is_reproducible_across_threads(make_config):
    config = make_config(model="cl", r_perp=0.5, r_par=0.5, **SMALL)
    one = particle_sim.run_transient(config)
    four = particle_sim.run_transient(config.replace(threads=4))
    assert np.array_equal(one.final_v, four.final_v)
    assert np.array_equal(one.wall_events, four.wall_events)

def test_rng_reroots_the_streams(make_config):
    config = make_config(**SMALL)
    a = particle_sim.run_transient(config, rng=np.random.default_rng(1))
    b = particle_sim.run_transient(config)
    assert not np.array_equal(a.initial_v, b.initial_v)

def test_rows_follow_header(make_config):
    obs = particle_sim.run_transient(make_config(**SMALL))
    assert all(len(row) == len(obs.HEADER) for row in obs.rows())

# ##############################################################################
# Statistics
# ##############################################################################

def test_maxwellian_speeds_pass_chisquare(rng):
    _, p = particle_sim.maxwellian_speed_chisquare(rng.normal(0.0, math.sqrt(2.0), (50000, 3)), 2.0)
    assert p > 1e-4

def test_wrong_temperature_fails_chisquare(rng):
    _, p = particle_sim.maxwellian_speed_chisquare(rng.normal(0.0, 1.0, (50000, 3)), 1.2)
    assert p < 1e-6

def test_flat_series_has_no_drift():
    assert particle_sim.drift_significance([1.0, 1.0, 1.0], [0.1, 0.1, 0.1]) == 0.0

# ##############################################################################
# Beam reflection
# ##############################################################################

def test_beam_needs_enough_samples(floor, rng):
    with pytest.raises(DomainError):
        particle_sim.beam_reflection_histogram([2.0, 0.0, -2.0], floor, BoundaryModel.diffuse(), 999, rng)

def test_half_pair_beam_mean(make_config):
    label, hist = particle_sim.figure_histogram(2, make_config(n_particles=100000))
    assert "1/2" in label
    assert abs(hist.mean[0] - 1.0) < 4.0 * hist.mean_se[0]
    assert hist.atom_mass == 0.0
    assert hist.mass.sum() <= 1.0 + 1e-12
    assert_allclose(hist.mirror, [2.0, 2.0])

def test_maxwell_beam_atom(make_config):
    _, hist = particle_sim.figure_histogram(1, make_config(n_particles=40000))
    assert abs(hist.atom_mass - 0.5) < 3.0 * math.sqrt(0.25 / 40000)
    assert hist.near_mirror >= hist.atom_mass

def test_specular_beam_is_all_atom(floor, rng):
    hist = particle_sim.beam_reflection_histogram([2.0, 0.0, -2.0], floor, BoundaryModel.specular(), 1000, rng)
    assert hist.atom_mass == 1.0
    assert hist.near_mirror == 1.0
    assert_allclose(hist.mean, [2.0, 2.0])

def test_unknown_figure(make_config):
    with pytest.raises(ConfigurationError):
        particle_sim.figure_histogram(7, make_config())

# ##############################################################################
# Thermal creep
# ##############################################################################

@pytest.mark.parametrize("overrides", [
    dict(domain="slab", wall_temp="angular:1,0.05"),
    dict(wall_temp="const:1"),
    dict(wall_temp="angular:1,0.5"),
    dict(wall_temp="angular:1,0.05", model="cl", r_perp=0.5, r_par=0.5),
    dict(wall_temp="angular:1,0.05", model="maxwell"),
])
def test_thermal_creep_rejects(make_config, overrides):
    with pytest.raises(ConfigurationError):
        particle_sim.thermal_creep_steady(make_config(**overrides))

def test_thermal_creep_run(make_config):
    obs = particle_sim.thermal_creep_steady(make_config(wall_temp="angular:1,0.05", model="diffuse",
                                                        burn_in=1.0, **dict(SMALL, n_samples=4)))
    assert_allclose(obs.predicted_shift, -0.05 / 15.0)
    assert isinstance(obs.stationary, bool)
    assert 0.0 <= obs.deviation <= 2.0
    assert obs.deviation_se > 0.0
    assert obs.half_amp_deviation is not None and obs.baseline_deviation is not None
    assert isinstance(obs.scaling_ok, bool)

def test_creep_cells_are_equally_likely(rng):
    dom = Domain.ball(2.0)
    x_cuts, v_cuts = particle_sim.creep_cells(dom, 1.5)
    x = dom.sample_uniform(200000, rng)
    v = rng.normal(0.0, math.sqrt(1.5), (200000, 3))
    assert abs(np.mean(x[:, 0] < x_cuts[0]) - 0.5) < 0.005
    assert abs(np.mean(np.linalg.norm(v, axis=1) < v_cuts[0]) - 0.5) < 0.005

CREEP = dict(model="diffuse", n_particles=100000, block_size=10000, burn_in=5.0, t_end=20.0, n_samples=21)

@pytest.mark.slow
def test_creep_deviation_halves_with_the_amplitude(make_config):
    obs = particle_sim.thermal_creep_steady(make_config(wall_temp="angular:1,0.1", **CREEP))
    assert obs.deviation > obs.baseline_deviation + 3.0 * obs.deviation_se
    assert obs.scaling_ok
    assert 0.25 < obs.scaling_ratio < 0.75

@pytest.mark.slow
def test_uniform_wall_deviation_is_noise(make_config):
    obs = particle_sim.thermal_creep_steady(make_config(wall_temp="angular:1,0", **CREEP))
    assert obs.deviation < 5.0 * obs.deviation_se
    assert obs.scaling_ok is None
    assert obs.speed_pvalue > 1e-4

@pytest.mark.slow
def test_nearly_diffuse_creep_stays_close_to_diffuse(make_config):
    comparison = particle_sim.thermal_creep_comparison(make_config(wall_temp="angular:1,0.1", **CREEP))
    assert comparison.within
    assert comparison.other.deviation > 0.0

@pytest.mark.slow
@pytest.mark.parametrize("r_perp, r_par", [(1.0, 1.0), (0.5, 0.5), (0.9, 1.3)])
def test_maxwellian_is_invariant_under_cl_walls(make_config, r_perp, r_par):
    obs = particle_sim.run_transient(make_config(model="cl", r_perp=r_perp, r_par=r_par, n_particles=100000,
                                                 block_size=10000, t_end=20.0, n_samples=2))
    assert np.all(obs.mass == 1.0)
    assert obs.speed_pvalue > 0.01
    assert particle_sim.drift_significance(obs.momentum, obs.momentum_se) < 3.0
    assert particle_sim.drift_significance(obs.energy, obs.energy_se) < 3.0
