import math

import numpy as np
import pytest

from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, special, stats

from clkinetic import wall
from clkinetic import utils
from clkinetic.WallPatch import WallPatch, HalfSpaceVelocity
from clkinetic.BoundaryModel import BoundaryModel
from clkinetic.AccommodationPair import AccommodationPair
from clkinetic.KineticResponse import DomainError

HALF = AccommodationPair(0.5, 0.5)

# ##############################################################################
# Value types
# ##############################################################################

def test_patch_frame_is_right_handed(floor):
    assert_allclose(np.cross(floor.tau1, floor.tau2), floor.normal, atol=1e-15)
    assert_allclose(floor.tau1, [1.0, 0.0, 0.0])

def test_mirror_flips_normal_component(floor):
    assert_allclose(floor.mirror([2.0, 0.0, -2.0]), [2.0, 0.0, 2.0])

@pytest.mark.parametrize("r_perp, r_par", [(-0.1, 1.0), (1.1, 1.0), (0.5, 2.5), (0.5, -1.0)])
def test_pair_rejects_out_of_box(r_perp, r_par):
    with pytest.raises(DomainError):
        AccommodationPair(r_perp, r_par)

def test_pair_limits():
    assert AccommodationPair(0.0, 0.0).is_specular()
    assert AccommodationPair(0.0, 2.0).is_bounce_back()
    assert AccommodationPair(1.0, 1.0).is_diffuse()
    assert not AccommodationPair(0.0, 0.0).admissible()
    assert AccommodationPair(0.5, 0.5).r_max == 0.75
    assert AccommodationPair(0.5, 0.5).r_min == 0.5

def test_model_accommodation():
    assert BoundaryModel.diffuse().accommodation().is_diffuse()
    assert BoundaryModel.specular().deterministic()
    assert BoundaryModel.maxwell(0.0).deterministic()
    assert BoundaryModel.maxwell(0.5).accommodation() is None
    with pytest.raises(DomainError):
        BoundaryModel.maxwell(1.5)

# ##############################################################################
# Densities
# ##############################################################################

def test_density_rejects_wrong_signs(floor):
    with pytest.raises(DomainError):
        wall.cl_density([1.0, 0.0, 1.0], [0.0, 0.0, 1.0], floor, HALF)
    with pytest.raises(DomainError):
        wall.cl_density([1.0, 0.0, -1.0], [0.0, 0.0, -1.0], floor, HALF)

def test_density_rejects_deterministic_pair(floor):
    with pytest.raises(DomainError):
        wall.cl_density([1.0, 0.0, -1.0], [0.0, 0.0, 1.0], floor, AccommodationPair(0.0, 0.0))

def test_diffuse_pair_equals_diffuse_density(floor):
    u = np.array([0.3, -1.0, -0.8])
    v = np.array([[0.1, 0.2, 0.5], [-1.0, 0.4, 2.0]])
    assert_allclose(wall.cl_density(u, v, floor, AccommodationPair(1.0, 1.0)),
                    wall.diffuse_density(v, floor), rtol=1e-13)

def test_narrow_kernel_stays_finite(floor):
    u = np.array([2.0, 0.0, -2.0])
    value = wall.cl_density(u, floor.mirror(u), floor, AccommodationPair(1e-3, 1e-3))
    assert np.isfinite(value) and value > 0.0

def test_model_density_is_none_for_singular_laws(floor):
    u, v = [1.0, 0.0, -1.0], [0.0, 0.0, 1.0]
    assert wall.model_density(BoundaryModel.specular(), u, v, floor) is None
    assert wall.model_density(BoundaryModel.bounce_back(), u, v, floor) is None

def test_maxwell_density_carries_the_atom(floor):
    md = wall.maxwell_density([2.0, 0.0, -2.0], [0.0, 0.0, 1.0], floor, 0.25)
    assert md.atom_weight == 0.75
    assert_allclose(md.atom, [2.0, 0.0, 2.0])
    assert_allclose(md.continuous, 0.25 * wall.diffuse_density([0.0, 0.0, 1.0], floor))

@pytest.mark.parametrize("r", [HALF, AccommodationPair(0.2, 1.5), AccommodationPair(0.9, 0.1)])
def test_normalization(r):
    patch = WallPatch(1.3, normal=[0.3, -0.4, 0.866])
    u = patch.compose(np.asarray(0.8), [0.5, -0.3])
    assert abs(wall.verify_normalization(u, patch, r) - 1.0) < 1e-5

pairs = st.builds(AccommodationPair, st.floats(0.05, 1.0), st.floats(0.05, 1.95))

@settings(max_examples=25, deadline=None)
@given(r=pairs, T=st.floats(0.5, 2.0), seed=st.integers(0, 2 ** 32 - 1))
def test_reciprocity(r, T, seed):
    rng = np.random.default_rng(seed)
    patch = WallPatch(T, normal=utils.sample_unit_sphere(1, rng)[0])
    u = patch.compose(0.1 + np.abs(rng.normal(size=20)), rng.normal(size=(20, 2)))
    v = patch.compose(-(0.1 + np.abs(rng.normal(size=20))), rng.normal(size=(20, 2)))
    assert wall.verify_reciprocity(u, v, patch, r) < 1e-12

# ##############################################################################
# Push-forward of a half-space Maxwellian
# ##############################################################################

def test_pushforward_temperatures(floor):
    pf = wall.cl_pushforward_maxwellian(floor, HALF, 2.0)
    assert_allclose(pf.T_par, 1.25)
    assert_allclose(pf.T_perp, 1.5)

@settings(max_examples=30, deadline=None)
@given(r=pairs, T=st.floats(0.2, 5.0))
def test_pushforward_collapses_at_equilibrium(r, T):
    pf = wall.cl_pushforward_maxwellian(WallPatch(T), r, T)
    assert_allclose([pf.T_par, pf.T_perp], [T, T], rtol=1e-12)

def test_pushforward_flux_is_one(floor):
    assert abs(wall.cl_pushforward_maxwellian(floor, HALF, 2.0).flux_integral() - 1.0) < 1e-8

@pytest.mark.slow
def test_pushforward_matches_quadrature(floor):
    pf = wall.cl_pushforward_maxwellian(floor, HALF, 2.0)
    v = np.array([0.4, -0.2, 1.1])
    assert_allclose(wall.pushforward_quadrature(v, floor, HALF, 2.0), pf.density(v), rtol=1e-6)

def test_pushforward_rejects_nonpositive_T0(floor):
    with pytest.raises(DomainError):
        wall.cl_pushforward_maxwellian(floor, HALF, 0.0)

# ##############################################################################
# Sampling
# ##############################################################################

def test_samples_leave_the_wall(floor, rng):
    v = wall.cl_sample(np.tile([2.0, 0.0, -2.0], (10000, 1)), floor, HALF, rng)
    assert np.all(v @ floor.normal < 0.0)

def test_single_velocity_gives_single_sample(floor, rng):
    assert wall.cl_sample([2.0, 0.0, -2.0], floor, HALF, rng).shape == (3,)

def test_half_pair_mean_tangential_velocity(floor, rng):
    n = 200000
    v = wall.cl_sample(np.tile([2.0, 0.0, -2.0], (n, 1)), floor, HALF, rng)
    par = v[:, 0]
    assert abs(par.mean() - 1.0) < 4.0 * par.std(ddof=1) / math.sqrt(n)

def test_second_moments_match_closed_form(rng):
    patch = WallPatch(1.5, normal=[0.0, 1.0, 0.0])
    r = AccommodationPair(0.3, 1.4)
    u = np.array([0.7, 1.2, -0.4])
    n = 200000
    v = wall.cl_sample(np.tile(u, (n, 1)), patch, r, rng)
    exact = wall.cl_moments(u, patch, r)
    perp = v @ patch.normal
    par = v - np.outer(perp, patch.normal)
    for sample, target in ((perp ** 2, exact.mean_perp_square), (utils.dot(par, par), exact.mean_par_square)):
        assert abs(sample.mean() - target) < 4.0 * sample.std(ddof=1) / math.sqrt(n)

def _normal_speed_cdf(grid, u_perp, T, r_perp):
    """Cumulative law of |v.n| for the C-L kernel, integrated segment by segment."""
    nu = math.sqrt(1.0 - r_perp) * u_perp
    var = T * r_perp
    def density(s):
        return s / var * math.exp(-(s - nu) ** 2 / (2.0 * var)) * special.i0e(nu * s / var)
    pieces = [integrate.quad(density, a, b)[0] for a, b in zip(grid[:-1], grid[1:])]
    return np.concatenate([[0.0], np.cumsum(pieces)])

def test_normal_speed_follows_its_closed_form_law(floor):
    n = 100000
    v = wall.cl_sample(np.tile([0.0, 0.0, -2.0], (n, 1)), floor, HALF, utils.stream(17, 4))
    speeds = np.abs(v @ floor.normal)

    grid = np.linspace(0.0, 8.0, 401)
    cdf = _normal_speed_cdf(grid, 2.0, 1.0, 0.5)
    sigma = math.sqrt(0.5)
    assert_allclose(cdf, stats.rice.cdf(grid, math.sqrt(0.5) * 2.0 / sigma, scale=sigma), atol=1e-7)

    result = stats.kstest(speeds, lambda s: np.interp(s, grid, cdf))
    assert result.statistic < 1.63 / math.sqrt(n)

def test_deterministic_limits(floor, rng):
    u = np.array([[2.0, 0.5, -2.0], [0.1, -1.0, -0.3]])
    assert_allclose(wall.cl_sample(u, floor, AccommodationPair(0.0, 0.0), rng), floor.mirror(u))
    assert_allclose(wall.cl_sample(u, floor, AccommodationPair(0.0, 2.0), rng), -u)

def test_nearly_specular_pairs_concentrate_on_mirror(floor, rng):
    u = np.array([2.0, 0.0, -2.0])
    near = []
    for r in (1e-2, 1e-3, 1e-4):
        v = wall.cl_sample(np.tile(u, (20000, 1)), floor, AccommodationPair(r, r), rng)
        near.append(np.mean(utils.norm(v - floor.mirror(u)) < 0.1))
    assert near[0] < near[1] < near[2]
    assert near[1] > 0.85
    assert near[2] > 0.99

def test_maxwell_atom_fraction(floor, rng):
    n = 100000
    v, atom = wall.maxwell_sample(np.tile([2.0, 0.0, -2.0], (n, 1)), floor, 0.5, rng)
    sigma = math.sqrt(0.25 / n)
    assert abs(atom.mean() - 0.5) < 3.0 * sigma
    assert_allclose(v[atom], np.tile([2.0, 0.0, 2.0], (int(atom.sum()), 1)))

def test_reflect_uses_row_normals(rng):
    normals = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
    u = np.array([[1.0, 0.2, 0.0], [0.0, -2.0, 0.5]])
    v = wall.reflect(BoundaryModel.cl(0.5, 0.5), u, normals, np.array([1.0, 2.0]), rng)
    assert np.all(utils.dot(v, normals) < 0.0)

def test_reflect_rejects_outgoing_velocity(rng):
    with pytest.raises(DomainError):
        wall.reflect(BoundaryModel.diffuse(), np.array([[-1.0, 0.0, 0.0]]),
                     np.array([[1.0, 0.0, 0.0]]), np.array([1.0]), rng)

# ##############################################################################
# Weights and moments
# ##############################################################################

def test_weights():
    v = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 2.0]])
    assert_allclose(wall.global_maxwellian(v, 2.0), [1.0, math.exp(-2.25)])
    assert_allclose(wall.weight_theta(v, 0.1), [1.0, math.exp(0.9)])
    assert_allclose(wall.bracket(v), [1.0, math.sqrt(10.0)])

def test_half_space_velocity_splits_in_the_wall_frame(floor):
    hv = HalfSpaceVelocity.from_velocity([2.0, 1.0, -3.0], floor)
    assert hv.v_perp == 3.0
    assert_allclose(hv.to_velocity(floor), [2.0, 1.0, -3.0])

def test_energy_accommodation_limits(floor):
    u = np.array([2.0, 0.0, -2.0])
    assert_allclose(wall.cl_moments(u, floor, AccommodationPair(1.0, 1.0)).energy_accommodation, 1.0)
    assert_allclose(wall.cl_moments(u, floor, AccommodationPair(0.0, 0.0)).energy_accommodation, 0.0, atol=1e-15)
    moments = wall.cl_moments(u, floor, HALF)
    assert_allclose(moments.mean_energy, 0.5 * (1.0 + 2.0 + 1.5 + 1.0))
    assert 0.0 < moments.energy_accommodation < 1.0

def test_linearized_source_has_no_net_flux(floor):
    assert abs(wall.pushforward_flux_mismatch(floor, HALF, 2.0)) < 1e-6
