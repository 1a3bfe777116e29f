import math

import numpy as np
import pytest

from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from clkinetic import geometry
from clkinetic import utils
from clkinetic.Domain import Domain, WallTemperature
from clkinetic.KineticResponse import DomainError, ConfigurationError

# ##############################################################################
# Domain
# ##############################################################################

@pytest.mark.parametrize("text, kind, values", [
    ("const:1.5",        "const",   (1.5,)),
    ("2",                "const",   (2.0,)),
    ("faces:1,2",        "faces",   (1.0, 2.0)),
    (" angular:1,0.05 ", "angular", (1.0, 0.05)),
])
def test_wall_temperature_parse(text, kind, values):
    wt = WallTemperature.parse(text)
    assert wt.kind == kind
    assert wt.values == values

def test_wall_temperature_extremes():
    wt = WallTemperature.parse("angular:1,-0.1")
    assert_allclose([wt.T_M, wt.min_Tw], [1.1, 0.9])

@pytest.mark.parametrize("text", ["bogus:1", "faces:1", "const:a", "hot"])
def test_wall_temperature_rejects(text):
    with pytest.raises(ConfigurationError):
        WallTemperature.parse(text)

def test_wall_temperature_must_stay_positive():
    with pytest.raises(DomainError):
        WallTemperature.parse("angular:1,2")

def test_faces_need_slab():
    with pytest.raises(ConfigurationError):
        Domain.ball(1.0, "faces:1,2")

def test_angular_profile():
    dom = Domain.ball(1.0, "angular:1,0.1")
    assert_allclose(dom.wall_temperature(np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [-1.0, 0.0, 0.0]])),
                    [1.1, 1.0, 0.9])

def test_slab_faces():
    dom = Domain.slab(1.0, "faces:1,2")
    points = np.array([[0.0, 0.3, 0.1], [1.0, 0.3, 0.1]])
    assert_allclose(dom.wall_temperature(points), [1.0, 2.0])
    assert_allclose(dom.normal_at(points), [[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])

def test_sample_uniform_stays_inside(rng):
    for dom in (Domain.ball(2.0), Domain.disk(0.5), Domain.slab(3.0)):
        assert np.all(dom.contains(dom.sample_uniform(5000, rng)))

def test_wrap_is_periodic():
    dom = Domain.slab(1.0, periodic_length=2.0)
    assert_allclose(dom.wrap([0.5, 2.5, -0.5]), [0.5, 0.5, 1.5])

# ##############################################################################
# Forward flights
# ##############################################################################

def test_ball_radius_flight():
    hit = geometry.first_exit_forward([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], Domain.ball(1.0))
    assert_allclose(hit.time, 1.0)
    assert_allclose(hit.point, [1.0, 0.0, 0.0])
    assert_allclose(hit.normal, [1.0, 0.0, 0.0])

def test_ball_flight_across():
    hit = geometry.first_exit_forward([0.5, 0.0, 0.0], [-1.0, 0.0, 0.0], Domain.ball(1.0))
    assert_allclose(hit.time, 1.5)
    assert_allclose(hit.point, [-1.0, 0.0, 0.0])

def test_slab_flight():
    hit = geometry.first_exit_forward([0.25, 0.4, 0.4], [2.0, 1.0, 0.0], Domain.slab(1.0))
    assert_allclose(hit.time, 0.375)
    assert_allclose(hit.point[0], 1.0)
    assert_allclose(hit.normal, [1.0, 0.0, 0.0])

def test_disk_ignores_axis_component():
    hit = geometry.first_exit_forward([0.0, 0.0, 5.0], [0.0, 2.0, 7.0], Domain.disk(1.0))
    assert_allclose(hit.time, 0.5)
    assert_allclose(hit.normal, [0.0, 1.0, 0.0])

@pytest.mark.parametrize("dom, v", [
    (Domain.ball(1.0), [0.0, 0.0, 0.0]),
    (Domain.slab(1.0), [0.0, 1.0, 1.0]),
    (Domain.disk(1.0), [0.0, 0.0, 1.0]),
])
def test_flights_that_never_hit(dom, v):
    assert geometry.first_exit_forward([0.5, 0.0, 0.0], v, dom) is None

def test_point_outside_is_rejected():
    with pytest.raises(DomainError):
        geometry.first_exit_forward([2.0, 0.0, 0.0], [1.0, 0.0, 0.0], Domain.ball(1.0))

def test_outward_flight_from_wall_is_rejected():
    with pytest.raises(DomainError):
        geometry.first_exit_forward([1.0, 0.0, 0.0], [1.0, 0.0, 0.0], Domain.ball(1.0))

def test_inward_flight_from_wall_crosses():
    hit = geometry.first_exit_forward([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], Domain.ball(1.0))
    assert_allclose(hit.time, 2.0)

def test_grazing_flight_is_nudged_inward():
    tau = Domain.ball(1.0).exit_times([[0.0, 1.0, 0.0]], [[1.0, 0.0, 0.0]])
    assert math.isfinite(tau[0])
    assert 0.0 < tau[0] < 1e-5

@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), shape=st.sampled_from([Domain.BALL, Domain.DISK, Domain.SLAB]))
def test_hits_lie_on_the_boundary(seed, shape):
    rng = np.random.default_rng(seed)
    dom = Domain(shape, 1.3)
    x = dom.sample_uniform(64, rng)
    v = rng.normal(size=(64, 3))
    tau, points, normals = geometry.first_exit_batch(x, v, dom)
    finite = np.isfinite(tau)
    assert np.all(tau[finite] >= 0.0)
    assert_allclose(dom.level(points[finite]), 0.0, atol=1e-10)
    assert np.all(utils.dot(normals[finite], v[finite]) >= 0.0)

# ##############################################################################
# Back-time flights
# ##############################################################################

def test_back_time_reaches_datum():
    back = geometry.back_time_hit(0.5, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], Domain.ball(1.0))
    assert_allclose(back.t1, -0.5)
    assert back.reached_datum

def test_back_time_hits_wall():
    back = geometry.back_time_hit(2.0, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], Domain.ball(1.0))
    assert_allclose(back.t1, 1.0)
    assert_allclose(back.x1, [-1.0, 0.0, 0.0])
    assert not back.reached_datum

def test_back_time_in_slab():
    back = geometry.back_time_hit(1.0, [0.9, 0.0, 0.0], [3.0, 0.0, 0.0], Domain.slab(1.0))
    assert_allclose(back.t1, 0.7)
    assert_allclose(back.x1[0], 0.0)
    assert_allclose(back.hit.normal, [-1.0, 0.0, 0.0])

def test_back_time_without_wall():
    back = geometry.back_time_hit(1.0, [0.5, 0.0, 0.0], [0.0, 0.0, 0.0], Domain.ball(1.0))
    assert back.t1 == -math.inf
    assert back.reached_datum

def test_back_time_batch_agrees_with_single_flights():
    dom = Domain.slab(1.0)
    x = np.array([[0.9, 0.0, 0.0], [0.5, 0.0, 0.0], [0.5, 0.2, 0.0]])
    v = np.array([[3.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    t1, points, normals = geometry.back_time_batch(np.array([1.0, 0.2, 1.0]), x, v, dom)
    for i in range(2):
        back = geometry.back_time_hit([1.0, 0.2][i], x[i], v[i], dom)
        assert_allclose(t1[i], back.t1)
        assert_allclose(points[i], back.x1)
        assert_allclose(normals[i], back.hit.normal)
    assert t1[2] == -math.inf
    assert np.all(np.isnan(points[2]))
