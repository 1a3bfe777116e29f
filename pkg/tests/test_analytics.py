import math

import numpy as np
import pytest

from hypothesis import assume, given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import special

from clkinetic import analytics
from clkinetic.analytics import GaussParams
from clkinetic.KineticResponse import DomainError

# ##############################################################################
# Bessel I0
# ##############################################################################

def test_i0_at_two():
    assert_allclose(analytics.bessel_i0(2.0), 2.2795853023360673, rtol=1e-14)

def test_i0_at_zero_is_one():
    assert analytics.bessel_i0(0.0) == 1.0

@pytest.mark.parametrize("y", [0.5, 2.0, 10.0, 14.999, 15.001, 40.0, 300.0])
def test_i0_matches_quadrature(y):
    assert_allclose(analytics.bessel_i0(y), analytics.i0_quadrature(y), rtol=1e-11)

@pytest.mark.parametrize("y", [0.3, 7.0, 15.0, 15.5, 120.0])
def test_i0_is_even_bit_for_bit(y):
    assert analytics.bessel_i0(-y) == analytics.bessel_i0(y)

def test_i0e_is_scaled_i0():
    y = np.array([0.1, 3.0, 25.0, 500.0])
    assert_allclose(analytics.bessel_i0e(y) * np.exp(y), analytics.bessel_i0(y), rtol=1e-12)

def test_i0_overflow_is_flagged():
    value, overflowed = analytics.bessel_i0_checked(800.0)
    assert overflowed
    assert value == math.inf
    assert analytics.bessel_i0e(800.0) > 0.0

def test_i0_rejects_nan():
    with pytest.raises(DomainError):
        analytics.bessel_i0(float("nan"))

def test_both_regimes_match_scipy():
    y = np.linspace(0.0, 60.0, 121)
    assert_allclose(analytics.bessel_i0e(y), special.i0e(y), rtol=1e-12)

# ##############################################################################
# GaussParams
# ##############################################################################

@pytest.mark.parametrize("kwargs", [
    dict(a=0.0, b=0.0),
    dict(a=1.0, b=1.0),
    dict(a=0.5, b=1.0, eps=0.5),
    dict(a=0.0, b=1.0, eps=-0.1),
    dict(a=0.0, b=1.0, w=[1.0, 2.0, 3.0]),
])
def test_gauss_params_rejects(kwargs):
    with pytest.raises(DomainError):
        GaussParams(**kwargs)

def test_negative_a_is_accepted():
    p = GaussParams(a=-0.5, b=1.0, w=[0.0, 0.0])
    assert p.gap == 1.5

# ##############################################################################
# Plane
# ##############################################################################

def test_plane_closed_form_example():
    p = GaussParams(a=0.25, b=1.0, eps=0.0, w=[1.0, 0.0])
    expected = 4.0 / 3.0 * math.exp(1.0 / 3.0)
    assert_allclose(analytics.gauss_plane_integral(p), expected, rtol=1e-14)
    assert_allclose(analytics.plane_quadrature(p), expected, rtol=1e-6)

def test_plane_tail_example():
    p = GaussParams(a=0.0, b=1.0, eps=0.0, w=[0.0, 0.0])
    assert_allclose(analytics.gauss_plane_tail(p, 0.2), math.exp(-25.0), rtol=1e-12)

def test_plane_needs_two_components():
    with pytest.raises(DomainError):
        analytics.gauss_plane_integral(GaussParams(a=0.0, b=1.0, w=[1.0]))

@pytest.mark.parametrize("delta", [0.0, 1.0, -0.2])
def test_tail_rejects_delta(delta):
    with pytest.raises(DomainError):
        analytics.gauss_plane_tail(GaussParams(a=0.0, b=1.0, w=[0.0, 0.0]), delta)

plane_params = st.builds(
    lambda a, b, eps, w1, w2: GaussParams(a=a, b=b, eps=eps, w=[w1, w2]),
    st.floats(-1.0, 0.5), st.floats(1.0, 3.0), st.floats(0.0, 0.2),
    st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))

@settings(max_examples=15, deadline=None)
@given(p=plane_params)
def test_plane_closed_form_matches_quadrature(p):
    assert_allclose(analytics.gauss_plane_integral(p), analytics.plane_quadrature(p), rtol=1e-6)

@settings(max_examples=15, deadline=None)
@given(p=plane_params, delta=st.floats(0.3, 0.9))
def test_plane_tail_is_a_bound(p, delta):
    assert analytics.plane_tail_quadrature(p, delta) <= analytics.gauss_plane_tail(p, delta) * (1.0 + 1e-8)

# ##############################################################################
# Half-line
# ##############################################################################

halfline_params = st.builds(
    lambda a, b, eps, w: GaussParams(a=a, b=b, eps=eps, w=[w]),
    st.floats(-1.0, 0.5), st.floats(1.0, 3.0), st.floats(0.0, 0.2), st.floats(0.0, 1.5))

@settings(max_examples=15, deadline=None)
@given(p=halfline_params)
def test_halfline_closed_form_matches_quadrature(p):
    assert_allclose(analytics.gauss_halfline_rice_integral(p), analytics.halfline_quadrature(p), rtol=1e-6)

@settings(max_examples=15, deadline=None)
@given(p=halfline_params, delta=st.floats(0.05, 0.9))
def test_halfline_truncations_are_bounded(p, delta):
    assume(delta * p.gap <= 1.0)
    head = analytics.gauss_halfline_truncations(p, delta, "head")
    tail = analytics.gauss_halfline_truncations(p, delta, "shifted_tail")
    assert head <= analytics.gauss_halfline_head_bound(p, delta) * (1.0 + 1e-8)
    assert tail <= analytics.gauss_halfline_shifted_tail_bound(p, delta) * (1.0 + 1e-8)

def test_halfline_rejects_negative_w():
    with pytest.raises(DomainError):
        analytics.gauss_halfline_rice_integral(GaussParams(a=0.0, b=1.0, w=[-0.5]))

def test_truncation_rejects_unknown_mode():
    with pytest.raises(DomainError):
        analytics.gauss_halfline_truncations(GaussParams(a=0.0, b=1.0, w=[0.5]), 0.5, "middle")

@pytest.mark.parametrize("u, r", [(0.0, 1.0), (0.7, 0.5), (2.5, 0.1), (1.0, 0.05)])
def test_rice_normal_mass_is_one(u, r):
    assert abs(analytics.rice_normal_mass(u, r) - 1.0) < 1e-8

def test_rice_normal_mass_rejects_zero_r():
    with pytest.raises(DomainError):
        analytics.rice_normal_mass(1.0, 0.0)
