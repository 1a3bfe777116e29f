import math

import pytest

from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from clkinetic import theorem_constants as tc
from clkinetic.AccommodationPair import AccommodationPair
from clkinetic.KineticResponse import DomainError

HALF = AccommodationPair(0.5, 0.5)

def test_thresholds_of_the_half_pair():
    assert_allclose(tc.par_threshold(HALF), 1.0 / 3.0)
    assert_allclose(tc.perp_threshold(HALF), math.sqrt(2.0) - 1.0)
    assert_allclose(tc.temperature_threshold(HALF), 0.41421356237309503)

def test_diffuse_pair_has_no_threshold():
    assert tc.temperature_threshold(AccommodationPair(1.0, 1.0)) == 0.0
    assert tc.epsilon2(0.2, AccommodationPair(1.0, 1.0)) == math.inf

def test_epsilon2():
    assert_allclose(tc.epsilon2(0.9, HALF), 0.9 / (math.sqrt(2.0) - 1.0) - 1.0, rtol=1e-14)

def test_top_temperature():
    assert_allclose(tc.xi_of_theta(0.125, 1.0), 2.0)
    assert_allclose(tc.top_temperature(2.0, 1.0), 4.0 / 3.0)

def test_ladder_example():
    assert_allclose(tc.t_ladder(5, 1, 2.0, 1.0, 0.5), 1.0208333333333333, rtol=1e-14)
    assert_allclose(tc.t_ladder(5, 5, 2.0, 1.0, 0.5), 4.0 / 3.0, rtol=1e-14)

@settings(max_examples=50)
@given(l=st.integers(1, 12), data=st.data(), xi=st.floats(1.01, 10.0), r_min=st.floats(0.01, 1.0))
def test_ladder_closed_form_matches_recurrence(l, data, xi, r_min):
    i = data.draw(st.integers(1, l))
    assert_allclose(tc.t_ladder(l, i, xi, 1.5, r_min), tc.t_ladder_recurrence(l, i, xi, 1.5, r_min), rtol=1e-12)

@pytest.mark.parametrize("l, i", [(3, 0), (3, 4)])
def test_ladder_rejects_index(l, i):
    with pytest.raises(DomainError):
        tc.t_ladder(l, i, 2.0, 1.0, 0.5)

def test_constants_of_the_half_pair():
    assert_allclose(tc.c_tm_xi(1.0, 0.9, HALF, 2.0), 2.0 * (4.0 / 3.0) / (4.0 / 3.0 - (4.0 / 3.0 - 0.9) * 0.75))
    denominator = 4.0 / 3.0 - (4.0 / 3.0 - 0.9) * 0.75
    first = 4.0 * (4.0 / 3.0 - 0.9) / (2.0 * 0.9 * denominator)
    assert_allclose(tc.cal_c(1.0, 0.9, HALF, 2.0), first + tc.c_tm_xi(1.0, 0.9, HALF, 2.0))

def test_eta_with_slack_grows():
    eps2 = tc.epsilon2(0.9, HALF)
    _, _, eta0 = tc.eta_coefficients(HALF, eps2)
    _, _, eta1 = tc.eta_coefficients(HALF, eps2, T_M=1.0, cal=3.0, k=2, t=0.01)
    assert_allclose(eta1, eta0 * (1.0 + 4.0 * 9.0 * 0.01))
    with pytest.raises(DomainError):
        tc.eta_coefficients(HALF, eps2, t=0.01)

def test_eta_needs_positive_eps2():
    assert tc.eta_coefficients(HALF, -0.1) == (None, None, None)

# ##############################################################################
# check_hypotheses
# ##############################################################################

def test_hypotheses_hold():
    report = tc.check_hypotheses(1.0, 0.9, (0.5, 0.5), 0.125, ladder=[(5, 1)])
    assert report.holds
    assert_allclose(report.xi, 2.0)
    assert_allclose(report.eta_par, 1.0 / (0.5 + 0.5 * tc._q(report.eps2)))
    assert 0.9 < report.eta < 0.91
    assert report.r_max == 0.75
    assert not report.cal_c_first_term_negative
    assert_allclose(report.ladder[(5, 1)], 1.0208333333333333)
    assert report.lines()[0] == "theorem hypotheses HOLDS"
    assert len(report.to_row()) == len(report.HEADER)

def test_cold_wall_fails():
    report = tc.check_hypotheses(1.0, 0.3, HALF, 0.125)
    assert not report.temperature_ok
    assert not report.holds
    assert report.eta is None
    assert report.to_row()[report.HEADER.index("eta")] == "NA"
    assert report.lines()[0] == "theorem hypotheses FAILS"

def test_large_theta_fails_and_flips_cal_c():
    report = tc.check_hypotheses(1.0, 0.9, HALF, 0.5)
    assert not report.theta_ok
    assert report.cal_c_first_term_negative

def test_specular_pair_has_no_contraction():
    with pytest.raises(DomainError):
        tc.check_hypotheses(1.0, 1.0, (0.0, 0.0), 0.125)

@pytest.mark.parametrize("args", [
    (1.0, 1.2, HALF, 0.125),
    (1.0, 0.9, HALF, 0.0),
    (0.0, 0.0, HALF, 0.125),
])
def test_check_hypotheses_rejects(args):
    with pytest.raises(DomainError):
        tc.check_hypotheses(*args)
