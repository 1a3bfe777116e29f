"""
Hypotheses and explicit constants of the well-posedness theorem for the
Cercignani-Lampis boundary condition.

Everything here is closed-form arithmetic. The proof's t-dependent slack is
evaluated at t = 0 unless a t (and k) is passed explicitly.
"""

import math
import logging

from dataclasses import dataclass, field

from . import utils
from .AccommodationPair import AccommodationPair
from .KineticResponse import DomainError

log = logging.getLogger(__name__)

# ##############################################################################
#                                                                              #
#                              Building blocks                                 #
#                                                                              #
# ##############################################################################

def xi_of_theta(theta, T_M):
    """xi with theta = 1 / (4 T_M xi); xi > 1 iff theta < 1 / (4 T_M)."""
    return 1.0 / (4.0 * T_M * theta)

def top_temperature(xi, T_M):
    """T_{l,l} = 2 xi / (xi + 1) T_M, the top rung of the temperature ladder."""
    return 2.0 * xi / (xi + 1.0) * T_M

def par_threshold(r):
    return (1.0 - r.r_par) / (2.0 - r.r_par) if r.r_par < 2.0 else -math.inf

def perp_threshold(r):
    if r.r_perp == 0.0:
        return 0.5
    s = math.sqrt(1.0 - r.r_perp)
    return (s - (1.0 - r.r_perp)) / r.r_perp

def temperature_threshold(r):
    """Lower bound that min T_w / T_M must strictly exceed."""
    return max(par_threshold(r), perp_threshold(r))

def epsilon2(ratio, r):
    """
    Largest eps2 with ratio > threshold (1 + eps2) for both thresholds;
    thresholds <= 0 impose nothing, so eps2 = inf when both are.
    """
    bounds = [ratio / thr - 1.0 for thr in (par_threshold(r), perp_threshold(r)) if thr > 0.0]
    return min(bounds) if bounds else math.inf

def _q(eps2):
    return 2.0 if math.isinf(eps2) else (1.0 + eps2) / (1.0 + eps2 / 2.0)

def t_ladder(l, i, xi, T_M, r_min):
    """Closed form of T_{l,i} for 1 <= i <= l."""
    if not 1 <= i <= l:
        raise DomainError(f"t_ladder needs 1 <= i <= l (got l {l}, i {i})")
    top = top_temperature(xi, T_M)
    return top + (T_M - top) * (1.0 - (1.0 - r_min) ** (l - i))

def t_ladder_recurrence(l, i, xi, T_M, r_min):
    """T_{l,i} by stepping T_{l,j-1} = r_min T_M + (1 - r_min) T_{l,j} down from j = l."""
    if not 1 <= i <= l:
        raise DomainError(f"t_ladder_recurrence needs 1 <= i <= l (got l {l}, i {i})")
    value = top_temperature(xi, T_M)
    for _ in range(l - i):
        value = r_min * T_M + (1.0 - r_min) * value
    return value

def _ladder_denominator(T_M, minTw, r, xi):
    top = top_temperature(xi, T_M)
    return top + (minTw - top) * r.r_max

def c_tm_xi(T_M, minTw, r, xi, t=None):
    """
    C_{T_M,xi} = (4 xi/(xi+1) T_M) / (2 xi/(xi+1) T_M + (min T_w - 2 xi/(xi+1) T_M) r_max).

    With t given, the factor 2 in the numerator is replaced by the sharper
    (1 + 4 T_M t) it bounds.
    """
    denominator = _ladder_denominator(T_M, minTw, r, xi)
    if not denominator > 0:
        raise DomainError(f"c_tm_xi: denominator {denominator} is not positive")
    top = top_temperature(xi, T_M)
    slack = 2.0 if t is None else 1.0 + 4.0 * T_M * t
    return slack * top / denominator

def cal_c(T_M, minTw, r, xi):
    """
    The constant C multiplying t in the bound on (a + eps) b / (b - a - eps).
    Its first term is negative when min T_w exceeds 2 xi/(xi+1) T_M.
    """
    denominator = _ladder_denominator(T_M, minTw, r, xi)
    if not denominator > 0:
        raise DomainError(f"cal_c: denominator {denominator} is not positive")
    top = top_temperature(xi, T_M)
    first = 4.0 * T_M * (top - minTw) / (2.0 * minTw * denominator)
    return first + c_tm_xi(T_M, minTw, r, xi)

def eta_coefficients(r, eps2, T_M=None, cal=None, k=0, t=0.0):
    """
    (eta_par, eta_perp, eta) for eps2 > 0. With t > 0 the numerators carry
    the slack 1 + 4 T_M C^k t, which needs T_M and cal.

    Returns (None, None, None) when eps2 <= 0: the hypothesis fails and no
    contraction factor exists.
    """
    if eps2 is None or not eps2 > 0:
        return None, None, None

    q = _q(eps2)
    numerator = 1.0
    if t:
        if T_M is None or cal is None:
            raise DomainError("eta_coefficients: t > 0 needs T_M and cal")
        numerator += 4.0 * T_M * cal ** k * t

    s = math.sqrt(1.0 - r.r_perp)
    eta_par = numerator / (1.0 - r.r_par + r.r_par * q)
    eta_perp = numerator / (s + (1.0 - s) * q)
    return eta_par, eta_perp, max(eta_par, eta_perp)

# ##############################################################################
#                                                                              #
#                                  Report                                      #
#                                                                              #
# ##############################################################################

@dataclass
class HypothesisReport:
    T_M: float
    minTw: float
    r: AccommodationPair
    theta: float
    t: float = 0.0
    k: int = 0

    theta_ok: bool = False          # 0 < theta < 1 / (4 T_M)
    r_ok: bool = False              # 0 < r_perp <= 1, 0 < r_par < 2
    temperature_ok: bool = False    # min T_w / T_M above both thresholds

    xi: float = None
    r_min: float = None
    r_max: float = None
    threshold: float = None
    eps2: float = None
    eta_par: float = None
    eta_perp: float = None
    eta: float = None
    c_tm_xi: float = None
    cal_c: float = None
    cal_c_first_term_negative: bool = False
    ladder: dict = field(default_factory=dict)

    @property
    def holds(self):
        return self.theta_ok and self.r_ok and self.temperature_ok

    HEADER = ["T_M", "minTw", "r_perp", "r_par", "theta", "theta_ok", "r_ok", "temperature_ok",
              "xi", "r_min", "r_max", "threshold", "eps2", "eta_par", "eta_perp", "eta",
              "C_TM_xi", "cal_C", "cal_C_first_term_negative"]

    def to_row(self):
        def fmt(x):
            if x is None:
                return "NA"
            if isinstance(x, bool):
                return str(x).lower()
            return utils.format_float(x)
        return [fmt(x) for x in (self.T_M, self.minTw, self.r.r_perp, self.r.r_par, self.theta,
                                 self.theta_ok, self.r_ok, self.temperature_ok,
                                 self.xi, self.r_min, self.r_max, self.threshold, self.eps2,
                                 self.eta_par, self.eta_perp, self.eta,
                                 self.c_tm_xi, self.cal_c, self.cal_c_first_term_negative)]

    def lines(self):
        verdict = "HOLDS" if self.holds else "FAILS"
        out = [f"theorem hypotheses {verdict}",
               f"  T_M {self.T_M:g}, min T_w {self.minTw:g}, r {self.r}, theta {self.theta:g}",
               f"  theta < 1/(4 T_M):           {self.theta_ok} (xi {self.xi:.6g})",
               f"  0 < r_perp <= 1, 0 < r_par < 2: {self.r_ok}",
               f"  min T_w / T_M > {self.threshold:.6g}: {self.temperature_ok} (ratio {self.minTw / self.T_M:.6g})"]
        if self.eta is None:
            out.append("  eps2, eta: undefined (temperature condition fails)")
        else:
            out.append(f"  eps2 {self.eps2:.6g}, eta_par {self.eta_par:.6g}, eta_perp {self.eta_perp:.6g}, eta {self.eta:.6g}")
        out.append(f"  r_min {self.r_min:.6g}, r_max {self.r_max:.6g}")
        if self.c_tm_xi is not None:
            sign = " (first term negative)" if self.cal_c_first_term_negative else ""
            out.append(f"  C_TM_xi {self.c_tm_xi:.6g}, cal_C {self.cal_c:.6g}{sign}")
        for (l, i), value in sorted(self.ladder.items()):
            out.append(f"  T_{{{l},{i}}} = {value:.15g}")
        return out

def check_hypotheses(T_M, minTw, r, theta, t=0.0, k=0, ladder=()):
    """
    Evaluate both hypotheses and every derived constant.

    Parameters
    ----------
    T_M, minTw : hottest and coldest wall temperature, 0 < minTw <= T_M
    r : AccommodationPair or (r_perp, r_par)
    theta : weight exponent, > 0
    t, k : optional proof slack in eta (t = 0 drops it)
    ladder : iterable of (l, i) pairs to tabulate T_{l,i}
    """
    r = r if isinstance(r, AccommodationPair) else AccommodationPair(*r)
    for name, value in (("T_M", T_M), ("minTw", minTw), ("theta", theta)):
        if not value > 0:
            raise DomainError(f"check_hypotheses: {name} must be positive (got {value})")
    if minTw > T_M:
        raise DomainError(f"check_hypotheses: minTw {minTw} exceeds T_M {T_M}")
    if t < 0:
        raise DomainError(f"check_hypotheses: t must be nonnegative (got {t})")

    report = HypothesisReport(T_M=float(T_M), minTw=float(minTw), r=r, theta=float(theta), t=float(t), k=int(k))
    report.xi = xi_of_theta(theta, T_M)
    report.theta_ok = report.xi > 1.0
    report.r_ok = r.admissible()
    report.r_min = r.r_min
    report.r_max = r.r_max
    report.threshold = temperature_threshold(r)

    ratio = minTw / T_M
    report.temperature_ok = ratio > report.threshold
    report.eps2 = epsilon2(ratio, r)

    try:
        report.c_tm_xi = c_tm_xi(T_M, minTw, r, report.xi)
        report.cal_c = cal_c(T_M, minTw, r, report.xi)
        report.cal_c_first_term_negative = minTw > top_temperature(report.xi, T_M)
    except DomainError as e:
        log.warning("check_hypotheses: %s", e)

    if report.temperature_ok:
        report.eta_par, report.eta_perp, report.eta = eta_coefficients(
            r, report.eps2, T_M=T_M, cal=report.cal_c, k=k, t=t)
        if not t and report.eta is not None and not report.eta < 1.0:
            raise DomainError(f"check_hypotheses: eta {report.eta} is not below one")

    for l, i in ladder:
        report.ladder[(int(l), int(i))] = t_ladder(int(l), int(i), report.xi, T_M, r.r_min)

    if not report.holds:
        log.warning("theorem hypotheses fail: theta_ok %s, r_ok %s, temperature_ok %s (ratio %.6g, threshold %.6g)",
                    report.theta_ok, report.r_ok, report.temperature_ok, ratio, report.threshold)
    return report
