import logging

from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

@dataclass(frozen=True)
class ReachedDatum:
    k: int          # boundary interactions with t_k > 0 before the datum

    def __str__(self):
        return f"ReachedDatum({self.k})"

@dataclass(frozen=True)
class Truncated:
    k_max: int

    def __str__(self):
        return f"Truncated({self.k_max})"

##
# One stochastic back-time cycle anchored at (t, x, v).
#
# times[k-1], points[k-1], velocities[k-1] and normals[k-1] hold t_k, x_k, v_k
# and n(x_k) for every interaction with t_k > 0, so t > t_1 > t_2 > ... > 0
# and n(x_k).v_k > 0. last_time is the first back time that fell to or below
# zero (None when the cycle was truncated).
@dataclass
class BackTimeCycle:
    t: float
    x: np.ndarray
    v: np.ndarray
    times: list = field(default_factory=list)
    points: list = field(default_factory=list)
    velocities: list = field(default_factory=list)
    normals: list = field(default_factory=list)
    termination: object = None
    last_time: float = None

    @property
    def hits(self):
        return len(self.times)

    def truncated(self):
        return isinstance(self.termination, Truncated)

    def append(self, t_k, x_k, v_k, n_k):
        self.times.append(float(t_k))
        self.points.append(np.asarray(x_k, dtype=float))
        self.velocities.append(np.asarray(v_k, dtype=float))
        self.normals.append(np.asarray(n_k, dtype=float))

    ##
    # Largest distance between each stored x_k and the point obtained by
    # flying x_{k-1} - (t_{k-1} - t_k) v_{k-1} from the previous one. Wrap
    # re-maps the slab's periodic coordinates.
    def replay_error(self, wrap=None):
        t_prev, x_prev, v_prev = self.t, self.x, self.v
        worst = 0.0
        for t_k, x_k, v_k in zip(self.times, self.points, self.velocities):
            predicted = x_prev - (t_prev - t_k) * v_prev
            if wrap is not None:
                predicted = wrap(predicted)
            worst = max(worst, float(np.linalg.norm(predicted - x_k)))
            t_prev, x_prev, v_prev = t_k, x_k, v_k
        return worst

    def __str__(self):
        return f"BackTimeCycle(t {self.t}, hits {self.hits}, {self.termination})"
