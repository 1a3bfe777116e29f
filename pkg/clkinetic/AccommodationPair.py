import math
import logging

from .KineticResponse import DomainError

log = logging.getLogger(__name__)

##
# The two accommodation coefficients of the Cercignani-Lampis kernel:
# r_perp for normal kinetic energy and r_par for tangential momentum.
#
# The closed box 0 <= r_perp <= 1, 0 <= r_par <= 2 is accepted so that the
# deterministic limits (specular (0,0), bounce-back (0,2)) can be expressed;
# admissible() is the open condition under which the kernel has a density
# and the well-posedness theorem applies.
class AccommodationPair:

    def __init__(self, r_perp, r_par):
        self.r_perp = float(r_perp)
        self.r_par  = float(r_par)

        if not (0.0 <= self.r_perp <= 1.0) or math.isnan(self.r_perp):
            raise DomainError(f"r_perp must satisfy 0 < r_perp <= 1 (got {self.r_perp})")
        if not (0.0 <= self.r_par <= 2.0) or math.isnan(self.r_par):
            raise DomainError(f"r_par must satisfy 0 < r_par < 2 (got {self.r_par})")

    ## 0 < r_perp <= 1 and 0 < r_par < 2
    def admissible(self):
        return 0.0 < self.r_perp <= 1.0 and 0.0 < self.r_par < 2.0

    def singular(self):
        return not self.admissible()

    def is_specular(self):
        return self.r_perp == 0.0 and self.r_par == 0.0

    def is_bounce_back(self):
        return self.r_perp == 0.0 and self.r_par == 2.0

    def is_diffuse(self):
        return self.r_perp == 1.0 and self.r_par == 1.0

    ## r_par (2 - r_par), the tangential variance factor
    @property
    def par_factor(self):
        return self.r_par * (2.0 - self.r_par)

    @property
    def r_max(self):
        return max(self.par_factor, self.r_perp)

    @property
    def r_min(self):
        return min(self.par_factor, self.r_perp)

    def as_tuple(self):
        return (self.r_perp, self.r_par)

    def __eq__(self, other):
        return isinstance(other, AccommodationPair) and self.as_tuple() == other.as_tuple()

    def __hash__(self):
        return hash(self.as_tuple())

    def __str__(self):
        return f"(r_perp {self.r_perp}, r_par {self.r_par})"

    def __repr__(self):
        return f"AccommodationPair({self.r_perp!r}, {self.r_par!r})"
