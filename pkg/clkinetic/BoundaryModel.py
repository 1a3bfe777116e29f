import logging

from .AccommodationPair import AccommodationPair
from .KineticResponse import DomainError

log = logging.getLogger(__name__)

##
# Which reflection law a wall obeys.
#
# CL carries an AccommodationPair; Maxwell carries the diffuse weight c (the
# rest of the mass is specular). Diffuse, Specular and BounceBack are the
# Cercignani-Lampis kernel at (1,1), (0,0) and (0,2) and report that pair from
# accommodation().
class BoundaryModel:

    CL          = "cl"
    DIFFUSE     = "diffuse"
    SPECULAR    = "specular"
    BOUNCE_BACK = "bounceback"
    MAXWELL     = "maxwell"

    TAGS = [CL, DIFFUSE, SPECULAR, BOUNCE_BACK, MAXWELL]

    def __init__(self, tag, r=None, c=None):
        tag = str(tag).lower().replace("-", "").replace("_", "")
        if tag == "bounce":
            tag = self.BOUNCE_BACK
        if tag not in self.TAGS:
            raise DomainError(f"unknown boundary model {tag} (expected one of {', '.join(self.TAGS)})")
        self.tag = tag
        self.r = None
        self.c = None

        if tag == self.CL:
            if r is None:
                raise DomainError("CL boundary model needs an AccommodationPair")
            self.r = r if isinstance(r, AccommodationPair) else AccommodationPair(*r)
        elif tag == self.MAXWELL:
            c = 1.0 if c is None else float(c)
            if not 0.0 <= c <= 1.0:
                raise DomainError(f"Maxwell weight c must lie in [0, 1] (got {c})")
            self.c = c

    # ##########################################################################
    # factories
    # ##########################################################################

    @classmethod
    def cl(cls, r_perp, r_par):
        return cls(cls.CL, r=AccommodationPair(r_perp, r_par))

    @classmethod
    def diffuse(cls):
        return cls(cls.DIFFUSE)

    @classmethod
    def specular(cls):
        return cls(cls.SPECULAR)

    @classmethod
    def bounce_back(cls):
        return cls(cls.BOUNCE_BACK)

    @classmethod
    def maxwell(cls, c):
        return cls(cls.MAXWELL, c=c)

    # ##########################################################################
    # queries
    # ##########################################################################

    ## equivalent CL pair, or None for the Maxwell mixture
    def accommodation(self):
        if self.tag == self.CL:
            return self.r
        elif self.tag == self.DIFFUSE:
            return AccommodationPair(1.0, 1.0)
        elif self.tag == self.SPECULAR:
            return AccommodationPair(0.0, 0.0)
        elif self.tag == self.BOUNCE_BACK:
            return AccommodationPair(0.0, 2.0)
        return None

    ## True when every re-emitted velocity is a deterministic function of the incident one
    def deterministic(self):
        pair = self.accommodation()
        if pair is None:
            return self.c == 0.0
        return pair.is_specular() or pair.is_bounce_back()

    def __eq__(self, other):
        return (isinstance(other, BoundaryModel) and self.tag == other.tag
                and self.r == other.r and self.c == other.c)

    def __hash__(self):
        return hash((self.tag, self.r, self.c))

    def __str__(self):
        if self.tag == self.CL:
            return f"CL{self.r}"
        if self.tag == self.MAXWELL:
            return f"Maxwell(c {self.c})"
        return self.tag
