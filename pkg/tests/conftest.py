import pytest

from clkinetic import utils
from clkinetic.WallPatch import WallPatch
from clkinetic.ConfigSettings import parse_config

@pytest.fixture
def rng():
    return utils.stream(20231, 99)

## wall with outward normal (0, 0, -1): incident velocities have u3 < 0
@pytest.fixture
def floor():
    return WallPatch(1.0, normal=(0.0, 0.0, -1.0))

@pytest.fixture
def make_config():
    def make(text="", **overrides):
        return parse_config(text, overrides)
    return make
