import numpy as np
import pytest
from hypothesis import settings

from cavityspdc.combs import build_comb
from cavityspdc.crystal import CrystalSpec

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

GAMMA_S = 1 / 20.7e-9
GAMMA_I = 1 / 24.4e-9
# signal mode 0 on the 87Rb F=2 -> F'=1 line (see data/default.toml)
VAPOR_OFFSET = -1519.915e6


@pytest.fixture(scope="session")
def crystal():
    return CrystalSpec()


@pytest.fixture(scope="session")
def vapor_crystal():
    return CrystalSpec(degeneracy_offset=VAPOR_OFFSET)


@pytest.fixture(scope="session")
def combs(crystal):
    return build_comb(crystal, "z", GAMMA_S), build_comb(crystal, "y", GAMMA_I)


@pytest.fixture(scope="session")
def vapor_combs(vapor_crystal):
    return build_comb(vapor_crystal, "z", GAMMA_S), build_comb(vapor_crystal, "y", GAMMA_I)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
