import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("twistorlab", max_examples=40, deadline=None)
settings.load_profile("twistorlab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def shear_structure(c=0.7):
    """Non-integrable ACS field on R^4: the standard one conjugated by a point-dependent shear."""
    from twistorlab.core_linalg import standard_acs

    J0 = standard_acs(2)

    def I(x):
        S = np.eye(4)
        S[0, 2] = c * x[1]
        return S @ J0 @ np.linalg.inv(S)

    return I


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
