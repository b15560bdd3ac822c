import logging

import numpy as np
import pytest

from ohmic_if.expsum import build, build_range
from ohmic_if.kernel import BathSpec


@pytest.fixture(scope="session")
def weak_bath():
    return BathSpec(0.1, 1.0)


@pytest.fixture(scope="session")
def reference_expsum(weak_bath):
    """Certified decomposition at (alpha, omega_c, T, eps) = (0.1, 1, 20, 1e-3)."""
    return build(weak_bath, 20.0, 1e-3)


@pytest.fixture(scope="session")
def toy3():
    """Three-node toy decomposition with sizeable truncation effects."""
    return build_range(BathSpec(3.0, 1.0), 1.0, -1, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _quiet_norm_warnings(caplog):
    # norm growth diagnostics are asserted explicitly where they matter
    caplog.set_level(logging.ERROR, logger="ohmic_if")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
