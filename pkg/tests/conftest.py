import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sysrisk.core_model import IdealBankPath, ModelParams, Schedule
from sysrisk.lq_control import CooperationRates

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SCENARIOS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scenarios")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_params(n=10, sigma_a=0.8, sigma_l=0.6, rho_a=0.0, rho_l=0.0, a0=0.1, l0=0.06,
                failed_banks="retain", default_level=0.0):
    c = Schedule.constant
    sa = sigma_a if isinstance(sigma_a, Schedule) else c(sigma_a)
    sl = sigma_l if isinstance(sigma_l, Schedule) else c(sigma_l)
    ra = rho_a if isinstance(rho_a, Schedule) else c(rho_a, kind="correlation")
    rl = rho_l if isinstance(rho_l, Schedule) else c(rho_l, kind="correlation")
    return ModelParams(n, 0.1, 0.1, sa, sl, ra, rl, a0, l0, default_level, failed_banks)


@pytest.fixture
def fig1_params():
    return make_params()


@pytest.fixture
def coupled():
    return CooperationRates.constant(10.0, 10.0, 0.0, 1.0), IdealBankPath.constant(0.1, 0.06, 0.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
