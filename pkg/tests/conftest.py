import math

import pytest
from hypothesis import HealthCheck, settings

import cs2dcool as c

settings.register_profile("ci", max_examples=40, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

NO_RECOIL = (0.0, 0.0, 0.0)
TWO_PI = 2 * math.pi


@pytest.fixture(scope="session")
def baseline():
    return c.derive_params(c.ExperimentConfig())


@pytest.fixture(scope="session")
def goldilocks():
    """R = 80 nm, P = 0.7 W, recoil off."""
    return c.derive_params(c.ExperimentConfig(radius=80e-9, tweezer_power=0.7,
                                              recoil_override=NO_RECOIL))


def thermometry_config(near_circular=False, **kw):
    base = dict(radius=80e-9, tweezer_power=0.8, detuning=-TWO_PI * 400e3,
                recoil_override=NO_RECOIL)
    if near_circular:
        base["waist_x"] = 0.68e-6
    base.update(kw)
    return c.ExperimentConfig(**base)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
