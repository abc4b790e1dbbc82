import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from circuits import DATA
from mnadec import assemble, load_netlist

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def buck():
    return load_netlist(DATA / "buck.net", order="paper-example")


@pytest.fixture(scope="session")
def buck_system(buck):
    return assemble(buck)


@pytest.fixture(scope="session")
def linear_buck_system():
    return assemble(load_netlist(DATA / "buck_linear.net", order="paper-example"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
