from dataclasses import replace

import pytest

from fenesim.config import build_setup, reference_config
from fenesim.solver import run

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = {}


def record(number, title, passed, detail):
    ACCEPTANCE[number] = (title, bool(passed), detail)
    print(f"criterion {number:>2} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")


def small_data_setup(**changes):
    return replace(build_setup(reference_config("small_data")), **changes)


def equilibrium_setup(**changes):
    return replace(build_setup(reference_config("equilibrium")), **changes)


@pytest.fixture(scope="session")
def dt_ladder():
    """Reference small-data trajectories at dt = 2e-2, 1e-2, 5e-3 up to t = 0.4."""
    return {dt: run(small_data_setup(dt=dt)) for dt in (2e-2, 1e-2, 5e-3)}


@pytest.fixture(scope="session")
def long_run():
    """Reference small-data run over 100 steps of 1e-2."""
    return run(small_data_setup(final_time=1.0))


@pytest.fixture(scope="session")
def equilibrium_run():
    return run(equilibrium_setup(final_time=1.0))
