from pathlib import Path

import pytest

from ccforest import example_dir, load_run
from ccforest.simulator import SimParams, simulate

EXAMPLE = Path(str(example_dir()))

_acceptance = {}


@pytest.fixture(scope="session")
def example_paths():
    return {
        "coverage": EXAMPLE / "coverage.csv",
        "instrumentation": EXAMPLE / "instrumentation.csv",
        "faults": EXAMPLE / "faults.txt",
        "truth": EXAMPLE / "truth.txt",
    }


@pytest.fixture(scope="session")
def example_run(example_paths):
    return load_run(example_paths["coverage"], example_paths["instrumentation"], example_paths["faults"])


@pytest.fixture(scope="session")
def small_sim():
    return simulate(SimParams(n_passing=40, n_failing=6, cc_rate=0.1, seed=3))


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance[report.nodeid.split("::")[-1]] = report.outcome
    elif report.when == "setup" and report.failed and "test_acceptance.py" in report.nodeid:
        _acceptance[report.nodeid.split("::")[-1]] = "error"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_acceptance.items()):
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}")
