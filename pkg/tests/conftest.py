from pathlib import Path

import pytest
from hypothesis import settings

from turnlane import fileio
from turnlane.geo import GeoTransform

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def leon_rows():
    return fileio.read_csv(DATA / "leon_metrics.csv")


@pytest.fixture
def duval_rows():
    return fileio.read_csv(DATA / "duval_counts.csv")


@pytest.fixture
def transform():
    return GeoTransform(1000.0, 2000.0, 0.5)


# -- acceptance summary ------------------------------------------------------

_acceptance: dict[str, tuple[str, float]] = {}


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _acceptance[crit] = ("PASS" if report.passed else "FAIL", report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_acceptance, key=lambda c: int(c.split(".")[0])):
        status, secs = _acceptance[crit]
        terminalreporter.write_line(f"{status}  {crit}  ({secs:.2f} s)")
