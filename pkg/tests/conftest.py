import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from legkit.reference import build_massless_leg, build_tello, build_tello_serial  # noqa: E402

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def tello():
    return build_tello()


@pytest.fixture(scope="session")
def tello_serial():
    return build_tello_serial()


@pytest.fixture(scope="session")
def massless():
    return build_massless_leg()


@pytest.fixture(scope="session")
def default_jump(tello):
    from legkit.jump import run_jump
    return run_jump(tello)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _ACCEPTANCE[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        mark = "PASS" if _ACCEPTANCE[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {name}")
