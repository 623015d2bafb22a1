import numpy as np
import pytest


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(20240817))


ACCEPTANCE_LINES: list[str] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None and report.when == "call":
        status = "PASS" if report.passed else ("SKIPPED" if report.skipped else "FAIL")
        ACCEPTANCE_LINES.append(f"[ACCEPTANCE] {marker.args[0]}: {status}")


def pytest_terminal_summary(terminalreporter):
    # criterion outcomes stay visible even when plain prints are captured
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
