import time

import pytest

from impulse_gap.scenario import load_scenario, shipped_scenario_path

# One entry per acceptance criterion: (number, title, passed, detail, seconds, limit).
ACCEPTANCE_RESULTS: list[tuple] = []


class AcceptanceRecorder:
    def __init__(self, number: int, title: str, limit: float):
        self.number, self.title, self.limit = number, title, limit
        self.detail = ""
        self.start = time.perf_counter()

    def finish(self, passed: bool, detail: str) -> float:
        elapsed = time.perf_counter() - self.start
        ok = bool(passed) and elapsed < self.limit
        ACCEPTANCE_RESULTS.append((self.number, self.title, ok, detail, elapsed, self.limit))
        return elapsed


@pytest.fixture
def acceptance():
    return AcceptanceRecorder


@pytest.fixture(scope="session")
def pure_jump():
    return load_scenario(shipped_scenario_path("pure_jump"))


@pytest.fixture(scope="session")
def reach_point():
    return load_scenario(shipped_scenario_path("reach_point"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail, elapsed, limit in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:2d}. {title}: {detail} ({elapsed:.1f}s < {limit:.0f}s)")
