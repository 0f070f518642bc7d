import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ecsflow.flow import FlowConfig, run
from ecsflow.seeds import circle, whitney_lobe

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def whitney_run_512():
    """Whitney seed m = 2, N = 512, evolved until max|A| grows 25x."""
    return run(whitney_lobe(2, 512), FlowConfig(a_stop_factor=25.0))


@pytest.fixture(scope="session")
def circle_run():
    return run(circle(2, 256, 1.0), FlowConfig(a_stop_factor=60.0))


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    def report(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
