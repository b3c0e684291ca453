import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cmor.bank import DeviceParams  # noqa: E402


@pytest.fixture
def ideal_params():
    """No variation, no parasitic conduction."""
    return DeviceParams(lrs_sigma=0.0, hrs_sigma=0.0, hrs_nominal=0.0, parasitic_enabled=0.0)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's outcome for the end-of-run summary."""
    label = request.node.get_closest_marker("criterion").args[0]
    outcome = {"ok": False}
    yield outcome
    ACCEPTANCE_LINES.append(f"{'PASS' if outcome['ok'] else 'FAIL'}  {label}")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
