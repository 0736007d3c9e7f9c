from importlib import resources
from pathlib import Path

import pytest

DATA = Path(str(resources.files("homeconflict") / "data"))
MOTIVATING = DATA / "motivating"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def motivating_dir():
    return MOTIVATING


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for one acceptance criterion.

    Usage: ``with criterion(3, "synthetic recall") as note: ...; note("detail")``.
    """
    from contextlib import contextmanager

    @contextmanager
    def run(number: int, title: str):
        details = []
        ok = False
        try:
            yield details.append
            ok = True
        finally:
            status = "PASS" if ok else "FAIL"
            extra = f" ({'; '.join(details)})" if details else ""
            ACCEPTANCE_LINES[number] = f"criterion {number} {status}: {title}{extra}"

    return run


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
