import sys
import time
from contextlib import contextmanager
from pathlib import Path

import hypothesis
import pytest

sys.path.insert(0, str(Path(__file__).parent))

hypothesis.settings.register_profile("default", max_examples=100, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"
MUSICXML_FIXTURES = sorted((FIXTURES / "musicxml").glob("[0-9]*.musicxml"))

_results = pytest.StashKey()


@pytest.fixture
def criterion(request):
    """Context manager recording one acceptance criterion as PASS/FAIL."""
    lines = request.config.stash.setdefault(_results, [])

    @contextmanager
    def run(label):
        t0 = time.perf_counter()
        try:
            yield
        except BaseException:
            lines.append(f"FAIL  {label}  ({time.perf_counter() - t0:.2f} s)")
            raise
        lines.append(f"PASS  {label}  ({time.perf_counter() - t0:.2f} s)")

    return run


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_results, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
