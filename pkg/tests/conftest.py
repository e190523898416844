import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from microloc.geometry import MetricSpec

settings.register_profile(
    "microloc", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("microloc")


@pytest.fixture
def minkowski():
    return MetricSpec.minkowski()


@pytest.fixture
def schwarzschild():
    return MetricSpec.schwarzschild(1.0)


@pytest.fixture
def frw():
    return MetricSpec.frw_flat("power", a0=1.0, exponent=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion."""

    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
