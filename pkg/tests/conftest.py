import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from elevpriv.core import Dataset, ElevationProfile

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_profile(values, label="A", source_id="p", coords=None):
    return ElevationProfile(np.asarray(values, dtype=float), coords, label, source_id)


@pytest.fixture
def toy_dataset():
    """Three small classes at clearly different elevation levels."""
    rng = np.random.default_rng(0)
    samples = []
    for ci, (lab, base) in enumerate([("A", 10.0), ("B", 200.0), ("C", 600.0)]):
        for i in range(12):
            v = base + np.cumsum(rng.normal(0, 2.0, 64))
            samples.append(make_profile(v, lab, f"{lab}-{i}"))
    return Dataset(samples, ("A", "B", "C"))


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number, ok, detail, seconds):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} ({seconds:.1f}s) {detail}"
        request.config.acceptance_lines.append(line)
        print(line)
        return ok

    return record
