import math

import pytest

from capgeo.cone import build_sharpness_disk
from capgeo.geom import ConformalDisk, FlatUnitDisk


@pytest.fixture(scope="session")
def flat():
    return FlatUnitDisk()


@pytest.fixture(scope="session")
def bump():
    # rotationally symmetric, K > 0, convex boundary
    return ConformalDisk("-0.15*r**2", name="bump")


@pytest.fixture(scope="session")
def sharp():
    return build_sharpness_disk(math.pi / 2)


# acceptance reporting ---------------------------------------------------------

def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def criterion(request, capsys):
    """Context manager printing one PASS/FAIL line for an acceptance criterion."""
    import contextlib
    import time

    @contextlib.contextmanager
    def check(number, title):
        t0 = time.perf_counter()
        ok = False
        try:
            yield
            ok = True
        finally:
            line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({time.perf_counter() - t0:.1f} s)"
            request.config.acceptance_lines.append(line)
            with capsys.disabled():
                print("\n" + line)

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
