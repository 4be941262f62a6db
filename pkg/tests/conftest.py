from __future__ import annotations

import numpy as np
import pytest

from hassenet import kernels

BACKENDS = ["python"]
try:
    kernels.load("cython")
    BACKENDS.append("cython")
except ImportError:
    pass


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=BACKENDS)
def kmod(request):
    """Each available kernel implementation in turn."""
    return kernels.load(request.param)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
