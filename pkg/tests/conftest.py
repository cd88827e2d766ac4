import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

from apsets import PointSet  # noqa: E402


def integer_window(lo, hi, radius=None, dim=1):
    """``Z^dim`` points with coordinates in ``[lo, hi]`` inside the window."""
    axis = np.arange(lo, hi + 1, dtype=float)
    grid = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    if radius is None:
        radius = float(max(abs(lo), abs(hi))) * (dim ** 0.5)
    grid = grid[np.linalg.norm(grid, axis=1) <= radius]
    return PointSet.from_points(grid, radius, dim)


@pytest.fixture
def Z20():
    return integer_window(-20, 20, 20)


ACCEPTANCE_LINES: list = []


@pytest.fixture
def acceptance_line():
    """Record one ``PASS``/``FAIL`` line per acceptance criterion; printed at session end."""

    def record(number, ok, detail):
        line = f"acceptance {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
