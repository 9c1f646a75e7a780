"""Shared fixtures for the ConvexLab test suite."""

import os
import sys

import pytest

# Same import root as main.py
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from convexlab.core.mesh import Rectangle, build_structured_mesh  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full convergence studies (deselect with -m 'not slow')")


@pytest.fixture
def mesh1_small():
    return build_structured_mesh("mesh1", 4)


@pytest.fixture
def mesh1_eighth():
    return build_structured_mesh("mesh1", 8)


@pytest.fixture
def unit_patch():
    """Mesh1 with h = 1 centered at the origin; the center vertex is 12."""
    return build_structured_mesh("mesh1", 4, Rectangle(-2.0, -2.0, 2.0, 2.0))


@pytest.fixture
def monopolist_mesh():
    return build_structured_mesh("mesh1", 4, Rectangle(1.0, 1.0, 2.0, 2.0))
