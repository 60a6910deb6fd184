import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.analysis.distributions import lognormal_from_moments
from src.analysis.povm import DetectorModel
from src.analysis.timegrid import TimeGrid

REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
SCENARIO_DIR = os.path.join(REPO_ROOT, "data", "scenarios")


@pytest.fixture
def jitter_half():
    """Log-normal response with mean 1 and std 1/2 (support cutoff near 12.6)."""
    return lognormal_from_moments(1.0, 0.5)


@pytest.fixture
def jitter_quarter():
    """Log-normal response with mean 1 and std 1/4 (support cutoff near 3.9)."""
    return lognormal_from_moments(1.0, 0.25)


@pytest.fixture
def ideal_detector(jitter_half):
    return DetectorModel(1.0, jitter_half)


@pytest.fixture
def fig2_grid():
    return TimeGrid.from_step(0.0, 13.0, 0.005)


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR
