from __future__ import annotations

import tempfile

import numpy as np
import pytest

from wavecurve.fda.basis import BasisSystem, Grid
from wavecurve.fda.smoothing import smooth_collection
from wavecurve.synthetic import wave_shape


@pytest.fixture
def grid():
    return Grid.daily(150)


@pytest.fixture
def basis(grid):
    return BasisSystem.for_grid(grid)


@pytest.fixture
def smooth(grid, basis):
    """Smooth an n x T matrix (or a single series) into curves on the daily grid."""

    def _smooth(values):
        return smooth_collection(np.atleast_2d(values), basis, None, grid).curves

    return _smooth


@pytest.fixture
def bumps(grid):
    """Gaussian waves peaking on the given days."""

    def _bumps(peaks, heights=None, width=10.0):
        heights = heights or [1.0] * len(peaks)
        return np.vstack([wave_shape(grid.points, p, h, width) for p, h in zip(peaks, heights)])

    return _bumps


@pytest.fixture
def workdir():
    with tempfile.TemporaryDirectory() as tmp:
        yield tmp
