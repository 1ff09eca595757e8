import os
from unittest.mock import patch

import numpy as np
import pytest

from src.spectral.surface_geometry import build_ellipsoid, build_grid, build_sphere, build_torus


@pytest.fixture(autouse=True)
def mock_env():
    """Mock environment variables for testing."""
    env_vars = {
        "LOG_LEVEL": "DEBUG",
        "SHELLSPECTRA_THREADS": "2",
    }
    with patch.dict(os.environ, env_vars):
        yield


@pytest.fixture
def unit_sphere():
    return build_sphere(1.0)


@pytest.fixture
def ellipsoid():
    """Triaxial ellipsoid with semi-axes 1.2, 1.0, 0.8."""
    return build_ellipsoid(1.2, 1.0, 0.8)


@pytest.fixture
def torus():
    return build_torus(2.0, 1.0)


@pytest.fixture
def sphere_grid(unit_sphere):
    """Coarse grid on the unit sphere, small enough for dense 4N x 4N matrices."""
    return build_grid(unit_sphere, 6)


@pytest.fixture
def random_normals():
    rng = np.random.default_rng(7)
    v = rng.normal(size=(16, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@pytest.fixture
def output_dir(tmp_path):
    """Per-test directory for command output."""
    path = tmp_path / "results"
    path.mkdir()
    return path
