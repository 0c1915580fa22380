import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from nbvsearch.forest import ForestParams, generate_scene, place_manikins  # noqa: E402
from nbvsearch.mesh import TriangleMesh  # noqa: E402


def random_soup(rng, n_faces, scale=10.0):
    """Random triangles of moderate size scattered in a cube."""
    centers = rng.uniform(-scale, scale, (n_faces, 1, 3))
    verts = (centers + rng.normal(0, scale / 6, (n_faces, 3, 3))).reshape(-1, 3)
    return TriangleMesh(verts, np.arange(3 * n_faces).reshape(-1, 3))


@pytest.fixture(scope="session")
def small_params():
    return ForestParams(width=10.0, depth=10.0, density=0.12)


@pytest.fixture(scope="session")
def small_scene(small_params):
    return generate_scene(small_params, seed=7)


@pytest.fixture(scope="session")
def small_manikins(small_scene):
    return place_manikins(small_scene, 4, seed=3)
