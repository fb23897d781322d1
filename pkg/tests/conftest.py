import os
from pathlib import Path

import numpy as np
import pytest

from topovertex import grid_fem as fem
from topovertex import scene
from topovertex.exterior import build_graded_grid


@pytest.fixture(scope="session")
def params():
    return fem.SolveParams()


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    """Polarization cache shared by the whole session.

    Starts empty unless TOPOVERTEX_TEST_CACHE points at an existing cache, so
    a plain run measures precompute honestly.
    """
    env = os.environ.get("TOPOVERTEX_TEST_CACHE")
    if env:
        path = Path(env)
        path.mkdir(parents=True, exist_ok=True)
        return path
    return tmp_path_factory.mktemp("polcache")


@pytest.fixture(scope="session")
def exterior_grid():
    return build_graded_grid()


@pytest.fixture(scope="session")
def pixel_grid():
    return scene.image_grid(100)


@pytest.fixture(scope="session")
def cube1(pixel_grid):
    spec = scene.builtin_scene("cube", (15, 10, 5, 0))
    return spec, scene.rasterize(spec, pixel_grid)


def quadratic_field(grid, c):
    """``c0 + c1 x + c2 y + c3 x^2 + c4 x y + c5 y^2`` at the nodes."""
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    return c[0] + c[1] * X + c[2] * Y + c[3] * X ** 2 + c[4] * X * Y + c[5] * Y ** 2
