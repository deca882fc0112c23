from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import itersal


@pytest.fixture()
def rng():
    # function-scoped so draws never depend on test execution order
    return np.random.default_rng(20260808)


@pytest.fixture(scope="session")
def warm_kernel():
    """Compile the delineation kernel once so timed tests measure compute."""
    image = itersal.rgb_to_lab(np.zeros((8, 8, 3), np.uint8))
    seeds = itersal.SeedSet(coords=np.array([[0, 0], [7, 7]]), object_flags=np.zeros(2, bool))
    itersal.delineate(image, np.full((8, 8), 0.5), seeds,
                          itersal.SuperpixelParams(n=2, inner_iters=1))


def random_lab_image(rng, height, width, channels=3):
    if channels == 1:
        return itersal.rgb_to_lab(rng.integers(0, 256, (height, width), np.uint8))
    return itersal.rgb_to_lab(rng.integers(0, 256, (height, width, 3), np.uint8))


def flat_gray_image(height, width, level=128):
    return itersal.rgb_to_lab(np.full((height, width, 3), level, np.uint8))
