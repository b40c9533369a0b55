import numpy as np
import pytest

from splatforge.geometry import Intrinsics, Pose


def random_rotation(rng):
    """Uniform-ish random rotation from a normalized quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def random_pose(rng, translation_scale=2.0):
    return Pose(random_rotation(rng), rng.uniform(-translation_scale, translation_scale, 3))


@pytest.fixture
def intr_100():
    return Intrinsics(fx=100.0, fy=100.0, cx=64.0, cy=64.0, width=128, height=128)
