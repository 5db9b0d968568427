import numpy as np
import pytest

from mpisolve.geometry import Camera


def make_camera(focal=50.0, size=16, center=(0.0, 0.0, 0.0), rotation=None,
                principal=None):
    if principal is None:
        principal = (size / 2.0, size / 2.0)
    k = np.array([
        [focal, 0.0, principal[0]],
        [0.0, focal, principal[1]],
        [0.0, 0.0, 1.0],
    ])
    r = np.eye(3) if rotation is None else np.asarray(rotation)
    c = np.asarray(center, dtype=np.float64)
    return Camera(k, r, -r @ c, size, size)


def random_rotation(rng, scale=0.2):
    """Small random rotation via Rodrigues' formula."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-scale, scale)
    kx = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * kx @ kx


def random_volume(rng, num_planes, height, width):
    """Valid premultiplied RGBA volume."""
    alpha = rng.uniform(0.0, 1.0, (num_planes, height, width, 1))
    color = rng.uniform(0.0, 1.0, (num_planes, height, width, 3)) * alpha
    return np.concatenate([color, alpha], axis=-1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
