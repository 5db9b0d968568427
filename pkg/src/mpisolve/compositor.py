"""Forward rendering: over-compositing of warped plane stacks, plus the
net-transmittance and accumulated-over quantities used by the gradient
machinery.

All functions take a (D, H, W, 4) premultiplied-RGBA volume, back-to-front.
"""
from __future__ import annotations

import numpy as np

from . import geometry


def net_transmittance(vol: np.ndarray) -> np.ndarray:
    """T_d = product over planes in front of d of (1 - alpha).

    Returns (D, H, W, 1). The front-most plane has T = 1 (empty product);
    T is non-increasing from front to back.
    """
    q = 1.0 - vol[..., 3:4]
    t = np.ones_like(q)
    if vol.shape[0] > 1:
        t[:-1] = np.cumprod(q[::-1], axis=0)[::-1][1:]
    return t


def accumulated_over(vol: np.ndarray) -> np.ndarray:
    """A_d = composite of all planes strictly behind plane d.

    Returns (D, H, W, 3); the back-most plane has A = 0 (empty sum). The
    recurrence A_{d+1} = c_d + (1 - alpha_d) * A_d holds exactly.
    """
    a = np.zeros(vol.shape[:-1] + (3,), dtype=vol.dtype)
    for d in range(1, vol.shape[0]):
        a[d] = vol[d - 1, ..., :3] + (1.0 - vol[d - 1, ..., 3:4]) * a[d - 1]
    return a


def over_composite(vol: np.ndarray) -> np.ndarray:
    """Repeated premultiplied over, back to front: sum of c_d weighted by
    the net transmittance. Returns (H, W, 3)."""
    return np.sum(vol[..., :3] * net_transmittance(vol), axis=0)


def sweep_composite(vol: np.ndarray):
    """One back-to-front sweep producing (composite, T, A) together.

    Matches the three independent definitions to float precision.
    """
    d, h, w, _ = vol.shape
    t = np.empty((d, h, w, 1), dtype=vol.dtype)
    a = np.empty((d, h, w, 3), dtype=vol.dtype)
    a[0] = 0.0
    for i in range(1, d):
        a[i] = vol[i - 1, ..., :3] + (1.0 - vol[i - 1, ..., 3:4]) * a[i - 1]
    t[d - 1] = 1.0
    for i in range(d - 2, -1, -1):
        t[i] = t[i + 1] * (1.0 - vol[i + 1, ..., 3:4])
    out = np.sum(vol[..., :3] * t, axis=0)
    return out, t, a


def render(mpi, target) -> np.ndarray:
    """Render an MPI into a target camera: warp every plane, then composite."""
    return over_composite(geometry.warp_mpi_to_view(mpi, target))
