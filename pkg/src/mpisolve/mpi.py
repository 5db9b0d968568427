"""The layered scene model: plane placement, premultiplied-alpha storage,
depth jitter, and the raw-channel <-> RGBA parameterization.

Planes are indexed back-to-front: index 0 is the deepest plane. Depths are
stored as disparities (1/depth) so an infinitely far plane is just
disparity 0; consequently disparities are strictly *increasing* along the
plane axis.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit as sigmoid

from .errors import ValidationError
from .geometry import Camera

logger = logging.getLogger(__name__)

ALPHA_EPS = 1e-6  # below this, unpremultiplying returns zero color


def plane_disparities(near: float, far: float, count: int) -> np.ndarray:
    """Disparities of ``count`` planes equally spaced in 1/depth, back to
    front (ascending). ``far`` may be inf."""
    if count < 1:
        raise ValidationError("plane count must be >= 1")
    if not 0 < near < far:
        raise ValidationError(f"need 0 < near < far, got near={near} far={far}")
    far_disp = 0.0 if np.isinf(far) else 1.0 / far
    return np.linspace(far_disp, 1.0 / near, count)


def make_plane_depths(near: float, far: float, count: int) -> np.ndarray:
    """Plane depths back to front (largest depth first); the far plane may
    be at infinity."""
    disp = plane_disparities(near, far, count)
    with np.errstate(divide="ignore"):
        return 1.0 / disp  # ascending disparity == descending depth


def jitter_depths(depths: np.ndarray, rng: np.random.Generator, relative_magnitude: float) -> np.ndarray:
    """Perturb each plane's disparity by uniform noise scaled by the local
    inter-plane disparity spacing. Output stays strictly monotone; inputs
    that would cross are clamped (and logged)."""
    if not 0 <= relative_magnitude < 0.5:
        raise ValidationError("jitter magnitude must be in [0, 0.5)")
    depths = np.asarray(depths, dtype=np.float64)
    with np.errstate(divide="ignore"):
        disp = 1.0 / depths  # descending depths -> ascending disparities
    if np.any(np.diff(disp) <= 0):
        raise ValidationError("depths must be strictly decreasing back to front")
    if relative_magnitude == 0:
        return depths.copy()
    spacing = np.gradient(disp) if len(disp) > 1 else np.zeros_like(disp)
    jittered = disp + rng.uniform(-relative_magnitude, relative_magnitude, disp.shape) * spacing
    clamped = False
    for i in range(1, len(jittered)):
        floor = jittered[i - 1] * (1 + 1e-9) + 1e-12
        if jittered[i] <= floor:
            jittered[i] = floor
            clamped = True
    if clamped:
        logger.warning("depth jitter clamped to preserve monotonicity")
    with np.errstate(divide="ignore"):
        return 1.0 / jittered


def convert_to_rgba(raw: np.ndarray) -> np.ndarray:
    """Map raw 4-channel values to valid premultiplied RGBA: sigmoid on all
    four channels, then multiply RGB by alpha."""
    raw = np.asarray(raw)
    alpha = sigmoid(raw[..., 3:4])
    rgb = sigmoid(raw[..., :3]) * alpha
    return np.concatenate([rgb, alpha], axis=-1).astype(raw.dtype, copy=False)


def unpremultiply(rgba: np.ndarray) -> np.ndarray:
    """Premultiplied -> straight alpha; color is zeroed where alpha is
    (numerically) zero."""
    alpha = rgba[..., 3:4]
    safe = np.where(alpha > ALPHA_EPS, alpha, 1.0)
    rgb = np.where(alpha > ALPHA_EPS, rgba[..., :3] / safe, 0.0)
    return np.concatenate([rgb, alpha], axis=-1).astype(rgba.dtype, copy=False)


def premultiply(straight: np.ndarray) -> np.ndarray:
    """Straight -> premultiplied alpha."""
    rgb = straight[..., :3] * straight[..., 3:4]
    return np.concatenate([rgb, straight[..., 3:4]], axis=-1).astype(
        straight.dtype, copy=False
    )


@dataclass
class Mpi:
    """A stack of premultiplied-RGBA planes in a reference camera's frustum.

    ``planes`` has shape (D, H, W, 4); ``disparities`` is strictly
    increasing (back to front).
    """

    reference: Camera
    disparities: np.ndarray
    planes: np.ndarray

    def __post_init__(self):
        self.disparities = np.asarray(self.disparities, dtype=np.float64)
        if self.planes.ndim != 4 or self.planes.shape[-1] != 4:
            raise ValidationError("planes must have shape (D, H, W, 4)")
        if self.planes.shape[0] != len(self.disparities):
            raise ValidationError("plane count does not match disparity count")
        if np.any(np.diff(self.disparities) <= 0) or np.any(self.disparities < 0):
            raise ValidationError("disparities must be non-negative and strictly increasing")

    @property
    def num_planes(self) -> int:
        return self.planes.shape[0]

    @property
    def plane_height(self) -> int:
        return self.planes.shape[1]

    @property
    def plane_width(self) -> int:
        return self.planes.shape[2]

    @property
    def depths(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / self.disparities

    def validate(self):
        """Full value check of the premultiplied-alpha invariants."""
        a = self.planes[..., 3]
        if np.any(a < 0) or np.any(a > 1 + 1e-6):
            raise ValidationError("alpha out of [0, 1]")
        if np.any(self.planes[..., :3] < -1e-6) or np.any(
            self.planes[..., :3] > self.planes[..., 3:4] + 1e-6
        ):
            raise ValidationError("premultiplied color must satisfy 0 <= c <= alpha")
        return self


@dataclass
class MpiState:
    """Solver state: raw (pre-sigmoid) RGBA channels plus extra carried
    channels, per plane. The renderable MPI is obtained via
    :func:`convert_to_rgba` on the first four channels."""

    reference: Camera
    disparities: np.ndarray
    raw: np.ndarray  # (D, H, W, 4 + E)

    @property
    def extra_channels(self) -> int:
        return self.raw.shape[-1] - 4

    @property
    def plane_height(self) -> int:
        return self.raw.shape[1]

    @property
    def plane_width(self) -> int:
        return self.raw.shape[2]

    def rgba(self) -> np.ndarray:
        return convert_to_rgba(self.raw[..., :4])

    def to_mpi(self) -> Mpi:
        return Mpi(self.reference, self.disparities, self.rgba())


def zero_state(reference: Camera, disparities, height: int, width: int,
               extra_channels: int = 4, dtype=np.float32) -> MpiState:
    raw = np.zeros((len(disparities), height, width, 4 + extra_channels), dtype=dtype)
    return MpiState(reference, np.asarray(disparities, dtype=np.float64), raw)
