"""Cameras, plane-induced homographies, and bilinear image warping.

Conventions
-----------
* World -> camera: ``x_cam = R @ X + t``; intrinsics map camera coordinates
  to pixels as ``p ~ K @ x_cam``.
* Pixel coordinate (x, y) with x along width, y along height; the sample
  location of integer pixel index (i, j) is exactly (i, j) (no half-pixel
  offset).
* Warping is backward: output pixel p reads the source at ``H^-1 @ p`` with
  bilinear interpolation, zero outside the source image.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .kernels import bilinear_gather

_DET_EPS = 1e-12


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: intrinsics plus world->camera rigid pose."""

    intrinsics: np.ndarray  # 3x3 upper triangular, pixels
    rotation: np.ndarray  # 3x3 orthonormal, world -> camera
    translation: np.ndarray  # 3-vector, meters
    width: int
    height: int

    def __post_init__(self):
        k = np.asarray(self.intrinsics, dtype=np.float64)
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if k.shape != (3, 3) or r.shape != (3, 3):
            raise ValidationError("intrinsics and rotation must be 3x3")
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise ValidationError("focal lengths must be positive")
        if np.any(np.abs(k[np.tril_indices(3, -1)]) > 0):
            raise ValidationError("intrinsics must be upper triangular")
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9:
            raise ValidationError("rotation must be orthonormal (tol 1e-9)")
        object.__setattr__(self, "intrinsics", k)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_dict(self) -> dict:
        return {
            "intrinsics": [float(v) for v in self.intrinsics.ravel()],
            "rotation": [float(v) for v in self.rotation.ravel()],
            "translation": [float(v) for v in self.translation],
            "width": int(self.width),
            "height": int(self.height),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        try:
            return cls(
                intrinsics=np.asarray(d["intrinsics"], dtype=np.float64).reshape(3, 3),
                rotation=np.asarray(d["rotation"], dtype=np.float64).reshape(3, 3),
                translation=np.asarray(d["translation"], dtype=np.float64),
                width=int(d["width"]),
                height=int(d["height"]),
            )
        except (KeyError, TypeError) as e:
            raise ValidationError(f"malformed camera record: {e}") from e

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "Camera":
        return cls.from_dict(json.loads(s))


def relative_pose(ref: Camera, target: Camera):
    """Rigid transform target <- reference: (R, t) with x_t = R x_r + t."""
    r = target.rotation @ ref.rotation.T
    t = target.translation - r @ ref.translation
    return r, t


def plane_homography(ref: Camera, target: Camera, depth: float) -> np.ndarray:
    """Homography mapping reference pixels on the fronto-parallel plane at
    ``depth`` (in the reference frame) to target pixels.

    ``depth`` may be ``inf`` (plane at infinity in disparity terms).
    """
    if not depth > 0:
        raise ValidationError(f"plane depth must be positive, got {depth}")
    return homography_from_disparity(ref, target, 0.0 if np.isinf(depth) else 1.0 / depth)


def homography_from_disparity(ref: Camera, target: Camera, disparity: float) -> np.ndarray:
    """Same as :func:`plane_homography` parameterized by 1/depth (0 = infinity)."""
    if disparity < 0:
        raise ValidationError("disparity must be >= 0")
    r, t = relative_pose(ref, target)
    n = np.array([0.0, 0.0, 1.0])
    h_cam = r + np.outer(t, n) * disparity
    k_ref_inv = _invert(ref.intrinsics, "reference intrinsics")
    return target.intrinsics @ h_cam @ k_ref_inv


def _invert(m: np.ndarray, what: str) -> np.ndarray:
    if abs(np.linalg.det(m)) < _DET_EPS:
        raise NumericalError(f"singular {what} (|det| < {_DET_EPS})")
    return np.linalg.inv(m)


def apply_homography(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Apply h to an (N, 2) array of pixel coordinates.

    Raises if any point maps behind the line at infinity (w <= 0), which
    would invalidate convex-hull reasoning downstream.
    """
    pts = np.asarray(pts, dtype=np.float64)
    homog = np.concatenate([pts, np.ones((pts.shape[0], 1))], axis=1)
    mapped = homog @ h.T
    w = mapped[:, 2]
    if np.any(w <= 0):
        raise NumericalError("homography maps point across the plane at infinity")
    return mapped[:, :2] / w[:, None]


def homography_grid(h_inv: np.ndarray, out_rect, dtype=np.float64):
    """Source coordinates for each pixel of ``out_rect`` = (x0, y0, w, h).

    ``h_inv`` maps output pixels to source pixel coordinates. Returns
    (xs, ys) arrays of shape (h, w).
    """
    x0, y0, w, h = out_rect
    xg, yg = np.meshgrid(
        np.arange(x0, x0 + w, dtype=dtype), np.arange(y0, y0 + h, dtype=dtype)
    )
    denom = h_inv[2, 0] * xg + h_inv[2, 1] * yg + h_inv[2, 2]
    xs = (h_inv[0, 0] * xg + h_inv[0, 1] * yg + h_inv[0, 2]) / denom
    ys = (h_inv[1, 0] * xg + h_inv[1, 1] * yg + h_inv[1, 2]) / denom
    return xs, ys


def warp_region(src: np.ndarray, h: np.ndarray, out_rect, src_origin=(0, 0)) -> np.ndarray:
    """Backward-warp ``src`` through ``h`` onto the output rect.

    ``out_rect`` = (x0, y0, w, h) in global output pixel coordinates;
    ``src_origin`` is the global coordinate of src[0, 0] (src may be a crop
    of a larger image). Computing a crop of the output with a matching source
    crop is bit-identical to cropping the full warp, provided every in-image
    tap lies inside the crop.
    """
    h = np.asarray(h, dtype=np.float64)
    h_inv = _invert(h, "homography")
    return warp_with_map(src, h_inv, out_rect, src_origin)


def warp_with_map(src: np.ndarray, mapping: np.ndarray, out_rect, src_origin=(0, 0)) -> np.ndarray:
    """Like :func:`warp_region` but takes the output->source pixel mapping
    directly (i.e. the already-inverted homography)."""
    xs, ys = homography_grid(np.asarray(mapping, dtype=np.float64), out_rect)
    ox, oy = src_origin
    return bilinear_gather(src, xs - ox, ys - oy)


def warp_image(src: np.ndarray, h: np.ndarray, out_width: int, out_height: int) -> np.ndarray:
    """Warp a full image: output pixel p samples src at ``h^-1 @ p``."""
    if not np.all(np.isfinite(src)):
        raise ValidationError("source image contains non-finite values")
    return warp_region(src, h, (0, 0, out_width, out_height))


def warp_mpi_to_view(mpi, target: Camera) -> np.ndarray:
    """Warp every MPI plane into the target view's pixel grid.

    Returns a (D, target.height, target.width, C) volume.
    """
    out = np.empty(
        (len(mpi.disparities), target.height, target.width, mpi.planes.shape[-1]),
        dtype=mpi.planes.dtype,
    )
    for d, disp in enumerate(mpi.disparities):
        h = homography_from_disparity(mpi.reference, target, disp)
        out[d] = warp_region(mpi.planes[d], h, (0, 0, target.width, target.height))
    return out


def inverse_warp_volume(vol: np.ndarray, target: Camera, mpi_geom) -> np.ndarray:
    """Warp a per-plane volume from target-view space back to MPI space.

    ``vol`` holds one image per MPI plane in the target view's grid;
    ``mpi_geom`` supplies the reference camera, disparities and plane dims.
    Uses the inverse of each plane's homography.
    """
    if vol.shape[0] != len(mpi_geom.disparities):
        raise ValidationError(
            f"plane count mismatch: volume has {vol.shape[0]}, "
            f"MPI has {len(mpi_geom.disparities)}"
        )
    out = np.empty(
        (vol.shape[0], mpi_geom.plane_height, mpi_geom.plane_width, vol.shape[-1]),
        dtype=vol.dtype,
    )
    for d, disp in enumerate(mpi_geom.disparities):
        h = homography_from_disparity(mpi_geom.reference, target, disp)
        out[d] = warp_with_map(
            vol[d], h, (0, 0, mpi_geom.plane_width, mpi_geom.plane_height)
        )
    return out
