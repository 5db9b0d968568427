"""Closed-form gradients of the over-compositing operator, per-view
gradient-component assembly, and an explicit L2 loss gradient.

The compositing gradients are exact. Warping gradients use the per-plane
inverse homography with the same bilinear sampler, which is exact for the
translational warps of laterally-offset views and an approximation
otherwise; the exact scatter adjoint lives in the trainer's autodiff ops.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import compositor, geometry
from .errors import ValidationError

# Channel layout of a gradient-components volume.
COMPONENT_CHANNELS = 10  # input PSV (3) + rendered PSV (3) + A (3) + T (1)
SLICE_INPUT = slice(0, 3)
SLICE_RENDERED = slice(3, 6)
SLICE_ACCUM = slice(6, 9)
SLICE_TRANSMIT = slice(9, 10)
SLICE_MASK = slice(10, 11)  # validity mask, only when with_mask=True


@dataclass
class MpiGradient:
    """Per-plane gradient w.r.t. premultiplied color (D, H, W, 3) and
    alpha (D, H, W, 1)."""

    color: np.ndarray
    alpha: np.ndarray


def over_grad_color(vol: np.ndarray) -> np.ndarray:
    """d(composite)/d(c_d): identical to the net transmittance (shared
    code path, asserted by tests)."""
    return compositor.net_transmittance(vol)


def over_grad_alpha(vol: np.ndarray) -> np.ndarray:
    """d(composite)/d(alpha_d) = -(accumulated over) * (net transmittance),
    one value per color channel. Returns (D, H, W, 3)."""
    return -compositor.accumulated_over(vol) * compositor.net_transmittance(vol)


def gradient_components(mpi, view_camera, view_image, with_mask: bool = False) -> np.ndarray:
    """Per-view gradient components in MPI space.

    Renders the MPI into the view, computes the accumulated over and net
    transmittance there, broadcasts the input and rendered images across
    depth, inverse-warps everything per plane and concatenates channelwise:
    [input (3), rendered (3), A (3), T (1)] -> (D, H, W, 10).

    With ``with_mask=True`` an 11th channel carries the inverse-warp
    validity mask so a consumer can tell off-screen zeros from real zeros.
    """
    view_image = np.asarray(view_image)
    if view_image.shape[:2] != (view_camera.height, view_camera.width):
        raise ValidationError("view image dimensions do not match its camera")
    warped = geometry.warp_mpi_to_view(mpi, view_camera)
    rendered, t, a = compositor.sweep_composite(warped)

    d = warped.shape[0]
    stack = np.empty(warped.shape[:3] + (COMPONENT_CHANNELS + (1 if with_mask else 0),),
                     dtype=warped.dtype)
    stack[..., SLICE_INPUT] = np.broadcast_to(view_image, (d,) + view_image.shape)
    stack[..., SLICE_RENDERED] = np.broadcast_to(rendered, (d,) + rendered.shape)
    stack[..., SLICE_ACCUM] = a
    stack[..., SLICE_TRANSMIT] = t
    if with_mask:
        stack[..., SLICE_MASK] = 1.0
    return geometry.inverse_warp_volume(stack, view_camera, mpi)


def l2_loss_gradient(mpi, views) -> MpiGradient:
    """Gradient of sum_k ||render_k - I_k||^2 w.r.t. the premultiplied MPI
    parameters, assembled from the closed-form compositing gradients and
    the inverse-warp approximation of the warp adjoint.

    ``views`` is a sequence of (Camera, image) pairs.
    """
    if len(views) == 0:
        raise ValidationError("need at least one view")
    gc = np.zeros(mpi.planes.shape[:3] + (3,), dtype=np.result_type(mpi.planes.dtype))
    ga = np.zeros(mpi.planes.shape[:3] + (1,), dtype=gc.dtype)
    for camera, image in views:
        warped = geometry.warp_mpi_to_view(mpi, camera)
        rendered, t, a = compositor.sweep_composite(warped)
        diff = rendered - np.asarray(image, dtype=rendered.dtype)
        # view-space per-plane gradients
        g_color = 2.0 * diff[None] * t
        g_alpha = np.sum(2.0 * diff[None] * (-a * t), axis=-1, keepdims=True)
        both = np.concatenate([g_color, g_alpha], axis=-1)
        back = geometry.inverse_warp_volume(both, camera, mpi)
        gc += back[..., :3]
        ga += back[..., 3:4]
    return MpiGradient(color=gc, alpha=ga)


def finite_diff_gradient(f, mpi, h: float = 1e-4) -> MpiGradient:
    """Central-difference gradient of a scalar function of the MPI planes.

    Test oracle only: O(D*H*W*4) evaluations of ``f``.
    """
    planes = mpi.planes.astype(np.float64)
    from .mpi import Mpi  # local import to avoid cycle at module load

    def eval_at(p):
        return f(Mpi(mpi.reference, mpi.disparities, p))

    grad = np.zeros_like(planes)
    it = np.nditer(planes, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        p = planes.copy()
        p[idx] += h
        fp = eval_at(p)
        p[idx] -= 2 * h
        fm = eval_at(p)
        grad[idx] = (fp - fm) / (2 * h)
    return MpiGradient(color=grad[..., :3], alpha=grad[..., 3:4])
