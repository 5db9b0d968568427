"""The unrolled solver: plane-sweep initialization, classic gradient
steps in the logit parameter domain, learned per-pixel updates with
cross-view max-pooling, and N-iteration solves.

All execution is region-based: the untiled solve is simply a single
"tile" covering the whole MPI, so tiled and untiled paths share one code
path and agree to float precision.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import compositor, geometry, tiling
from .errors import NumericalError, ValidationError
from .kernels import bilinear_gather
from .mpi import Mpi, MpiState, convert_to_rgba, plane_disparities
from .network import UpdateNetwork
from .tiling import Rect

MODES = ("classic_gd", "learned")


@dataclass
class SolverConfig:
    iterations: int = 3
    mode: str = "learned"
    step_size: float = 4.0  # classic-mode lambda
    num_planes: int = 8
    near: float = 1.0
    far: float = float("inf")
    extra_channels: int = 4
    hidden: int = 32
    # gradient-component ablation pattern: keep/drop the rendered (R),
    # transmittance (T) and accumulated-over (A) channel groups
    components: str = "RTA"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if self.iterations < 1:
            raise ValidationError("need at least one iteration")
        if len(self.components) != 3:
            raise ValidationError("components must be a 3-letter RTA pattern")

    def disparities(self) -> np.ndarray:
        return plane_disparities(self.near, self.far, self.num_planes)


def reference_camera(cameras, width=None, height=None) -> geometry.Camera:
    """Reference view at the centroid of the input camera centers, sharing
    the first camera's orientation and intrinsics."""
    first = cameras[0]
    center = np.mean([c.center for c in cameras], axis=0)
    return geometry.Camera(
        intrinsics=first.intrinsics,
        rotation=first.rotation,
        translation=-first.rotation @ center,
        width=width or first.width,
        height=height or first.height,
    )


class RegionGeometry:
    """Cached per-plane warp coordinates between MPI space and each view.

    Coordinates are always generated in global pixel coordinates so that
    restricting computation to a subrect reproduces the full computation
    bit-for-bit.
    """

    def __init__(self, reference, disparities, cameras):
        self.reference = reference
        self.disparities = np.asarray(disparities, dtype=np.float64)
        self.cameras = list(cameras)
        self.fwd = []  # [k][d] reference -> view homography
        self.inv = []
        for cam in self.cameras:
            hs = [geometry.homography_from_disparity(reference, cam, disp)
                  for disp in self.disparities]
            self.fwd.append(hs)
            self.inv.append([np.linalg.inv(h) for h in hs])

    @property
    def num_planes(self) -> int:
        return len(self.disparities)

    def view_coords(self, k: int, d: int, view_rect: Rect):
        """MPI-space sample coordinates for each pixel of a view rect."""
        return geometry.homography_grid(self.inv[k][d], view_rect.as_tuple())

    def mpi_coords(self, k: int, d: int, mpi_rect: Rect):
        """View-space sample coordinates for each pixel of an MPI rect."""
        return geometry.homography_grid(self.fwd[k][d], mpi_rect.as_tuple())


def psv_region(image, geom: RegionGeometry, k: int, mpi_rect: Rect,
               with_mask: bool = True) -> np.ndarray:
    """Plane-sweep volume of one view over an MPI rect: the image (and a
    validity-mask channel) inverse-warped onto every plane."""
    image = np.asarray(image)
    if with_mask:
        image = np.concatenate(
            [image, np.ones(image.shape[:2] + (1,), dtype=image.dtype)], axis=-1)
    out = np.empty((geom.num_planes, mpi_rect.height, mpi_rect.width, image.shape[-1]),
                   dtype=image.dtype)
    for d in range(geom.num_planes):
        xs, ys = geom.mpi_coords(k, d, mpi_rect)
        out[d] = bilinear_gather(image, xs, ys)
    return out


def _render_view_region(rgba, rgba_rect: Rect, geom: RegionGeometry, k: int,
                        view_rect: Rect):
    """Warp the (cropped) MPI into a view rect and sweep-composite.

    Returns (warped, rendered, T, A), all over ``view_rect``.
    """
    warped = np.empty((geom.num_planes, view_rect.height, view_rect.width, 4),
                      dtype=rgba.dtype)
    for d in range(geom.num_planes):
        xs, ys = geom.view_coords(k, d, view_rect)
        warped[d] = bilinear_gather(rgba[d], xs - rgba_rect.x0, ys - rgba_rect.y0)
    rendered, t, a = compositor.sweep_composite(warped)
    return warped, rendered, t, a


def components_region(rgba, rgba_rect: Rect, geom: RegionGeometry, k: int,
                      image, mpi_rect: Rect, view_rect: Rect) -> np.ndarray:
    """Gradient components (with validity-mask channel) for one view over an
    MPI rect, rendering only ``view_rect`` of the view."""
    _, rendered, t, a = _render_view_region(rgba, rgba_rect, geom, k, view_rect)
    image = np.asarray(image, dtype=rendered.dtype)
    rendered_b = np.broadcast_to(rendered, (geom.num_planes,) + rendered.shape)
    view_stack = np.concatenate([rendered_b, a, t], axis=-1)  # (D, h, w, 7)
    ones = np.ones(image.shape[:2] + (1,), dtype=image.dtype)

    out = np.empty((geom.num_planes, mpi_rect.height, mpi_rect.width, 11),
                   dtype=rendered.dtype)
    for d in range(geom.num_planes):
        xs, ys = geom.mpi_coords(k, d, mpi_rect)
        out[d, ..., 0:3] = bilinear_gather(image, xs, ys)
        back = bilinear_gather(np.ascontiguousarray(view_stack[d]),
                               xs - view_rect.x0, ys - view_rect.y0)
        out[d, ..., 3:6] = back[..., 0:3]
        out[d, ..., 6:9] = back[..., 3:6]
        out[d, ..., 9:10] = back[..., 6:7]
        out[d, ..., 10:11] = bilinear_gather(ones, xs, ys)
    return out


def component_mask(pattern: str) -> np.ndarray:
    """Channel mask over the 11 component channels for an RTA ablation
    pattern; the input-image PSV and validity mask always pass."""
    mask = np.ones(11)
    if pattern[0] == "-":
        mask[3:6] = 0.0  # rendered PSV
    if pattern[1] == "-":
        mask[9:10] = 0.0  # net transmittance
    if pattern[2] == "-":
        mask[6:9] = 0.0  # accumulated over
    return mask


def _crop(arr, from_rect: Rect, to_rect: Rect):
    if from_rect == to_rect:
        return arr
    return arr[:, to_rect.y0 - from_rect.y0: to_rect.y1 - from_rect.y0,
               to_rect.x0 - from_rect.x0: to_rect.x1 - from_rect.x0]


def classic_gd_step(raw: np.ndarray, grad, step_size: float) -> np.ndarray:
    """One fixed-step descent update of the raw (logit-domain) parameters,
    chaining the premultiplied-parameter gradient through the sigmoid
    reparameterization."""
    from scipy.special import expit

    gc = np.asarray(grad.color)
    ga = np.asarray(grad.alpha)
    if not (np.all(np.isfinite(gc)) and np.all(np.isfinite(ga))):
        raise NumericalError("non-finite gradient in classic step")
    s = expit(raw[..., :3])
    a = expit(raw[..., 3:4])
    g_rgb = gc * s * (1.0 - s) * a
    g_a = ga * a * (1.0 - a) + np.sum(gc * s, axis=-1, keepdims=True) * a * (1.0 - a)
    out = raw.copy()
    out[..., :3] -= step_size * g_rgb
    out[..., 3:4] -= step_size * g_a
    return out


def init_from_psv(views, config: SolverConfig, net: UpdateNetwork,
                  reference=None) -> MpiState:
    """Initialization step: encode each view's plane-sweep volume, max-pool
    across views, decode to the raw state channels."""
    if len(views) == 0:
        raise ValidationError("need at least one view")
    cameras = [v[0] for v in views]
    if reference is None:
        reference = reference_camera(cameras)
    geom = RegionGeometry(reference, config.disparities(), cameras)
    rect = Rect(0, 0, reference.width, reference.height)
    inputs = [psv_region(img, geom, k, rect) for k, (_, img) in enumerate(views)]
    raw = np.asarray(net.apply(0, inputs))
    return MpiState(reference, geom.disparities, raw)


def update_step(state: MpiState, components, net: UpdateNetwork,
                iteration: int) -> MpiState:
    """One learned update: per view, concatenate the current state with the
    view's gradient components, encode, max-pool across views, decode, and
    add the result to the raw state."""
    if len(components) == 0:
        raise ValidationError("need at least one view's components")
    rgba = state.rgba()
    extras = state.raw[..., 4:]
    for c in components:
        if np.asarray(c).shape[:3] != state.raw.shape[:3]:
            raise ValidationError("component dims do not match state dims")
    inputs = [np.concatenate([rgba, extras, np.asarray(c)], axis=-1)
              for c in components]
    delta = np.asarray(net.apply(iteration, inputs))
    if delta.shape != state.raw.shape:
        raise ValidationError("update shape does not match state shape")
    return MpiState(state.reference, state.disparities, state.raw + delta)


def solve_region(views, config: SolverConfig, weights, footprint,
                 reference=None, collect_stats: bool = False):
    """Run the solver restricted to a footprint's per-iteration rects.

    ``weights`` is an UpdateNetwork in learned mode and ignored in classic
    mode. Returns (MpiState on the final rect, stats dict).
    """
    cameras = [v[0] for v in views]
    images = [np.asarray(v[1]) for v in views]
    if reference is None:
        reference = reference_camera(cameras)
    geom = RegionGeometry(reference, config.disparities(), cameras)
    stats = {"peak_state_bytes": 0, "peak_working_bytes": 0}

    def note(*arrays):
        b = sum(a.nbytes for a in arrays)
        stats["peak_working_bytes"] = max(stats["peak_working_bytes"], b)

    steps = footprint.steps
    rect = steps[0].mpi_rect
    if config.mode == "learned":
        if weights is None or weights.num_iterations < config.iterations:
            raise ValidationError("weight sets do not cover the requested iterations")
        inputs = [psv_region(img, geom, k, rect) for k, img in enumerate(images)]
        raw = np.asarray(weights.apply(0, inputs))
        note(raw, *inputs)
        mask = component_mask(config.components)
        for n in range(1, config.iterations):
            rgba = convert_to_rgba(raw[..., :4])
            next_rect = steps[n].mpi_rect
            comps = [
                components_region(rgba, rect, geom, k, images[k], next_rect,
                                  steps[n].view_rects[k]) * mask
                for k in range(len(views))
            ]
            note(raw, rgba, *comps)
            state = MpiState(reference, geom.disparities, _crop(raw, rect, next_rect))
            state = update_step(state, comps, weights, n)
            raw = state.raw
            rect = next_rect
    else:
        # Classic mode runs full-frame (the per-iteration dependency set
        # reaches the whole MPI within a few of its many iterations anyway)
        # and crops to the footprint's target at the end.
        from .gradients import MpiGradient, l2_loss_gradient

        rect = Rect(0, 0, reference.width, reference.height)
        raw = np.zeros((geom.num_planes, rect.height, rect.width, 4), dtype=np.float32)
        for _ in range(config.iterations):
            mpi = Mpi(reference, geom.disparities, convert_to_rgba(raw))
            grad = l2_loss_gradient(mpi, views)
            raw = classic_gd_step(raw, grad, config.step_size)
            note(raw, grad.color, grad.alpha)
        rect = footprint.target_rect
        raw = _crop(raw, Rect(0, 0, reference.width, reference.height), rect)
        raw = np.concatenate(
            [raw, np.zeros(raw.shape[:-1] + (config.extra_channels,), raw.dtype)],
            axis=-1)

    stats["peak_state_bytes"] = raw.nbytes
    state = MpiState(reference, geom.disparities, raw)
    return (state, rect, stats)


def _full_footprint(config: SolverConfig, reference, cameras) -> tiling.TileFootprint:
    full = Rect(0, 0, reference.width, reference.height)
    fp = tiling.footprint_for_tile(full, reference, config.disparities(), cameras,
                                   max(config.iterations, 1) if config.mode == "learned" else 1)
    # full-frame execution: every step covers the whole MPI and views
    for step in fp.steps:
        step.mpi_rect = full
        step.plane_rects = [full] * config.num_planes
        step.view_rects = [Rect(0, 0, c.width, c.height) for c in cameras]
    return fp


def lgd_solve(views, config: SolverConfig, weights=None, reference=None) -> Mpi:
    """Full N-iteration solve: plane-sweep initialization followed by
    learned updates (learned mode), or fixed-step descent from a zero
    raw state (classic mode). Returns the final RGBA MPI."""
    cameras = [v[0] for v in views]
    if reference is None:
        reference = reference_camera(cameras)
    fp = _full_footprint(config, reference, cameras)
    state, _, _ = solve_region(views, config, weights, fp, reference=reference)
    mpi = state.to_mpi()
    mpi.planes = mpi.planes.astype(np.float32)
    return mpi


def solve_tiled(views, config: SolverConfig, weights, tile_size: int,
                reference=None):
    """Tile-by-tile solve; identical to :func:`lgd_solve` up to float
    reassociation. Returns (Mpi, report) where the report compares peak
    per-tile working-set bytes against the untiled equivalent."""
    cameras = [v[0] for v in views]
    if reference is None:
        reference = reference_camera(cameras)
    disparities = plane_disparities(config.near, config.far, config.num_planes)
    planes = np.zeros((config.num_planes, reference.height, reference.width, 4),
                      dtype=np.float32)
    n_steps = config.iterations if config.mode == "learned" else 1
    peak = 0
    tiles = tiling.tile_grid(reference.width, reference.height, tile_size)
    for tile in tiles:
        fp = tiling.footprint_for_tile(tile, reference, disparities, cameras, n_steps)
        if config.mode == "classic_gd":
            for step in fp.steps:
                step.view_rects = [Rect(0, 0, c.width, c.height) for c in cameras]
        fp.target_rect = tile
        state, rect, stats = solve_region(views, config, weights, fp,
                                          reference=reference)
        rgba = state.rgba()
        planes[:, tile.y0:tile.y1, tile.x0:tile.x1] = _crop(rgba, rect, tile)
        peak = max(peak, stats["peak_working_bytes"])
    report = {
        "tile_size": tile_size,
        "num_tiles": len(tiles),
        "peak_tile_working_bytes": peak,
    }
    return Mpi(reference, disparities, planes), report
