"""Footprint computation and tiled execution.

A footprint answers: to produce a given rectangle of the final MPI (or a
crop of a target view) without border effects, which MPI subvolume must
exist at every earlier solver iteration, and which pixels of each input
view feed it? The recursion mirrors the solver: producing state at
iteration n on rect R needs the gradient components on R, which need the
rendered view pixels covering R's warp, which in turn need the previous
iteration's MPI over the inverse warp of those view pixels, and so on.

Rectangles are conservative axis-aligned hulls; mapping a rect through a
homography maps its corner sample points (sound because the warped quad is
convex) and dilates by the bilinear tap support plus the network's
receptive-field radius (zero for the per-pixel nets used here, but kept as
a parameter).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class Rect:
    """Half-open integer pixel rectangle [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self) -> int:
        return max(0, self.x1 - self.x0)

    @property
    def height(self) -> int:
        return max(0, self.y1 - self.y0)

    @property
    def empty(self) -> bool:
        return self.x1 <= self.x0 or self.y1 <= self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    def union(self, other: "Rect") -> "Rect":
        if self.empty:
            return other
        if other.empty:
            return self
        return Rect(min(self.x0, other.x0), min(self.y0, other.y0),
                    max(self.x1, other.x1), max(self.y1, other.y1))

    def intersect(self, other: "Rect") -> "Rect":
        return Rect(max(self.x0, other.x0), max(self.y0, other.y0),
                    min(self.x1, other.x1), min(self.y1, other.y1))

    def dilate(self, r: int) -> "Rect":
        return Rect(self.x0 - r, self.y0 - r, self.x1 + r, self.y1 + r)

    def clip(self, width: int, height: int) -> "Rect":
        return self.intersect(Rect(0, 0, width, height))

    def contains(self, other: "Rect") -> bool:
        return (other.empty or
                (self.x0 <= other.x0 and self.y0 <= other.y0
                 and self.x1 >= other.x1 and self.y1 >= other.y1))

    def contains_point(self, x: int, y: int) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1

    def corner_samples(self) -> np.ndarray:
        """Sample coordinates of the four extreme pixels (N=4, xy)."""
        return np.array([
            [self.x0, self.y0], [self.x1 - 1, self.y0],
            [self.x0, self.y1 - 1], [self.x1 - 1, self.y1 - 1],
        ], dtype=np.float64)

    def as_tuple(self):
        return (self.x0, self.y0, self.width, self.height)


EMPTY_RECT = Rect(0, 0, 0, 0)


def map_rect(h: np.ndarray, rect: Rect, full: Rect, support: int = 1) -> Rect:
    """Bounding rect of ``rect``'s samples mapped through ``h``, dilated by
    the sampler tap support. Falls back to ``full`` if the rect crosses the
    line at infinity (degenerate viewing geometry)."""
    if rect.empty:
        return EMPTY_RECT
    try:
        pts = geometry.apply_homography(h, rect.corner_samples())
    except NumericalError:
        return full
    x0 = int(np.floor(pts[:, 0].min()))
    y0 = int(np.floor(pts[:, 1].min()))
    x1 = int(np.floor(pts[:, 0].max())) + 1 + support
    y1 = int(np.floor(pts[:, 1].max())) + 1 + support
    return Rect(x0 - (support - 1), y0 - (support - 1), x1, y1)


@dataclass
class FootprintStep:
    """Requirements for one solver iteration (index 0 = initialization)."""

    mpi_rect: Rect
    plane_rects: list  # per-plane MPI rects (may be tighter than mpi_rect)
    view_rects: list  # per input view, source/render pixels needed


@dataclass
class TileFootprint:
    """Per-iteration MPI subvolume bounds and per-view source crops needed
    to produce ``target_rect`` of the final MPI."""

    target_rect: Rect
    steps: list = field(default_factory=list)  # index n = iteration n

    def check_monotone(self):
        for earlier, later in zip(self.steps[:-1], self.steps[1:]):
            if not earlier.mpi_rect.contains(later.mpi_rect):
                raise ValidationError("footprints must grow toward earlier iterations")
        return self


class _Homographies:
    """Cached plane homographies (reference <-> each view) for footprints."""

    def __init__(self, reference, disparities, cameras):
        self.fwd = []  # [k][d]: reference -> view k, plane d
        self.inv = []
        for cam in cameras:
            hs = [geometry.homography_from_disparity(reference, cam, disp)
                  for disp in disparities]
            self.fwd.append(hs)
            self.inv.append([np.linalg.inv(h) for h in hs])


def footprint_for_tile(tile_rect: Rect, reference, disparities, cameras,
                       iterations: int, receptive_radius: int = 0) -> TileFootprint:
    """Footprint for producing ``tile_rect`` of the final MPI after
    ``iterations`` solver iterations (iteration 0 is the initialization)."""
    if iterations < 1:
        raise ValidationError("need at least one iteration")
    mpi_full = Rect(0, 0, reference.width, reference.height)
    hs = _Homographies(reference, disparities, cameras)
    pad = 1 + receptive_radius

    n_last = iterations - 1
    mpi_rect = tile_rect.dilate(receptive_radius).intersect(mpi_full)
    steps = [None] * iterations
    steps[n_last] = FootprintStep(
        mpi_rect=mpi_rect,
        plane_rects=[mpi_rect] * len(disparities),
        view_rects=[EMPTY_RECT] * len(cameras),
    )
    for n in range(n_last, 0, -1):
        r = steps[n].mpi_rect
        view_rects = []
        prev_rect = r
        prev_planes = list(steps[n].plane_rects)
        for k, cam in enumerate(cameras):
            img_full = Rect(0, 0, cam.width, cam.height)
            v = EMPTY_RECT
            for d in range(len(disparities)):
                v = v.union(map_rect(hs.fwd[k][d], r, img_full, support=pad))
            v = v.intersect(img_full)
            view_rects.append(v)
            for d in range(len(disparities)):
                back = map_rect(hs.inv[k][d], v, mpi_full, support=pad).intersect(mpi_full)
                prev_planes[d] = prev_planes[d].union(back)
                prev_rect = prev_rect.union(back)
        # rendering inside this step needs the component view rects
        steps[n] = FootprintStep(steps[n].mpi_rect, steps[n].plane_rects, view_rects)
        steps[n - 1] = FootprintStep(prev_rect, prev_planes, [EMPTY_RECT] * len(cameras))

    # initialization: source pixels feeding the plane-sweep volumes
    r0 = steps[0].mpi_rect
    init_views = []
    for k, cam in enumerate(cameras):
        img_full = Rect(0, 0, cam.width, cam.height)
        v = EMPTY_RECT
        for d in range(len(disparities)):
            v = v.union(map_rect(hs.fwd[k][d], r0, img_full, support=pad))
        init_views.append(v.intersect(img_full))
    steps[0] = FootprintStep(r0, steps[0].plane_rects, init_views)

    return TileFootprint(target_rect=tile_rect, steps=steps)


def mpi_rect_for_view_crop(target_camera, crop_rect: Rect, reference, disparities,
                           receptive_radius: int = 0) -> Rect:
    """MPI pixels needed to render ``crop_rect`` of a target view."""
    mpi_full = Rect(0, 0, reference.width, reference.height)
    r = EMPTY_RECT
    for disp in disparities:
        h = geometry.homography_from_disparity(reference, target_camera, disp)
        r = r.union(map_rect(np.linalg.inv(h), crop_rect, mpi_full,
                             support=1 + receptive_radius))
    return r.intersect(mpi_full)


def footprint_for_crop(target_camera, crop_rect: Rect, reference, disparities,
                       cameras, iterations: int, receptive_radius: int = 0) -> TileFootprint:
    """Footprint sufficient to render ``crop_rect`` of ``target_camera``
    from the solved MPI (used for crop-restricted training)."""
    tile = mpi_rect_for_view_crop(target_camera, crop_rect, reference, disparities,
                                  receptive_radius)
    if crop_rect.intersect(Rect(0, 0, target_camera.width, target_camera.height)) != crop_rect:
        raise ValidationError("crop rect must lie within the target image")
    fp = footprint_for_tile(tile, reference, disparities, cameras, iterations,
                            receptive_radius)
    return fp


def tile_grid(width: int, height: int, tile_size: int):
    """Non-overlapping tiles covering a width x height grid."""
    if tile_size < 1:
        raise ValidationError("tile size must be >= 1")
    tiles = []
    for y in range(0, height, tile_size):
        for x in range(0, width, tile_size):
            tiles.append(Rect(x, y, min(x + tile_size, width), min(y + tile_size, height)))
    return tiles


def tiled_solve(views, config, weights, tile_size: int, reference=None):
    """Solve tile by tile; output is identical to the untiled solve up to
    float reassociation. Returns (Mpi, memory_report)."""
    from . import lgd  # deferred: lgd imports this module

    return lgd.solve_tiled(views, config, weights, tile_size, reference=reference)


def tiled_render(mpi, camera, tile_size: int) -> np.ndarray:
    """Render a view in independent tiles (bounded working set)."""
    from . import compositor

    out = np.zeros((camera.height, camera.width, 3), dtype=mpi.planes.dtype)
    full = Rect(0, 0, mpi.plane_width, mpi.plane_height)
    for tile in tile_grid(camera.width, camera.height, tile_size):
        warped = np.empty((mpi.num_planes, tile.height, tile.width, 4),
                          dtype=mpi.planes.dtype)
        for d, disp in enumerate(mpi.disparities):
            h = geometry.homography_from_disparity(mpi.reference, camera, disp)
            src_rect = map_rect(np.linalg.inv(h), tile, full).intersect(full)
            if src_rect.empty:
                warped[d] = 0.0
                continue
            crop = mpi.planes[d, src_rect.y0:src_rect.y1, src_rect.x0:src_rect.x1]
            warped[d] = geometry.warp_region(crop, h, tile.as_tuple(),
                                             src_origin=(src_rect.x0, src_rect.y0))
        out[tile.y0:tile.y1, tile.x0:tile.x1] = compositor.over_composite(warped)
    return out
