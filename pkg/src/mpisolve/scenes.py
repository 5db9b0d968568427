"""Seeded synthetic scenes: textured planar rectangles viewed by a small
camera rig, rendered analytically (exact ray/plane intersection and
procedural textures evaluated in closed form, so no resampling error).

The analytic renderer doubles as the independent oracle for the
warp-and-composite render path.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geometry import Camera


@dataclass
class SceneLayer:
    """A textured planar rectangle. The plane is n . X = offset in world
    coordinates (fronto-parallel layers have n = (0, 0, 1), offset = depth);
    the rectangle extent is measured in the plane's local x/y."""

    normal: np.ndarray
    offset: float
    x0: float
    x1: float
    y0: float
    y1: float
    alpha: float
    texture: dict

    def depth_at_axis(self) -> float:
        """Depth where the plane crosses the z axis (for sorting)."""
        nz = self.normal[2]
        return self.offset / nz if nz != 0 else np.inf


@dataclass
class SceneSpec:
    """Generator parameters; a scene is a deterministic function of
    (spec, seed)."""

    image_size: int = 48
    focal: float = 60.0
    near: float = 1.0
    far: float = 6.0
    num_layers: tuple = (2, 6)
    rig_extent: float = 0.08  # meters, input cameras span a square of this half-size
    rig_shape: tuple = (2, 2)
    layer_depths: tuple = ()  # if set, layer depths are drawn from these
    allow_slanted: bool = False
    max_slant: float = 0.15
    semi_transparent_prob: float = 0.4
    texture_max_freq: float = 0.35  # cycles per world unit at depth 1 scale


@dataclass
class SyntheticScene:
    seed: int
    spec: SceneSpec
    layers: list = field(default_factory=list)  # back to front (deepest first)
    cameras: list = field(default_factory=list)  # input rig


def _make_texture(rng: np.random.Generator, spec: SceneSpec, checker_ok=True) -> dict:
    if checker_ok and rng.random() < 0.25:
        return {
            "kind": "checker",
            "size": float(rng.uniform(0.3, 0.9)),
            "c0": rng.uniform(0.1, 0.9, 3).tolist(),
            "c1": rng.uniform(0.1, 0.9, 3).tolist(),
        }
    n_waves = 3
    return {
        "kind": "sinusoid",
        "base": rng.uniform(0.25, 0.75, 3).tolist(),
        "amp": rng.uniform(0.05, 0.25 / n_waves, (n_waves, 3)).tolist(),
        "freq": rng.uniform(0.02, spec.texture_max_freq, (n_waves, 2)).tolist(),
        "phase": rng.uniform(0, 2 * np.pi, (n_waves, 3)).tolist(),
    }


def eval_texture(texture: dict, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Evaluate a procedural texture at world plane coordinates; returns
    (..., 3) in [0, 1]."""
    if texture["kind"] == "checker":
        s = texture["size"]
        parity = (np.floor(x / s) + np.floor(y / s)) % 2
        c0 = np.asarray(texture["c0"])
        c1 = np.asarray(texture["c1"])
        return np.where(parity[..., None] > 0.5, c1, c0)
    if texture["kind"] == "sinusoid":
        out = np.broadcast_to(np.asarray(texture["base"]), x.shape + (3,)).copy()
        for amp, freq, phase in zip(texture["amp"], texture["freq"], texture["phase"]):
            arg = 2 * np.pi * (freq[0] * x + freq[1] * y)
            out = out + np.asarray(amp) * np.sin(arg[..., None] + np.asarray(phase))
        return np.clip(out, 0.0, 1.0)
    raise ValidationError(f"unknown texture kind {texture['kind']!r}")


def make_rig(spec: SceneSpec) -> list:
    """Input cameras on a regular grid facing +z from around the origin."""
    k = np.array([
        [spec.focal, 0.0, spec.image_size / 2.0],
        [0.0, spec.focal, spec.image_size / 2.0],
        [0.0, 0.0, 1.0],
    ])
    rows, cols = spec.rig_shape
    xs = np.linspace(-spec.rig_extent, spec.rig_extent, cols) if cols > 1 else [0.0]
    ys = np.linspace(-spec.rig_extent, spec.rig_extent, rows) if rows > 1 else [0.0]
    cams = []
    for y in ys:
        for x in xs:
            center = np.array([x, y, 0.0])
            cams.append(Camera(k, np.eye(3), -center, spec.image_size, spec.image_size))
    return cams


def generate_scene(seed: int, spec: SceneSpec | None = None) -> SyntheticScene:
    spec = spec or SceneSpec()
    rng = np.random.default_rng(seed)
    n_layers = int(rng.integers(spec.num_layers[0], spec.num_layers[1] + 1))

    # opaque full-extent background at the far end so every ray hits something
    extent_far = 1.2 * spec.far * spec.image_size / (2 * spec.focal) + spec.rig_extent
    layers = [SceneLayer(np.array([0.0, 0.0, 1.0]), spec.far,
                         -extent_far, extent_far, -extent_far, extent_far,
                         1.0, _make_texture(rng, spec))]
    for _ in range(n_layers - 1):
        if spec.layer_depths:
            depth = float(rng.choice(np.asarray(spec.layer_depths)))
        else:
            depth = float(rng.uniform(spec.near * 1.05, spec.far * 0.95))
        normal = np.array([0.0, 0.0, 1.0])
        if spec.allow_slanted and rng.random() < 0.5:
            tilt = rng.uniform(-spec.max_slant, spec.max_slant, 2)
            normal = np.array([tilt[0], tilt[1], 1.0])
            normal /= np.linalg.norm(normal)
        half = depth * spec.image_size / (2 * spec.focal)
        cx, cy = rng.uniform(-0.6 * half, 0.6 * half, 2)
        w, h = rng.uniform(0.35 * half, 1.1 * half, 2)
        alpha = 1.0
        if rng.random() < spec.semi_transparent_prob:
            alpha = float(rng.uniform(0.3, 0.8))
        layers.append(SceneLayer(normal, depth * normal[2], cx - w, cx + w,
                                 cy - h, cy + h, alpha, _make_texture(rng, spec)))
    layers.sort(key=lambda l: -l.depth_at_axis())
    return SyntheticScene(seed=seed, spec=spec, layers=layers, cameras=make_rig(spec))


def render_scene_view(scene: SyntheticScene, camera: Camera) -> np.ndarray:
    """Exact analytic render: intersect each pixel ray with each layer
    plane, evaluate its texture in closed form, over-composite back to
    front. Returns (H, W, 3) float32."""
    h, w = camera.height, camera.width
    xg, yg = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    pix = np.stack([xg, yg, np.ones_like(xg)], axis=-1)
    dirs_cam = pix @ np.linalg.inv(camera.intrinsics).T
    dirs = dirs_cam @ camera.rotation  # R^T applied to each row
    origin = camera.center

    out = np.zeros((h, w, 3), dtype=np.float64)
    for layer in scene.layers:  # back to front
        denom = dirs @ layer.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (layer.offset - origin @ layer.normal) / denom
        hit = np.isfinite(s) & (s > 0)
        point = origin + s[..., None] * dirs
        inside = (hit
                  & (point[..., 0] >= layer.x0) & (point[..., 0] <= layer.x1)
                  & (point[..., 1] >= layer.y0) & (point[..., 1] <= layer.y1))
        color = eval_texture(layer.texture, point[..., 0], point[..., 1])
        a = layer.alpha * inside[..., None]
        out = color * a + (1.0 - a) * out
    return out.astype(np.float32)


def bake_mpi_planes(scene: SyntheticScene, reference: Camera, disparities) -> np.ndarray:
    """Sample the scene's fronto-parallel layers into premultiplied MPI
    planes at the given disparities (layers must sit exactly on plane
    depths; used to build ground-truth-consistent MPIs in tests)."""
    h, w = reference.height, reference.width
    planes = np.zeros((len(disparities), h, w, 4), dtype=np.float32)
    xg, yg = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    pix = np.stack([xg, yg, np.ones_like(xg)], axis=-1)
    dirs = (pix @ np.linalg.inv(reference.intrinsics).T) @ reference.rotation
    origin = reference.center
    depths = [np.inf if disp == 0 else 1.0 / disp for disp in disparities]
    for layer in scene.layers:
        if abs(layer.normal[2] - 1.0) > 1e-12:
            raise ValidationError("only fronto-parallel layers can be baked")
        d_idx = int(np.argmin([abs((0.0 if np.isinf(dd) else dd) - layer.offset)
                               for dd in depths]))
        if not np.isclose(0.0 if np.isinf(depths[d_idx]) else depths[d_idx],
                          layer.offset, rtol=1e-6):
            raise ValidationError(f"layer depth {layer.offset} not on a plane depth")
        s = (layer.offset - origin[2]) / dirs[..., 2]
        point = origin + s[..., None] * dirs
        inside = ((point[..., 0] >= layer.x0) & (point[..., 0] <= layer.x1)
                  & (point[..., 1] >= layer.y0) & (point[..., 1] <= layer.y1))
        color = eval_texture(layer.texture, point[..., 0], point[..., 1])
        a = layer.alpha * inside[..., None]
        prev = planes[d_idx]
        # over within the plane in case two layers share a depth
        planes[d_idx, ..., :3] = (color * a + (1 - a) * prev[..., :3]).astype(np.float32)
        planes[d_idx, ..., 3:] = (a + (1 - a) * prev[..., 3:]).astype(np.float32)
    return planes
