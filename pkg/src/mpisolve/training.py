"""Training of the unrolled solver: tuple sampling from synthetic scenes,
reverse-mode differentiation through the full N-iteration solve (exact
bilinear scatter adjoints for all warps), and ADAM with global-norm
gradient clipping.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import scenes, tiling
from .errors import NumericalError, ValidationError
from .geometry import Camera
from .lgd import (RegionGeometry, SolverConfig, component_mask, psv_region,
                  reference_camera)
from .mpi import jitter_depths, plane_disparities
from .network import UpdateNetwork
from .scenes import SceneSpec, SyntheticScene
from .tiling import Rect


@dataclass
class TrainingTuple:
    views: list  # K (Camera, image) pairs
    target_camera: object
    crop_rect: Rect
    gt_crop: np.ndarray  # (crop, crop, 3)


@dataclass
class TrainConfig:
    steps: int = 200
    batch_size: int = 2
    learning_rate: float = 0.00015
    clip_threshold: float = 8.0
    iterations: int = 3
    loss: str = "l1"
    crop_size: int = 32
    depth_jitter: float = 0.25
    num_planes: int = 8
    near: float = 1.0
    far: float = float("inf")
    extra_channels: int = 4
    hidden: int = 32
    # lateral / depth slack around the input rig when sampling target views
    target_lateral_slack: float = 0.06
    target_depth_slack: float = 0.07
    # gradient-component ablation: zero out rendered / transmittance /
    # accumulated-over groups ("RTA" keeps all, "---" drops all)
    components: str = "RTA"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0
    scene_spec: SceneSpec = field(default_factory=SceneSpec)

    def __post_init__(self):
        if self.loss not in ("l1", "l2"):
            raise ValidationError("loss must be 'l1' or 'l2'")
        if len(self.components) != 3:
            raise ValidationError("components must be a 3-letter RTA pattern")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            iterations=self.iterations, mode="learned", num_planes=self.num_planes,
            near=self.near, far=self.far, extra_channels=self.extra_channels,
            hidden=self.hidden, components=self.components,
        )


def sample_tuple(scene: SyntheticScene, rng: np.random.Generator,
                 config: TrainConfig) -> TrainingTuple:
    """Input views from the scene's rig; target pose sampled inside the
    rig's convex hull inflated by the configured lateral/depth slack; a
    random crop of the rendered target is the ground truth."""
    views = [(cam, scenes.render_scene_view(scene, cam)) for cam in scene.cameras]
    centers = np.stack([cam.center for cam in scene.cameras])
    w = rng.dirichlet(np.ones(len(scene.cameras)))
    center = w @ centers
    center[:2] += rng.uniform(-config.target_lateral_slack,
                              config.target_lateral_slack, 2)
    center[2] += rng.uniform(-config.target_depth_slack, config.target_depth_slack)
    base = scene.cameras[0]
    target = replace_camera_center(base, center)
    crop = config.crop_size
    if crop > base.width or crop > base.height:
        raise ValidationError("crop size exceeds the target image")
    x0 = int(rng.integers(0, base.width - crop + 1))
    y0 = int(rng.integers(0, base.height - crop + 1))
    rect = Rect(x0, y0, x0 + crop, y0 + crop)
    gt = scenes.render_scene_view(scene, target)[y0:y0 + crop, x0:x0 + crop]
    return TrainingTuple(views=views, target_camera=target, crop_rect=rect, gt_crop=gt)


def replace_camera_center(camera, center):
    return Camera(camera.intrinsics, camera.rotation,
                  -camera.rotation @ np.asarray(center), camera.width, camera.height)


def _weights_as_tensors(net: UpdateNetwork, iterations: int):
    tensors = []
    for n in range(iterations):
        layers = {}
        for name, (w, b) in net.iterations[n].layers.items():
            layers[name] = (ad.parameter(w), ad.parameter(b))
        tensors.append(layers)
    return tensors


def _composite_ops(planes):
    """(composite, per-plane T, per-plane A) of a list of warped RGBA
    tensors, via the back-to-front recurrences."""
    d = len(planes)
    first = planes[0].data if isinstance(planes[0], ad.Tensor) else planes[0]
    colors = [p[..., :3] for p in planes]
    qs = [1.0 - p[..., 3:4] for p in planes]
    ts = [None] * d
    ts[d - 1] = np.ones(first.shape[:2] + (1,))
    for i in range(d - 2, -1, -1):
        ts[i] = ts[i + 1] * qs[i + 1]
    a_list = [None] * d
    a_list[0] = np.zeros(first.shape[:2] + (3,))
    for i in range(1, d):
        a_list[i] = colors[i - 1] + qs[i - 1] * a_list[i - 1]
    out = colors[0] * ts[0]
    for i in range(1, d):
        out = out + colors[i] * ts[i]
    return out, ts, a_list


def _rgba_ops(raw):
    alpha = ad.sigmoid(raw[..., 3:4])
    rgb = ad.sigmoid(raw[..., :3]) * alpha
    return ad.concat([rgb, alpha])


def unrolled_backprop(tup: TrainingTuple, net: UpdateNetwork, config: TrainConfig,
                      disparities=None):
    """Loss of the tuple's target crop and its gradient w.r.t. every
    network weight, differentiating through the full unrolled solve
    (components, compositing and warps included; warp backward uses the
    exact bilinear scatter adjoint).

    Returns (loss, grads) with grads[n][layer] = (dW, db).
    """
    cameras = [v[0] for v in tup.views]
    images = [np.asarray(v[1], dtype=np.float64) for v in tup.views]
    reference = reference_camera(cameras)
    if disparities is None:
        disparities = plane_disparities(config.near, config.far, config.num_planes)
    n_iter = config.iterations
    fp = tiling.footprint_for_crop(tup.target_camera, tup.crop_rect, reference,
                                   disparities, cameras, n_iter)
    geom = RegionGeometry(reference, disparities, cameras + [tup.target_camera])
    k_target = len(cameras)
    mask = component_mask(config.components)

    weights = _weights_as_tensors(net, n_iter)

    rect = fp.steps[0].mpi_rect
    inputs = [psv_region(img, geom, k, rect) for k, img in enumerate(images)]
    raw = net.apply(0, inputs, weights=weights[0])

    for n in range(1, n_iter):
        next_rect = fp.steps[n].mpi_rect
        rgba = _rgba_ops(raw)
        comps = []
        for k in range(len(cameras)):
            vr = fp.steps[n].view_rects[k]
            warped = []
            for d in range(geom.num_planes):
                xs, ys = geom.view_coords(k, d, vr)
                warped.append(ad.warp(rgba[d], xs - rect.x0, ys - rect.y0))
            rendered, ts, a_list = _composite_ops(warped)
            plane_comps = []
            for d in range(geom.num_planes):
                xs, ys = geom.mpi_coords(k, d, next_rect)
                psv = ad.warp(images[k], xs, ys)
                view_stack = ad.concat([rendered, a_list[d], ts[d]])
                back = ad.warp(view_stack, xs - vr.x0, ys - vr.y0)
                valid = ad.warp(np.ones(images[k].shape[:2] + (1,)), xs, ys)
                plane_comps.append(ad.concat([psv, back[..., 0:3], back[..., 3:6],
                                              back[..., 6:7], valid]))
            comp = ad.stack(plane_comps, axis=0)
            comps.append(comp * mask)
        crop_slice = (slice(None),
                      slice(next_rect.y0 - rect.y0, next_rect.y1 - rect.y0),
                      slice(next_rect.x0 - rect.x0, next_rect.x1 - rect.x0))
        rgba_c = rgba[crop_slice]
        extras_c = raw[crop_slice + (slice(4, None),)] if net.extra_channels else None
        net_inputs = []
        for comp in comps:
            parts = [rgba_c]
            if extras_c is not None:
                parts.append(extras_c)
            parts.append(comp)
            net_inputs.append(ad.concat(parts))
        delta = net.apply(n, net_inputs, weights=weights[n])
        raw = raw[crop_slice + (slice(None),)] + delta
        rect = next_rect

    # render the target crop from the final state
    rgba = _rgba_ops(raw)
    warped = []
    for d in range(geom.num_planes):
        xs, ys = geom.view_coords(k_target, d, tup.crop_rect)
        warped.append(ad.warp(rgba[d], xs - rect.x0, ys - rect.y0))
    rendered, _, _ = _composite_ops(warped)
    diff = rendered - tup.gt_crop.astype(np.float64)
    area = tup.crop_rect.area
    if config.loss == "l1":
        loss = diff.abs().sum() / area
    else:
        loss = diff.square().sum() / area
    if not np.isfinite(loss.data):
        raise NumericalError("non-finite training loss")
    loss.backward()

    grads = []
    for layer_tensors in weights:
        g = {}
        for name, (w, b) in layer_tensors.items():
            g[name] = (
                w.grad if w.grad is not None else np.zeros_like(w.data),
                b.grad if b.grad is not None else np.zeros_like(b.data),
            )
        grads.append(g)
    return float(loss.data), grads


def global_norm(grads) -> float:
    total = 0.0
    for layers in grads:
        for w_g, b_g in layers.values():
            total += float(np.sum(w_g ** 2)) + float(np.sum(b_g ** 2))
    return np.sqrt(total)


def clip_global_norm(grads, threshold: float):
    """Scale all gradients so the global norm is at most ``threshold``
    (direction preserved exactly). Returns (grads, norm, clipped)."""
    norm = global_norm(grads)
    if norm <= threshold or norm == 0.0:
        return grads, norm, False
    scale = threshold / norm
    out = [{name: (w * scale, b * scale) for name, (w, b) in layers.items()}
           for layers in grads]
    return out, norm, True


class Adam:
    def __init__(self, config: TrainConfig):
        self.lr = config.learning_rate
        self.b1 = config.adam_beta1
        self.b2 = config.adam_beta2
        self.eps = config.adam_eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, net: UpdateNetwork, grads):
        if self.m is None:
            self.m = [{k: (np.zeros_like(w), np.zeros_like(b))
                       for k, (w, b) in layers.items()} for layers in grads]
            self.v = [{k: (np.zeros_like(w), np.zeros_like(b))
                       for k, (w, b) in layers.items()} for layers in grads]
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for n, layers in enumerate(grads):
            for name, (gw, gb) in layers.items():
                w, b = net.iterations[n].layers[name]
                for param, g, slot in ((w, gw, 0), (b, gb, 1)):
                    m = self.m[n][name][slot]
                    v = self.v[n][name][slot]
                    m *= self.b1
                    m += (1 - self.b1) * g
                    v *= self.b2
                    v += (1 - self.b2) * g * g
                    param -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self):
        def pack(slots):
            return [{k: [s[0].tolist(), s[1].tolist()] for k, s in layers.items()}
                    for layers in slots]

        return {"t": self.t,
                "m": None if self.m is None else pack(self.m),
                "v": None if self.v is None else pack(self.v)}


def train(config: TrainConfig, scene_seeds, log_path=None, checkpoint_path=None,
          net: UpdateNetwork | None = None):
    """Train per-iteration update networks on the synthetic scene family.

    Deterministic for a fixed config and seed list (sequential tuple
    accumulation). Returns (net, log) where log is a list of per-step
    dicts {step, loss, grad_norm, clipped}.
    """
    rng = np.random.default_rng(config.seed)
    if net is None:
        net = UpdateNetwork.create(rng, config.iterations,
                                   extra_channels=config.extra_channels,
                                   hidden=config.hidden)
    adam = Adam(config)
    log = []
    log_file = open(log_path, "w") if log_path else None
    try:
        for step in range(config.steps):
            acc = None
            loss_sum = 0.0
            for _ in range(config.batch_size):
                seed = int(rng.choice(np.asarray(scene_seeds)))
                scene = scenes.generate_scene(seed, config.scene_spec)
                tup = sample_tuple(scene, rng, config)
                disparities = plane_disparities(config.near, config.far,
                                                config.num_planes)
                if config.depth_jitter > 0:
                    with np.errstate(divide="ignore"):
                        depths = 1.0 / disparities
                    depths = jitter_depths(depths, rng, config.depth_jitter)
                    with np.errstate(divide="ignore"):
                        disparities = 1.0 / depths
                loss, grads = unrolled_backprop(tup, net, config, disparities)
                loss_sum += loss
                if acc is None:
                    acc = grads
                else:
                    acc = [
                        {k: (aw + gw, abias + gb)
                         for (k, (aw, abias)), (gw, gb) in
                         zip(layers_a.items(), (layers_g[k] for k in layers_a))}
                        for layers_a, layers_g in zip(acc, grads)
                    ]
            acc = [{k: (w / config.batch_size, b / config.batch_size)
                    for k, (w, b) in layers.items()} for layers in acc]
            acc, norm, clipped = clip_global_norm(acc, config.clip_threshold)
            adam.step(net, acc)
            entry = {"step": step, "loss": loss_sum / config.batch_size,
                     "grad_norm": norm, "clipped": clipped}
            log.append(entry)
            if log_file:
                log_file.write(json.dumps(entry) + "\n")
            if (config.checkpoint_every and checkpoint_path
                    and (step + 1) % config.checkpoint_every == 0):
                net.save(checkpoint_path)
    finally:
        if log_file:
            log_file.close()
    if checkpoint_path:
        net.save(checkpoint_path)
    return net, log
