"""Finite-difference verification suites behind the `gradcheck` command.

Each check compares an analytic gradient path against central finite
differences on a small random instance and reports the worst relative
error. Thresholds match the tolerances the test suite enforces.
"""
from __future__ import annotations

import numpy as np

from . import gradients, scenes
from .geometry import Camera
from .lgd import reference_camera
from .mpi import Mpi
from .network import UpdateNetwork
from .scenes import SceneSpec
from .training import TrainConfig, sample_tuple, unrolled_backprop

REF_TOL = 1e-4
WARPED_TOL = 1e-3
BACKPROP_TOL = 1e-3


def _rand_mpi(rng, reference, num_planes):
    h, w = reference.height, reference.width
    alpha = rng.uniform(0.05, 0.95, (num_planes, h, w, 1))
    color = rng.uniform(0.0, 1.0, (num_planes, h, w, 3)) * alpha
    disparities = np.linspace(0.1, 0.9, num_planes)
    return Mpi(reference, disparities, np.concatenate([color, alpha], axis=-1))


def _lateral_cameras(rng, size=8, focal=20.0, count=2):
    k = np.array([[focal, 0.0, size / 2], [0.0, focal, size / 2], [0.0, 0.0, 1.0]])
    cams = []
    for i in range(count):
        offset = np.zeros(3)
        if i > 0:
            offset[:2] = rng.uniform(-0.05, 0.05, 2)
        cams.append(Camera(k, np.eye(3), -offset, size, size))
    return cams


def check_loss_gradient(seed: int, warped: bool):
    """∇(Σ_k ||O(W_k(M)) − I_k||²) vs central finite differences."""
    rng = np.random.default_rng(seed)
    cams = _lateral_cameras(rng, count=2 if warped else 1)
    reference = cams[0]
    mpi = _rand_mpi(rng, reference, num_planes=4)
    views = [(cam, rng.uniform(0.0, 1.0, (cam.height, cam.width, 3))) for cam in cams]
    analytic = gradients.l2_loss_gradient(mpi, views)

    def loss(m):
        from . import compositor

        total = 0.0
        for cam, img in views:
            total += np.sum((compositor.render(m, cam) - img) ** 2)
        return total

    fd_grad = gradients.finite_diff_gradient(loss, mpi)
    fd = np.concatenate([fd_grad.color, fd_grad.alpha], axis=-1)
    an = np.concatenate([analytic.color, analytic.alpha], axis=-1)
    denom = np.maximum(np.maximum(np.abs(fd), np.abs(an)), 1e-6)
    return float(np.max(np.abs(fd - an) / denom))


def check_unrolled_backprop(seed: int):
    """Trainer weight gradients vs finite differences on the miniature
    config (2 views, 3 planes, 2 iterations, 8x8)."""
    rng = np.random.default_rng(seed)
    spec = SceneSpec(image_size=8, focal=10.0, rig_extent=0.04, num_layers=(2, 3),
                     texture_max_freq=0.08)
    config = TrainConfig(iterations=2, num_planes=3, crop_size=4, near=1.0, far=6.0,
                         extra_channels=2, hidden=6, depth_jitter=0.0)
    scene = scenes.generate_scene(seed, spec)
    scene.cameras = scene.cameras[:2]
    tup = sample_tuple(scene, rng, config)
    net = UpdateNetwork.create(rng, config.iterations,
                               extra_channels=config.extra_channels,
                               hidden=config.hidden)
    _, grads = unrolled_backprop(tup, net, config)

    h = 1e-5
    worst = 0.0
    for n in range(config.iterations):
        for name, (w, b) in net.iterations[n].layers.items():
            flat_idx = rng.integers(0, w.size, size=4)
            for fi in flat_idx:
                idx = np.unravel_index(int(fi), w.shape)
                orig = w[idx]
                w[idx] = orig + h
                lp, _ = unrolled_backprop(tup, net, config)
                w[idx] = orig - h
                lm, _ = unrolled_backprop(tup, net, config)
                w[idx] = orig
                fd = (lp - lm) / (2 * h)
                an = grads[n][name][0][idx]
                worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-6))
            bi = int(rng.integers(0, b.size))
            orig = b[bi]
            b[bi] = orig + h
            lp, _ = unrolled_backprop(tup, net, config)
            b[bi] = orig - h
            lm, _ = unrolled_backprop(tup, net, config)
            b[bi] = orig
            fd = (lp - lm) / (2 * h)
            an = grads[n][name][1][bi]
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-6))
    return worst


def run_all(seed: int, echo=print) -> int:
    """Run every suite; returns the number of failures."""
    checks = [
        ("loss gradient, reference camera", lambda: check_loss_gradient(seed, False),
         REF_TOL),
        ("loss gradient, warped views", lambda: check_loss_gradient(seed, True),
         WARPED_TOL),
        ("unrolled trainer backprop", lambda: check_unrolled_backprop(seed),
         BACKPROP_TOL),
    ]
    failures = 0
    for name, fn, tol in checks:
        err = fn()
        ok = err < tol
        failures += 0 if ok else 1
        echo(f"{'PASS' if ok else 'FAIL'} {name}: rel err {err:.2e} (tol {tol:.0e})")
    return failures
