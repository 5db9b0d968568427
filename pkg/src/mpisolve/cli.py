"""Command-line interface.

Exit codes: 0 success, 2 validation error (bad inputs or files), 3
numerical failure. All randomness sits behind --seed flags.
"""
from __future__ import annotations

import json
import os
import shutil
import sys

import click
import numpy as np
from PIL import Image

from . import compositor, io as mpi_io, scenes
from .errors import NumericalError, ValidationError
from .geometry import Camera
from .lgd import SolverConfig, lgd_solve, reference_camera, solve_tiled
from .metrics import psnr, ssim
from .mpi import Mpi
from .network import UpdateNetwork
from .scenes import SceneSpec
from .training import TrainConfig

VIEWS_FORMAT = "mpisolve-views"


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValidationError as e:
        _fail(2, str(e))
    except NumericalError as e:
        _fail(3, str(e))
    except (OSError, json.JSONDecodeError, KeyError) as e:
        _fail(2, str(e))


def load_views(views_dir):
    """Read a views directory: cameras.json plus the PNGs it names.

    Returns a list of (Camera, float image in [0, 1]) pairs.
    """
    path = os.path.join(views_dir, "cameras.json")
    with open(path) as f:
        meta = json.load(f)
    if meta.get("format") != VIEWS_FORMAT:
        raise ValidationError(f"{path}: not a views index")
    views = []
    for name, record in zip(meta["images"], meta["cameras"]):
        img = np.asarray(Image.open(os.path.join(views_dir, name)).convert("RGB"))
        views.append((Camera.from_dict(record), img.astype(np.float32) / 255.0))
    return views


def save_views(views, out_dir, prefix="view"):
    os.makedirs(out_dir, exist_ok=True)
    names, records = [], []
    for i, (cam, img) in enumerate(views):
        name = f"{prefix}_{i:03d}.png"
        q = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
        Image.fromarray(q).save(os.path.join(out_dir, name))
        names.append(name)
        records.append(cam.to_dict())
    with open(os.path.join(out_dir, "cameras.json"), "w") as f:
        json.dump({"format": VIEWS_FORMAT, "images": names, "cameras": records},
                  f, indent=2)


def _save_png(image, path):
    q = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(q).save(path)


def depth_ramp_colors(num_planes: int) -> np.ndarray:
    """False-color ramp over plane index, far (blue) to near (red)."""
    t = np.linspace(0.0, 1.0, num_planes)
    return np.stack([t, 1.0 - np.abs(2 * t - 1.0), 1.0 - t], axis=-1)


def depth_viz_mpi(mpi: Mpi) -> Mpi:
    """Replace plane colors with the false-color ramp, keeping alpha."""
    ramp = depth_ramp_colors(mpi.num_planes)
    planes = mpi.planes.copy()
    alpha = planes[..., 3:4]
    planes[..., :3] = (ramp[:, None, None, :] * alpha).astype(planes.dtype)
    return Mpi(mpi.reference, mpi.disparities, planes)


@click.group()
def main():
    """Multiplane-image reconstruction and rendering."""


@main.command()
@click.option("--views", "views_dir", required=True, type=click.Path(exists=True))
@click.option("--planes", "num_planes", default=8, show_default=True)
@click.option("--near", default=1.0, show_default=True)
@click.option("--far", default=float("inf"), show_default=True)
@click.option("--mode", type=click.Choice(["classic", "learned"]), default="learned",
              show_default=True)
@click.option("--weights", "weights_path", type=click.Path(exists=True))
@click.option("--iterations", default=3, show_default=True)
@click.option("--step-size", default=4.0, show_default=True,
              help="Descent step for classic mode.")
@click.option("--tile-size", default=0, show_default=True,
              help="Solve in tiles of this size (0 = untiled).")
@click.option("--bit-depth", default=8, type=click.Choice(["8", "16"]), show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def solve(views_dir, num_planes, near, far, mode, weights_path, iterations,
          step_size, tile_size, bit_depth, out_dir):
    """Reconstruct an MPI from a directory of posed views."""

    def run():
        views = load_views(views_dir)
        config = SolverConfig(
            iterations=iterations,
            mode="classic_gd" if mode == "classic" else "learned",
            step_size=step_size, num_planes=num_planes, near=near, far=far,
        )
        weights = None
        if config.mode == "learned":
            if weights_path is None:
                raise ValidationError("learned mode requires --weights")
            weights = UpdateNetwork.load(weights_path)
            config.extra_channels = weights.extra_channels
            config.hidden = weights.hidden
        if tile_size > 0:
            mpi, report = solve_tiled(views, config, weights, tile_size)
            click.echo(f"solved {report['num_tiles']} tiles of {tile_size}px")
        else:
            mpi = lgd_solve(views, config, weights)
        mpi_io.save_mpi(mpi, out_dir, bit_depth=int(bit_depth))
        click.echo(f"wrote {mpi.num_planes}-plane MPI to {out_dir}")

    _guard(run)


@main.command()
@click.option("--mpi", "mpi_dir", required=True, type=click.Path(exists=True))
@click.option("--camera", "camera_path", required=True, type=click.Path(exists=True))
@click.option("--depth-viz", is_flag=True, help="False-color planes by depth.")
@click.option("--tile-size", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def render(mpi_dir, camera_path, depth_viz, tile_size, out_path):
    """Render a novel view from a stored MPI."""

    def run():
        mpi = mpi_io.load_mpi(mpi_dir)
        with open(camera_path) as f:
            camera = Camera.from_dict(json.load(f))
        if depth_viz:
            mpi = depth_viz_mpi(mpi)
        if tile_size > 0:
            from .tiling import tiled_render

            image = tiled_render(mpi, camera, tile_size)
        else:
            image = compositor.render(mpi, camera)
        _save_png(image, out_path)
        click.echo(f"wrote {out_path}")

    _guard(run)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--log", "log_path", type=click.Path())
def train(config_path, out_path, log_path):
    """Train update networks from a JSON config."""

    def run():
        from .training import train as run_train

        with open(config_path) as f:
            raw = json.load(f)
        scene_seeds = raw.pop("scene_seeds", list(range(32)))
        spec = SceneSpec(**raw.pop("scene_spec", {}))
        config = TrainConfig(scene_spec=spec, **raw)
        net, log = run_train(config, scene_seeds, log_path=log_path,
                             checkpoint_path=out_path)
        click.echo(f"final loss {log[-1]['loss']:.4f}, weights at {out_path}")

    _guard(run)


@main.command("eval")
@click.option("--mpi", "mpi_dir", required=True, type=click.Path(exists=True))
@click.option("--views", "views_dir", required=True, type=click.Path(exists=True))
@click.option("--report", "report_path", required=True, type=click.Path())
def eval_cmd(mpi_dir, views_dir, report_path):
    """Score MPI renders against ground-truth views (SSIM and PSNR)."""

    def run():
        mpi = mpi_io.load_mpi(mpi_dir)
        views = load_views(views_dir)
        rows = []
        for i, (camera, image) in enumerate(views):
            rendered = compositor.render(mpi, camera)
            rows.append({
                "view": i,
                "ssim": ssim(rendered, image),
                "psnr": psnr(rendered, image),
            })
        report = {
            "views": rows,
            "mean_ssim": float(np.mean([r["ssim"] for r in rows])),
            "mean_psnr": float(np.mean([r["psnr"] for r in rows])),
        }
        with open(report_path, "w") as f:
            json.dump(report, f, indent=2)
        click.echo(f"mean SSIM {report['mean_ssim']:.4f}, "
                   f"mean PSNR {report['mean_psnr']:.2f} dB")

    _guard(run)


@main.command()
@click.option("--seed", default=0, show_default=True)
def gradcheck(seed):
    """Finite-difference checks of every gradient path; nonzero exit on failure."""

    def run():
        from .gradcheck import run_all

        failures = run_all(seed, echo=click.echo)
        if failures:
            raise NumericalError(f"{failures} gradient check(s) failed")
        click.echo("all gradient checks passed")

    _guard(run)


@main.command("make-scene")
@click.option("--seed", default=0, show_default=True)
@click.option("--size", default=48, show_default=True)
@click.option("--held-out", default=1, show_default=True,
              help="Extra target views written to <out>/heldout.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def make_scene(seed, size, held_out, out_dir):
    """Emit a synthetic posed dataset: input rig views plus held-out targets."""

    def run():
        spec = SceneSpec(image_size=size)
        scene = scenes.generate_scene(seed, spec)
        views = [(cam, scenes.render_scene_view(scene, cam)) for cam in scene.cameras]
        save_views(views, out_dir)
        if held_out > 0:
            rng = np.random.default_rng(seed + 1)
            targets = []
            for _ in range(held_out):
                centers = np.stack([c.center for c in scene.cameras])
                w = rng.dirichlet(np.ones(len(scene.cameras)))
                cam = scene.cameras[0]
                center = w @ centers
                from .training import replace_camera_center

                tcam = replace_camera_center(cam, center)
                targets.append((tcam, scenes.render_scene_view(scene, tcam)))
            save_views(targets, os.path.join(out_dir, "heldout"), prefix="target")
        click.echo(f"wrote {len(views)} views to {out_dir}")

    _guard(run)


@main.command("export-viewer")
@click.option("--mpi", "mpi_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def export_viewer(mpi_dir, out_dir):
    """Copy an MPI bundle into a viewer-servable directory (same format)."""

    def run():
        mpi_io.load_mpi(mpi_dir)  # validate before copying
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(mpi_dir, "mpi.json")) as f:
            count = json.load(f)["num_planes"]
        names = ["mpi.json"] + [mpi_io.plane_filename(d) for d in range(count)]
        for name in names:
            shutil.copyfile(os.path.join(mpi_dir, name), os.path.join(out_dir, name))
        click.echo(f"exported bundle to {out_dir}")

    _guard(run)


if __name__ == "__main__":
    main()
