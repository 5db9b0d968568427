import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpisolve import scenes, tiling
from mpisolve.compositor import render
from mpisolve.errors import ValidationError
from mpisolve.lgd import SolverConfig, lgd_solve, reference_camera, solve_tiled
from mpisolve.mpi import Mpi, plane_disparities
from mpisolve.network import UpdateNetwork
from mpisolve.scenes import SceneSpec
from mpisolve.tiling import (EMPTY_RECT, Rect, footprint_for_tile, map_rect,
                             tile_grid, tiled_render)

from conftest import make_camera, random_volume


rects = st.builds(Rect, st.integers(-5, 10), st.integers(-5, 10),
                  st.integers(-5, 10), st.integers(-5, 10))


class TestRect:
    @given(a=rects, b=rects)
    @settings(max_examples=100, deadline=None)
    def test_union_contains_both(self, a, b):
        u = a.union(b)
        assert u.contains(a) and u.contains(b)

    @given(a=rects, b=rects)
    @settings(max_examples=100, deadline=None)
    def test_intersection_contained_in_both(self, a, b):
        i = a.intersect(b)
        assert a.contains(i) and b.contains(i)

    def test_dilate_and_clip(self):
        r = Rect(2, 3, 5, 6).dilate(2)
        assert r == Rect(0, 1, 7, 8)
        assert r.clip(6, 6) == Rect(0, 1, 6, 6)

    def test_area_and_empty(self):
        assert Rect(0, 0, 3, 2).area == 6
        assert Rect(3, 0, 3, 2).empty
        assert EMPTY_RECT.union(Rect(1, 1, 2, 2)) == Rect(1, 1, 2, 2)

    def test_contains_point(self):
        r = Rect(1, 1, 4, 4)
        assert r.contains_point(1, 1) and r.contains_point(3, 3)
        assert not r.contains_point(4, 4)


class TestMapRect:
    def test_translation(self):
        h = np.array([[1.0, 0, 2.5], [0, 1.0, -1.0], [0, 0, 1.0]])
        out = map_rect(h, Rect(0, 0, 4, 4), Rect(0, 0, 100, 100))
        # sample extremes 0..3 map to 2.5..5.5 / -1..2; bilinear support pads
        assert out == Rect(2, -1, 7, 4)

    def test_identity_with_support(self):
        out = map_rect(np.eye(3), Rect(2, 2, 5, 5), Rect(0, 0, 10, 10))
        assert out.contains(Rect(2, 2, 5, 5))

    def test_empty_in_empty_out(self):
        assert map_rect(np.eye(3), EMPTY_RECT, Rect(0, 0, 10, 10)).empty


class TestTileGrid:
    @given(w=st.integers(1, 40), h=st.integers(1, 40), t=st.integers(1, 17))
    @settings(max_examples=60, deadline=None)
    def test_partition(self, w, h, t):
        tiles = tile_grid(w, h, t)
        assert sum(r.area for r in tiles) == w * h
        cover = np.zeros((h, w), dtype=int)
        for r in tiles:
            cover[r.y0:r.y1, r.x0:r.x1] += 1
        assert np.all(cover == 1)

    def test_rejects_bad_tile_size(self):
        with pytest.raises(ValidationError):
            tile_grid(8, 8, 0)


def solver_setup(seed=0, size=16, iterations=2, planes=3, hidden=8):
    spec = SceneSpec(image_size=size, focal=size * 1.25, rig_extent=0.04,
                     num_layers=(2, 3), texture_max_freq=0.1)
    scene = scenes.generate_scene(seed, spec)
    views = [(cam, scenes.render_scene_view(scene, cam)) for cam in scene.cameras]
    config = SolverConfig(iterations=iterations, num_planes=planes, near=1.0,
                          far=6.0, extra_channels=2, hidden=hidden)
    net = UpdateNetwork.create(np.random.default_rng(seed + 100), iterations,
                               extra_channels=2, hidden=hidden)
    return views, config, net


class TestFootprints:
    def test_monotone_growth(self):
        views, config, _ = solver_setup(iterations=3)
        cameras = [v[0] for v in views]
        ref = reference_camera(cameras)
        fp = footprint_for_tile(Rect(4, 4, 8, 8), ref, config.disparities(),
                                cameras, 3)
        fp.check_monotone()
        assert fp.steps[0].mpi_rect.contains(fp.steps[2].mpi_rect)

    def test_rejects_zero_iterations(self):
        views, config, _ = solver_setup()
        cameras = [v[0] for v in views]
        ref = reference_camera(cameras)
        with pytest.raises(ValidationError):
            footprint_for_tile(Rect(0, 0, 4, 4), ref, config.disparities(),
                               cameras, 0)

    def test_soundness_against_dependency_oracle(self):
        """Pixels outside every per-view source rect of a tile's footprint
        must not influence that tile of the solved MPI."""
        rng = np.random.default_rng(7)
        for seed in range(6):
            views, config, net = solver_setup(seed=seed, size=16)
            cameras = [v[0] for v in views]
            ref = reference_camera(cameras)
            tile = Rect(int(rng.integers(0, 9)), int(rng.integers(0, 9)), 0, 0)
            tile = Rect(tile.x0, tile.y0, tile.x0 + 8, tile.y0 + 8)
            fp = footprint_for_tile(tile, ref, config.disparities(), cameras,
                                    config.iterations)
            needed = []
            for k, cam in enumerate(cameras):
                r = EMPTY_RECT
                for step in fp.steps:
                    r = r.union(step.view_rects[k])
                needed.append(r.clip(cam.width, cam.height))
            base = lgd_solve(views, config, net, reference=ref)
            perturbed_views = []
            touched = False
            for k, (cam, img) in enumerate(views):
                img2 = img.copy()
                mask = np.ones(img.shape[:2], dtype=bool)
                r = needed[k]
                mask[r.y0:r.y1, r.x0:r.x1] = False
                if mask.any():
                    img2[mask] = rng.uniform(0, 1, (int(mask.sum()), 3))
                    touched = True
                perturbed_views.append((cam, img2))
            out = lgd_solve(perturbed_views, config, net, reference=ref)
            np.testing.assert_allclose(
                out.planes[:, tile.y0:tile.y1, tile.x0:tile.x1],
                base.planes[:, tile.y0:tile.y1, tile.x0:tile.x1], atol=1e-6)
            assert touched or all(r.area == 16 * 16 for r in needed)


class TestTiledSolve:
    @pytest.mark.parametrize("tile_size", [4, 8, 16])
    def test_matches_untiled(self, tile_size):
        views, config, net = solver_setup(size=16, iterations=3)
        untiled = lgd_solve(views, config, net)
        tiled, report = solve_tiled(views, config, net, tile_size)
        assert np.max(np.abs(tiled.planes - untiled.planes)) < 1e-6
        assert report["num_tiles"] == len(tile_grid(16, 16, tile_size))

    def test_classic_mode_matches_untiled(self):
        views, _, _ = solver_setup(size=12)
        config = SolverConfig(iterations=8, mode="classic_gd", num_planes=3,
                              near=1.0, far=6.0)
        untiled = lgd_solve(views, config, None)
        tiled, _ = solve_tiled(views, config, None, 6)
        assert np.max(np.abs(tiled.planes - untiled.planes)) < 1e-6

    def test_smaller_tiles_use_less_working_memory(self):
        views, config, net = solver_setup(size=16, iterations=2)
        _, small = solve_tiled(views, config, net, 4)
        _, large = solve_tiled(views, config, net, 16)
        assert small["peak_tile_working_bytes"] < large["peak_tile_working_bytes"]


class TestTiledRender:
    def test_matches_full_render(self, rng):
        cam = make_camera(size=12, focal=15.0)
        target = make_camera(size=12, focal=15.0, center=(0.03, -0.02, 0.0))
        mpi = Mpi(cam, plane_disparities(1.0, 6.0, 4),
                  random_volume(rng, 4, 12, 12).astype(np.float32))
        full = render(mpi, target)
        for tile_size in (3, 5, 12):
            np.testing.assert_allclose(tiled_render(mpi, target, tile_size),
                                       full, atol=1e-6)
