import numpy as np
import pytest

from mpisolve import compositor, lgd, scenes
from mpisolve.errors import NumericalError, ValidationError
from mpisolve.gradients import MpiGradient
from mpisolve.lgd import (SolverConfig, classic_gd_step, component_mask,
                          init_from_psv, lgd_solve, psv_region,
                          reference_camera, update_step, RegionGeometry)
from mpisolve.mpi import MpiState
from mpisolve.network import UpdateNetwork
from mpisolve.scenes import SceneSpec
from mpisolve.tiling import Rect

from conftest import make_camera


def scene_views(seed=0, size=16, layer_depths=(1.5, 3.0)):
    spec = SceneSpec(image_size=size, focal=size * 1.25, rig_extent=0.04,
                     num_layers=(2, 3), layer_depths=layer_depths,
                     texture_max_freq=0.1)
    scene = scenes.generate_scene(seed, spec)
    return [(cam, scenes.render_scene_view(scene, cam)) for cam in scene.cameras]


class TestConfig:
    def test_rejects_bad_mode(self):
        with pytest.raises(ValidationError):
            SolverConfig(mode="newton")

    def test_rejects_zero_iterations(self):
        with pytest.raises(ValidationError):
            SolverConfig(iterations=0)

    def test_rejects_bad_components(self):
        with pytest.raises(ValidationError):
            SolverConfig(components="RT")

    def test_disparities(self):
        config = SolverConfig(num_planes=3, near=1.0, far=np.inf)
        np.testing.assert_allclose(config.disparities(), [0.0, 0.5, 1.0])


class TestReferenceCamera:
    def test_centroid(self):
        cams = [make_camera(center=(0.0, 0.0, 0.0)),
                make_camera(center=(0.2, 0.1, 0.0))]
        ref = reference_camera(cams)
        np.testing.assert_allclose(ref.center, [0.1, 0.05, 0.0], atol=1e-12)
        np.testing.assert_array_equal(ref.intrinsics, cams[0].intrinsics)


class TestPsvRegion:
    def test_reference_view_psv_is_the_image(self, rng):
        cam = make_camera(size=8)
        geom = RegionGeometry(cam, [0.1, 0.5], [cam])
        image = rng.uniform(0, 1, (8, 8, 3))
        psv = psv_region(image, geom, 0, Rect(0, 0, 8, 8))
        for d in range(2):
            np.testing.assert_allclose(psv[d, ..., :3], image, atol=1e-9)
            np.testing.assert_allclose(psv[d, ..., 3], 1.0, atol=1e-9)

    def test_mask_zero_outside_frustum(self, rng):
        ref = make_camera(size=8, focal=10.0)
        offset = make_camera(size=8, focal=10.0, center=(0.5, 0.0, 0.0))
        geom = RegionGeometry(ref, [0.9], [offset])
        psv = psv_region(rng.uniform(0, 1, (8, 8, 3)), geom, 0, Rect(0, 0, 8, 8))
        mask = psv[0, ..., 3]
        assert mask.min() == 0.0 and mask.max() == 1.0


class TestClassicStep:
    def test_zero_gradient_is_identity(self, rng):
        raw = rng.normal(size=(2, 3, 3, 4))
        grad = MpiGradient(np.zeros((2, 3, 3, 3)), np.zeros((2, 3, 3, 1)))
        np.testing.assert_array_equal(classic_gd_step(raw, grad, 4.0), raw)

    def test_rejects_non_finite_gradient(self, rng):
        raw = rng.normal(size=(1, 2, 2, 4))
        grad = MpiGradient(np.full((1, 2, 2, 3), np.nan), np.zeros((1, 2, 2, 1)))
        with pytest.raises(NumericalError):
            classic_gd_step(raw, grad, 4.0)

    def test_chain_rule_matches_fd(self, rng):
        """The logit-domain step must equal the gradient of the loss as a
        function of the raw parameters."""
        from mpisolve.mpi import convert_to_rgba

        raw = rng.normal(size=(1, 1, 1, 4))
        target = rng.uniform(0, 1, 3)

        def loss(r):
            rgba = convert_to_rgba(r)
            return np.sum((rgba[0, 0, 0, :3] - target) ** 2)

        rgba = convert_to_rgba(raw)
        diff = rgba[..., :3] - target
        grad = MpiGradient(2.0 * diff, np.zeros((1, 1, 1, 1)))
        stepped = classic_gd_step(raw, grad, 1.0)
        analytic = raw - stepped  # lambda = 1 -> this is the raw-space gradient
        h = 1e-6
        for c in range(4):
            p = raw.copy()
            p[0, 0, 0, c] += h
            m = raw.copy()
            m[0, 0, 0, c] -= h
            fd = (loss(p) - loss(m)) / (2 * h)
            assert abs(fd - analytic[0, 0, 0, c]) < 1e-6


class TestLearnedSolve:
    def test_produces_valid_mpi(self, rng):
        views = scene_views()
        config = SolverConfig(iterations=2, num_planes=3, near=1.0, far=6.0,
                              extra_channels=2, hidden=8)
        net = UpdateNetwork.create(rng, 2, extra_channels=2, hidden=8)
        mpi = lgd_solve(views, config, net)
        mpi.validate()
        assert mpi.planes.dtype == np.float32
        assert mpi.num_planes == 3

    def test_rejects_missing_weights(self):
        views = scene_views()
        config = SolverConfig(iterations=2, num_planes=3, near=1.0, far=6.0)
        with pytest.raises(ValidationError):
            lgd_solve(views, config, None)

    def test_init_from_psv_matches_full_solve_first_step(self, rng):
        views = scene_views()
        config = SolverConfig(iterations=1, num_planes=3, near=1.0, far=6.0,
                              extra_channels=2, hidden=8)
        net = UpdateNetwork.create(rng, 1, extra_channels=2, hidden=8)
        state = init_from_psv(views, config, net)
        mpi = lgd_solve(views, config, net)
        np.testing.assert_allclose(mpi.planes, state.rgba().astype(np.float32),
                                   atol=1e-7)

    def test_update_step_shape_mismatch(self, rng):
        cam = make_camera(size=4)
        net = UpdateNetwork.create(rng, 2, extra_channels=2, hidden=8)
        state = MpiState(cam, np.array([0.5]), rng.normal(size=(1, 4, 4, 6)))
        bad = [rng.normal(size=(2, 4, 4, 11))]  # wrong plane count
        with pytest.raises(ValidationError):
            update_step(state, bad, net, 1)

    def test_masked_component_channels_are_inert(self, rng):
        """With the '---' ablation, weights feeding the masked channels
        cannot influence the result."""
        views = scene_views()
        net_a = UpdateNetwork.create(rng, 2, extra_channels=2, hidden=8)
        net_b = UpdateNetwork.from_dict(net_a.to_dict())
        # component channels sit after state channels in the iteration-1 input
        state_ch = net_a.state_channels
        rows = [state_ch + i for i in (3, 4, 5, 6, 7, 8, 9)]  # rendered, A, T
        net_b.iterations[1].layers["enc1"][0][rows, :] += rng.normal(
            size=(len(rows), 8)) * 10.0
        config = SolverConfig(iterations=2, num_planes=3, near=1.0, far=6.0,
                              extra_channels=2, hidden=8, components="---")
        np.testing.assert_array_equal(lgd_solve(views, config, net_a).planes,
                                      lgd_solve(views, config, net_b).planes)

    def test_component_mask_patterns(self):
        np.testing.assert_array_equal(component_mask("RTA"), np.ones(11))
        m = component_mask("---")
        np.testing.assert_array_equal(m[3:10], 0.0)
        np.testing.assert_array_equal(m[[0, 1, 2, 10]], 1.0)
        assert component_mask("R--")[3:6].sum() == 3.0


class TestClassicSolve:
    def test_loss_decreases_monotonically(self):
        views = scene_views(size=16)
        losses = []
        for iters in (5, 15, 30):
            config = SolverConfig(iterations=iters, mode="classic_gd",
                                  num_planes=4, near=1.0, far=6.0, step_size=4.0)
            mpi = lgd_solve(views, config, None)
            loss = sum(np.sum((compositor.render(mpi, cam) - img) ** 2)
                       for cam, img in views)
            losses.append(loss)
        assert losses[0] > losses[1] > losses[2]

    def test_output_in_valid_range(self):
        views = scene_views(size=12)
        config = SolverConfig(iterations=10, mode="classic_gd", num_planes=3,
                              near=1.0, far=6.0)
        lgd_solve(views, config, None).validate()
