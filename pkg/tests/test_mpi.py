import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpisolve import mpi as mpimod
from mpisolve.errors import ValidationError
from mpisolve.mpi import (Mpi, MpiState, convert_to_rgba, jitter_depths,
                          make_plane_depths, plane_disparities, premultiply,
                          unpremultiply, zero_state)

from conftest import make_camera, random_volume


class TestPlanePlacement:
    def test_example_depths(self):
        np.testing.assert_allclose(make_plane_depths(1.0, 4.0, 4),
                                   [4.0, 2.0, 4.0 / 3.0, 1.0], atol=1e-12)

    def test_infinite_far_plane(self):
        depths = make_plane_depths(1.0, np.inf, 3)
        assert depths[0] == np.inf
        np.testing.assert_allclose(depths[1:], [2.0, 1.0], atol=1e-12)

    def test_disparities_exactly_linear(self):
        disp = plane_disparities(0.7, 23.0, 11)
        fit = np.linspace(disp[0], disp[-1], 11)
        assert np.max(np.abs(disp - fit)) < 1e-12
        assert np.all(np.diff(disp) > 0)

    def test_single_plane(self):
        np.testing.assert_allclose(plane_disparities(2.0, np.inf, 1), [0.0])

    @pytest.mark.parametrize("near,far,count", [(1.0, 0.5, 4), (0.0, 2.0, 4),
                                                (-1.0, 2.0, 4), (1.0, 2.0, 0)])
    def test_invalid_ranges(self, near, far, count):
        with pytest.raises(ValidationError):
            plane_disparities(near, far, count)


class TestJitter:
    def test_zero_magnitude_is_identity(self):
        depths = make_plane_depths(1.0, 8.0, 5)
        out = jitter_depths(depths, np.random.default_rng(0), 0.0)
        np.testing.assert_array_equal(out, depths)

    def test_golden_values(self):
        """Frozen regression: seed 0, m=0.25 over 4 planes in [1, 4]."""
        depths = make_plane_depths(1.0, 4.0, 4)
        out = jitter_depths(depths, np.random.default_rng(0), 0.25)
        expected = [3.7436328631738323, 2.12213597410994,
                    1.443789609432561, 1.0643212381986373]
        np.testing.assert_allclose(out, expected, rtol=1e-12)

    @given(seed=st.integers(0, 500))
    @settings(max_examples=50, deadline=None)
    def test_monotone_for_any_seed(self, seed):
        depths = make_plane_depths(0.8, np.inf, 6)
        out = jitter_depths(depths, np.random.default_rng(seed), 0.49)
        disp = 1.0 / out
        assert np.all(np.diff(disp) > 0)

    def test_rejects_large_magnitude(self):
        with pytest.raises(ValidationError):
            jitter_depths(make_plane_depths(1, 4, 3), np.random.default_rng(0), 0.5)

    def test_rejects_unsorted_depths(self):
        with pytest.raises(ValidationError):
            jitter_depths(np.array([1.0, 2.0, 3.0]), np.random.default_rng(0), 0.1)


class TestParameterization:
    def test_zero_raw_maps_to_half_alpha(self):
        rgba = convert_to_rgba(np.zeros((1, 2, 2, 4)))
        np.testing.assert_allclose(rgba[..., 3], 0.5)
        np.testing.assert_allclose(rgba[..., :3], 0.25)

    def test_output_always_valid(self, rng):
        raw = rng.normal(0, 10, (3, 5, 5, 4))
        rgba = convert_to_rgba(raw)
        cam = make_camera(size=5)
        Mpi(cam, [0.1, 0.5, 0.9], rgba).validate()

    def test_premultiply_round_trip(self, rng):
        straight = rng.uniform(0, 1, (4, 4, 4))
        straight[..., 3] = rng.uniform(0.1, 1.0, (4, 4))  # keep alpha away from 0
        back = unpremultiply(premultiply(straight))
        np.testing.assert_allclose(back, straight, atol=1e-12)

    def test_unpremultiply_zeroes_transparent_color(self):
        rgba = np.array([[[0.5, 0.2, 0.1, 0.0]]])
        out = unpremultiply(rgba)
        np.testing.assert_array_equal(out[..., :3], 0.0)


class TestMpiContainers:
    def test_rejects_mismatched_plane_count(self, rng):
        with pytest.raises(ValidationError):
            Mpi(make_camera(size=4), [0.1, 0.2], rng.uniform(0, 1, (3, 4, 4, 4)))

    def test_rejects_decreasing_disparities(self, rng):
        with pytest.raises(ValidationError):
            Mpi(make_camera(size=4), [0.5, 0.1], random_volume(rng, 2, 4, 4))

    def test_validate_catches_unpremultiplied_color(self):
        planes = np.zeros((1, 2, 2, 4))
        planes[..., 0] = 0.9
        planes[..., 3] = 0.5  # c > alpha
        with pytest.raises(ValidationError):
            Mpi(make_camera(size=2), [0.3], planes).validate()

    def test_state_rgba_matches_conversion(self, rng):
        cam = make_camera(size=4)
        raw = rng.normal(0, 1, (2, 4, 4, 7))
        state = MpiState(cam, np.array([0.1, 0.6]), raw)
        assert state.extra_channels == 3
        np.testing.assert_array_equal(state.rgba(), convert_to_rgba(raw[..., :4]))
        state.to_mpi().validate()

    def test_zero_state_shape(self):
        cam = make_camera(size=6)
        state = zero_state(cam, [0.1, 0.2, 0.3], 6, 6, extra_channels=2)
        assert state.raw.shape == (3, 6, 6, 6)
        assert state.plane_height == 6 and state.plane_width == 6
