import numpy as np
import pytest

from mpisolve import autodiff as ad


def numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        p = x.copy()
        p[idx] += h
        m = x.copy()
        m[idx] -= h
        g[idx] = (f(p) - f(m)) / (2 * h)
    return g


def check_grad(build, x, tol=1e-6):
    """``build`` maps a Tensor to a scalar Tensor; compares backward against
    central differences."""
    t = ad.parameter(x.copy())
    out = build(t)
    out.backward()
    fd = numeric_grad(lambda v: float(build(ad.parameter(v)).data), x)
    np.testing.assert_allclose(t.grad, fd, atol=tol)


class TestElementwiseOps:
    def test_add_mul_sub(self, rng):
        x = rng.normal(size=(3, 4))
        other = rng.normal(size=(3, 4))
        check_grad(lambda t: ((t * other + t) - 0.5 * t).sum(), x)

    def test_broadcasting(self, rng):
        x = rng.normal(size=(4,))
        other = rng.normal(size=(3, 4))
        check_grad(lambda t: (t * other).sum(), x)

    def test_division_by_scalar(self, rng):
        check_grad(lambda t: (t / 3.0).sum(), rng.normal(size=(2, 3)))

    def test_ndarray_on_the_left(self, rng):
        """numpy must defer to the Tensor's reflected operators."""
        x = rng.normal(size=(2, 2))
        arr = rng.normal(size=(2, 2))
        check_grad(lambda t: (arr * t + arr - t).sum(), x)

    def test_abs_square(self, rng):
        x = rng.normal(size=(3, 3)) + 0.1  # stay away from the |.| kink
        check_grad(lambda t: t.abs().sum(), x)
        check_grad(lambda t: t.square().sum(), x)

    def test_sigmoid_elu(self, rng):
        x = rng.normal(size=(3, 3))
        check_grad(lambda t: t.sigmoid().sum(), x)
        check_grad(lambda t: t.elu().sum(), x, tol=1e-5)

    def test_getitem(self, rng):
        x = rng.normal(size=(4, 4))
        check_grad(lambda t: (t[1:3, ::2] * 2.0).sum(), x)

    def test_sum_axis_and_mean(self, rng):
        x = rng.normal(size=(3, 4))
        check_grad(lambda t: (t.sum_axis(-1) * np.arange(3.0)[:, None]).sum(), x)
        check_grad(lambda t: t.mean(), x)


class TestStructuralOps:
    def test_concat(self, rng):
        x = rng.normal(size=(3, 2))
        other = rng.normal(size=(3, 3))
        check_grad(lambda t: ad.concat([t, other]).square().sum(), x)

    def test_stack(self, rng):
        x = rng.normal(size=(2, 2))
        check_grad(lambda t: (ad.stack([t, t * 2.0], axis=0).square()).sum(), x)

    def test_affine(self, rng):
        x = rng.normal(size=(5, 3))
        w = rng.normal(size=(3, 4))
        b = rng.normal(size=4)
        check_grad(lambda t: ad.affine(t, w, b).square().sum(), x)
        check_grad(lambda t: ad.affine(x, t, b).square().sum(), w)
        check_grad(lambda t: ad.affine(x, w, t).square().sum(), b)

    def test_maximum(self, rng):
        x = rng.normal(size=(4, 4))
        other = rng.normal(size=(4, 4))
        check_grad(lambda t: ad.maximum(t, other).sum(), x)
        check_grad(lambda t: ad.maximum(other, t).sum(), x)

    def test_maximum_ties_route_to_first(self):
        a = ad.parameter(np.ones((2, 2)))
        b = ad.parameter(np.ones((2, 2)))
        ad.maximum(a, b).sum().backward()
        np.testing.assert_array_equal(a.grad, 1.0)
        np.testing.assert_array_equal(b.grad, 0.0)


class TestWarp:
    def test_forward_matches_kernel(self, rng):
        from mpisolve.kernels import bilinear_gather

        src = rng.uniform(0, 1, (6, 6, 2))
        xs = rng.uniform(-1, 6, (4, 4))
        ys = rng.uniform(-1, 6, (4, 4))
        out = ad.warp(ad.parameter(src), xs, ys)
        np.testing.assert_array_equal(out.data, bilinear_gather(src, xs, ys))

    def test_backward_is_exact_adjoint(self, rng):
        """<u, W v> == <W^T u, v> for the gather/scatter pair."""
        src = rng.uniform(0, 1, (6, 6, 3))
        xs = rng.uniform(-1, 6, (5, 5))
        ys = rng.uniform(-1, 6, (5, 5))
        u = rng.normal(size=(5, 5, 3))
        t = ad.parameter(src)
        out = ad.warp(t, xs, ys)
        (out * u).sum().backward()
        lhs = np.sum(out.data * u)
        rhs = np.sum(t.grad * src)
        assert abs(lhs - rhs) < 1e-10

    def test_grad_matches_fd(self, rng):
        src = rng.uniform(0, 1, (5, 5, 1))
        xs = rng.uniform(0, 4, (3, 3))
        ys = rng.uniform(0, 4, (3, 3))
        check_grad(lambda t: ad.warp(t, xs, ys).square().sum(), src)


class TestDispatch:
    def test_functions_pass_ndarrays_through(self, rng):
        x = rng.normal(size=(3, 3))
        assert isinstance(ad.elu(x), np.ndarray)
        assert isinstance(ad.sigmoid(x), np.ndarray)
        assert isinstance(ad.concat([x, x]), np.ndarray)
        assert isinstance(ad.maximum(x, x), np.ndarray)
        assert isinstance(ad.affine(x, np.eye(3), np.zeros(3)), np.ndarray)

    def test_tensor_and_ndarray_paths_agree(self, rng):
        x = rng.normal(size=(4, 3))
        w = rng.normal(size=(3, 2))
        b = rng.normal(size=2)
        plain = ad.elu(ad.affine(x, w, b))
        wrapped = ad.elu(ad.affine(ad.parameter(x), w, b))
        np.testing.assert_array_equal(plain, wrapped.data)


class TestGraph:
    def test_gradient_accumulates_over_reuse(self, rng):
        x = ad.parameter(rng.normal(size=(3,)))
        y = (x * 2.0 + x * 3.0).sum()
        y.backward()
        np.testing.assert_allclose(x.grad, 5.0)

    def test_diamond_graph(self):
        x = ad.parameter(np.array([2.0]))
        a = x * 3.0
        b = x * 4.0
        (a * b).sum().backward()
        np.testing.assert_allclose(x.grad, [48.0])  # d(12 x^2)/dx = 24 x

    def test_no_grad_without_requires(self):
        x = ad.tensor(np.ones(3))
        y = (x * 2.0).sum()
        y.backward()
        assert x.grad is None
