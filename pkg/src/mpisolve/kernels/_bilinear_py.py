"""Pure-numpy bilinear gather/scatter kernels.

Convention: a sample at real coordinate (x, y) interpolates the four
surrounding integer pixel indices; taps falling outside the source image
contribute zero (zero-extension, which keeps sampling linear in the image).
"""
import numpy as np


def bilinear_gather(src, xs, ys):
    """Sample ``src`` (H, W, C) at real coordinates ``xs``/``ys``.

    Returns an array of shape xs.shape + (C,), in src's dtype. Out-of-image
    taps read as zero.
    """
    h, w = src.shape[:2]
    out_shape = xs.shape
    xs = xs.ravel()
    ys = ys.ravel()

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = (xs - x0).astype(src.dtype)
    fy = (ys - y0).astype(src.dtype)

    flat = src.reshape(h * w, -1)
    out = np.zeros((xs.size, flat.shape[1]), dtype=src.dtype)
    for dy in (0, 1):
        wy = fy if dy else (1.0 - fy)
        yi = y0 + dy
        for dx in (0, 1):
            wx = fx if dx else (1.0 - fx)
            xi = x0 + dx
            valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            idx = np.where(valid, yi * w + xi, 0)
            out += (wx * wy * valid)[:, None] * flat[idx]
    return out.reshape(out_shape + (flat.shape[1],))


def bilinear_scatter(grad_out, xs, ys, height, width):
    """Exact adjoint of :func:`bilinear_gather`.

    ``grad_out`` has shape xs.shape + (C,); returns (height, width, C).
    """
    c = grad_out.shape[-1]
    g = grad_out.reshape(-1, c)
    xs = xs.ravel()
    ys = ys.ravel()

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = (xs - x0).astype(grad_out.dtype)
    fy = (ys - y0).astype(grad_out.dtype)

    acc = np.zeros((height * width, c), dtype=grad_out.dtype)
    for dy in (0, 1):
        wy = fy if dy else (1.0 - fy)
        yi = y0 + dy
        for dx in (0, 1):
            wx = fx if dx else (1.0 - fx)
            xi = x0 + dx
            valid = (xi >= 0) & (xi < width) & (yi >= 0) & (yi < height)
            idx = np.where(valid, yi * width + xi, 0)
            np.add.at(acc, idx, (wx * wy * valid)[:, None] * g)
    return acc.reshape(height, width, c)
