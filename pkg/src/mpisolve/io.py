"""MPI disk format, shared with the viewer.

A bundle directory holds `mpi.json` (reference camera, disparities, plane
count, dimensions) plus one straight-alpha RGBA PNG per plane, named
`plane_000.png` onward, back-to-front. Files are straight alpha (the PNG
convention); in memory planes are premultiplied. 8-bit by default;
16-bit optionally, for lossless pipelines, via a small built-in PNG codec
(Pillow does not handle 16-bit RGBA).
"""
from __future__ import annotations

import json
import os
import struct
import zlib

import numpy as np
from PIL import Image

from .errors import ValidationError
from .geometry import Camera
from .mpi import Mpi, premultiply, unpremultiply

BUNDLE_FORMAT = "mpi-bundle"
BUNDLE_VERSION = 1


def plane_filename(index: int) -> str:
    return f"plane_{index:03d}.png"


def save_mpi(mpi: Mpi, out_dir, bit_depth: int = 8) -> None:
    """Write a bundle directory. ``bit_depth`` is 8 or 16."""
    if bit_depth not in (8, 16):
        raise ValidationError("bit depth must be 8 or 16")
    os.makedirs(out_dir, exist_ok=True)
    meta = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "reference": mpi.reference.to_dict(),
        "disparities": [float(d) for d in mpi.disparities],
        "num_planes": mpi.num_planes,
        "width": mpi.plane_width,
        "height": mpi.plane_height,
        "bit_depth": bit_depth,
    }
    with open(os.path.join(out_dir, "mpi.json"), "w") as f:
        json.dump(meta, f, indent=2)
    scale = 255.0 if bit_depth == 8 else 65535.0
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    for d in range(mpi.num_planes):
        straight = unpremultiply(mpi.planes[d])
        q = np.round(np.clip(straight, 0.0, 1.0) * scale).astype(dtype)
        path = os.path.join(out_dir, plane_filename(d))
        if bit_depth == 8:
            Image.fromarray(q, mode="RGBA").save(path)
        else:
            write_png16(path, q)


def load_mpi(bundle_dir) -> Mpi:
    """Read a bundle directory back into a premultiplied float32 MPI."""
    meta_path = os.path.join(bundle_dir, "mpi.json")
    try:
        with open(meta_path) as f:
            meta = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read {meta_path}: {e}") from e
    if meta.get("format") != BUNDLE_FORMAT:
        raise ValidationError("not an MPI bundle")
    if meta.get("version") != BUNDLE_VERSION:
        raise ValidationError(f"unsupported bundle version {meta.get('version')}")
    reference = Camera.from_dict(meta["reference"])
    disparities = np.asarray(meta["disparities"], dtype=np.float64)
    count = int(meta["num_planes"])
    if len(disparities) != count:
        raise ValidationError("plane count does not match disparity list")
    bit_depth = int(meta.get("bit_depth", 8))
    h, w = int(meta["height"]), int(meta["width"])
    planes = np.empty((count, h, w, 4), dtype=np.float32)
    for d in range(count):
        path = os.path.join(bundle_dir, plane_filename(d))
        if bit_depth == 8:
            img = np.asarray(Image.open(path).convert("RGBA"), dtype=np.float32)
            straight = img / 255.0
        else:
            straight = read_png16(path).astype(np.float32) / 65535.0
        if straight.shape[:2] != (h, w):
            raise ValidationError(f"{path}: plane dimensions do not match mpi.json")
        planes[d] = premultiply(straight)
    return Mpi(reference, disparities, planes)


# -- minimal 16-bit RGBA PNG codec ----------------------------------------

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (struct.pack(">I", len(payload)) + tag + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF))


def write_png16(path, rgba: np.ndarray) -> None:
    """Write a (H, W, 4) uint16 array as a 16-bit RGBA PNG (filter 0)."""
    rgba = np.asarray(rgba)
    if rgba.dtype != np.uint16 or rgba.ndim != 3 or rgba.shape[2] != 4:
        raise ValidationError("write_png16 expects (H, W, 4) uint16")
    h, w = rgba.shape[:2]
    ihdr = struct.pack(">IIBBBBB", w, h, 16, 6, 0, 0, 0)
    raw = rgba.astype(">u2").tobytes()
    stride = w * 8
    scanlines = b"".join(
        b"\x00" + raw[y * stride:(y + 1) * stride] for y in range(h))
    with open(path, "wb") as f:
        f.write(_PNG_SIG)
        f.write(_chunk(b"IHDR", ihdr))
        f.write(_chunk(b"IDAT", zlib.compress(scanlines, 9)))
        f.write(_chunk(b"IEND", b""))


def _unfilter(scanlines: np.ndarray, filters: np.ndarray, bpp: int) -> np.ndarray:
    h, stride = scanlines.shape
    out = np.zeros((h, stride), dtype=np.uint8)
    for y in range(h):
        line = scanlines[y].astype(np.int32)
        prev = out[y - 1].astype(np.int32) if y > 0 else np.zeros(stride, np.int32)
        ft = filters[y]
        if ft == 0:
            out[y] = line
        elif ft == 2:  # up
            out[y] = (line + prev) & 0xFF
        elif ft in (1, 3, 4):
            cur = np.zeros(stride, np.int32)
            for x in range(stride):
                a = cur[x - bpp] if x >= bpp else 0
                b = prev[x]
                c = prev[x - bpp] if x >= bpp else 0
                if ft == 1:
                    pred = a
                elif ft == 3:
                    pred = (a + b) // 2
                else:
                    p = a + b - c
                    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                    pred = a if pa <= pb and pa <= pc else (b if pb <= pc else c)
                cur[x] = (line[x] + pred) & 0xFF
            out[y] = cur
        else:
            raise ValidationError(f"unsupported PNG filter {ft}")
    return out


def read_png16(path) -> np.ndarray:
    """Read a 16-bit RGBA PNG into (H, W, 4) uint16."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != _PNG_SIG:
        raise ValidationError(f"{path}: not a PNG file")
    pos = 8
    idat = b""
    meta = None
    while pos < len(data):
        (length,) = struct.unpack(">I", data[pos:pos + 4])
        tag = data[pos + 4:pos + 8]
        payload = data[pos + 8:pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            meta = struct.unpack(">IIBBBBB", payload)
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
    if meta is None:
        raise ValidationError(f"{path}: missing IHDR")
    w, h, depth, color, _, _, interlace = meta
    if depth != 16 or color != 6 or interlace != 0:
        raise ValidationError(f"{path}: expected 16-bit non-interlaced RGBA")
    stride = w * 8
    flat = np.frombuffer(zlib.decompress(idat), dtype=np.uint8)
    flat = flat.reshape(h, stride + 1)
    rows = _unfilter(flat[:, 1:], flat[:, 0], bpp=8)
    return rows.view(">u2").astype(np.uint16).reshape(h, w, 4)
