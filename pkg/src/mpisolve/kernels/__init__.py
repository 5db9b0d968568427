"""Bilinear sampling kernels with backend selection.

The compiled Cython extension is used when available; set
``MPISOLVE_BACKEND=python`` to force the numpy fallback (or ``cython`` to
require the extension). ``benchmarks/bench_warp.py`` compares the two.
"""
import os

from . import _bilinear_py

_requested = os.environ.get("MPISOLVE_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _bilinear_py
    BACKEND = "python"
else:
    try:
        from . import _bilinear_cy as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _bilinear_py
        BACKEND = "python"

bilinear_gather = _impl.bilinear_gather
bilinear_scatter = _impl.bilinear_scatter

__all__ = ["bilinear_gather", "bilinear_scatter", "BACKEND"]
