"""Multiplane-image reconstruction by learned gradient descent.

Reconstructs an MPI (a stack of fronto-parallel premultiplied-RGBA
planes in a reference camera's frustum) from a handful of posed input
photographs, and renders novel views from it. The solver is an unrolled
iterative scheme: a plane-sweep initialization followed by a small number
of per-pixel learned update steps driven by the analytic gradient
components of the rendering loss. A classic fixed-step descent mode
shares the same machinery.
"""
from .compositor import (accumulated_over, net_transmittance, over_composite,
                         render, sweep_composite)
from .errors import MpisolveError, NumericalError, ValidationError
from .geometry import Camera, plane_homography, warp_image, warp_mpi_to_view
from .io import load_mpi, save_mpi
from .kernels import BACKEND
from .lgd import SolverConfig, lgd_solve, reference_camera, solve_tiled
from .metrics import psnr, ssim
from .mpi import Mpi, MpiState, make_plane_depths, plane_disparities
from .network import UpdateNetwork
from .training import TrainConfig, train

__version__ = "1.0.0"

__all__ = [
    "Camera", "Mpi", "MpiState", "SolverConfig", "TrainConfig",
    "UpdateNetwork", "MpisolveError", "NumericalError", "ValidationError",
    "BACKEND", "accumulated_over", "lgd_solve", "load_mpi",
    "make_plane_depths", "net_transmittance", "over_composite",
    "plane_disparities", "plane_homography", "psnr", "reference_camera",
    "render", "save_mpi", "solve_tiled", "ssim", "sweep_composite", "train",
    "warp_image", "warp_mpi_to_view",
]
