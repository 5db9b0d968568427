"""Per-pixel update networks for the unrolled solver.

Each iteration has its own weight set. The topology mirrors a cross-view
aggregation net: a per-view encoder, then stages that alternate per-view
layers (fed the view features concatenated with the current pooled
features) with cross-view elementwise max-pooling, and a head that maps
the final pooled features to an update of the 4 + E raw state channels.

All layers are 1x1 (per-pixel) affine maps with Elu activations, so the
network is fully convolutional in depth, height and width: any (D, H, W)
works at inference with the same weights.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from . import autodiff as ad
from .errors import ValidationError

WEIGHTS_FORMAT = "mpisolve-weights"
WEIGHTS_VERSION = 1

LAYER_NAMES = ("enc1", "enc2", "stage1", "stage2", "head")

# channels appended to each per-view input
INIT_INPUT_CHANNELS = 4  # input-image PSV (3) + validity mask (1)
COMPONENT_INPUT_CHANNELS = 11  # gradient components (10) + validity mask (1)


@dataclass
class IterationWeights:
    """One iteration's layers: name -> {weight (Cin, Cout), bias (Cout,)}."""

    layers: dict = field(default_factory=dict)

    def check_chain(self, in_channels: int, hidden: int, out_channels: int):
        expect = {
            "enc1": (in_channels, hidden),
            "enc2": (hidden, hidden),
            "stage1": (2 * hidden, hidden),
            "stage2": (2 * hidden, hidden),
            "head": (hidden, out_channels),
        }
        for name, shape in expect.items():
            w, _ = self.layers[name]
            if w.shape != shape:
                raise ValidationError(
                    f"layer {name}: expected weight shape {shape}, got {w.shape}"
                )


@dataclass
class UpdateNetwork:
    """Weight sets for the initialization step plus each update step."""

    extra_channels: int
    hidden: int
    iterations: list  # of IterationWeights; index 0 = initialization

    @property
    def num_iterations(self) -> int:
        return len(self.iterations)

    @property
    def state_channels(self) -> int:
        return 4 + self.extra_channels

    def input_channels(self, iteration: int) -> int:
        if iteration == 0:
            return INIT_INPUT_CHANNELS
        return self.state_channels + COMPONENT_INPUT_CHANNELS

    @classmethod
    def create(cls, rng: np.random.Generator, iterations: int,
               extra_channels: int = 4, hidden: int = 32) -> "UpdateNetwork":
        net = cls(extra_channels=extra_channels, hidden=hidden, iterations=[])
        out_ch = 4 + extra_channels
        for n in range(iterations):
            cin = INIT_INPUT_CHANNELS if n == 0 else out_ch + COMPONENT_INPUT_CHANNELS
            dims = {
                "enc1": (cin, hidden),
                "enc2": (hidden, hidden),
                "stage1": (2 * hidden, hidden),
                "stage2": (2 * hidden, hidden),
                "head": (hidden, out_ch),
            }
            layers = {}
            for name, (ci, co) in dims.items():
                w = rng.normal(0.0, np.sqrt(1.0 / ci), size=(ci, co))
                layers[name] = (w, np.zeros(co))
            net.iterations.append(IterationWeights(layers))
        return net

    # -- forward ----------------------------------------------------------
    def apply(self, iteration: int, per_view_inputs, weights=None):
        """Run one iteration's net over per-view inputs (each (D, H, W, Cin)).

        ``weights`` may override the stored ndarrays with autodiff Tensors
        (same nesting) during training. Returns the (D, H, W, 4+E) update.
        """
        if len(per_view_inputs) == 0:
            raise ValidationError("need at least one view")
        layers = weights if weights is not None else self.iterations[iteration].layers
        return _forward_core(layers, per_view_inputs)

    # -- (de)serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": WEIGHTS_FORMAT,
            "version": WEIGHTS_VERSION,
            "extra_channels": self.extra_channels,
            "hidden": self.hidden,
            "iterations": [
                {
                    name: {
                        "rows": w.shape[0],
                        "cols": w.shape[1],
                        "matrix": [float(v) for v in w.ravel()],
                        "bias": [float(v) for v in b],
                    }
                    for name, (w, b) in it.layers.items()
                }
                for it in self.iterations
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UpdateNetwork":
        if d.get("format") != WEIGHTS_FORMAT:
            raise ValidationError("not a weights file")
        if d.get("version") != WEIGHTS_VERSION:
            raise ValidationError(f"unsupported weights version {d.get('version')}")
        iterations = []
        for it in d["iterations"]:
            layers = {}
            for name in LAYER_NAMES:
                rec = it[name]
                w = np.asarray(rec["matrix"], dtype=np.float64).reshape(
                    rec["rows"], rec["cols"]
                )
                layers[name] = (w, np.asarray(rec["bias"], dtype=np.float64))
            iterations.append(IterationWeights(layers))
        return cls(
            extra_channels=int(d["extra_channels"]),
            hidden=int(d["hidden"]),
            iterations=iterations,
        )

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path) -> "UpdateNetwork":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _forward_core(layers, inputs):
    f = [ad.elu(ad.affine(x, *layers["enc1"])) for x in inputs]
    f = [ad.elu(ad.affine(x, *layers["enc2"])) for x in f]
    pooled = reduce(ad.maximum, f)
    g = [ad.elu(ad.affine(ad.concat([x, pooled]), *layers["stage1"])) for x in f]
    pooled = reduce(ad.maximum, g)
    h = [ad.elu(ad.affine(ad.concat([x, pooled]), *layers["stage2"])) for x in g]
    pooled = reduce(ad.maximum, h)
    return ad.affine(pooled, *layers["head"])
