"""Forward-only convolutional feature pyramid.

A small VGG19-style stack (3x3 same-convolutions, rectifications, 2x2
max-pools) run from a loadable :class:`WeightStore`. The network layout
is data, not code: a :class:`NetworkConfig` is an ordered layer list,
JSON-serializable, with named tap points whose activations are returned
as :class:`FeatureMap` objects tagged with their cumulative pooling
stride.

Inputs are unit-interval RGB buffers. The per-channel means stored in
the weight file under ``preprocess.mean`` are subtracted before the
first convolution, so the preprocessing convention travels with the
weights and cannot drift between producers and consumers.

Arithmetic runs in float64 while weight storage stays float32; the same
inputs and weights therefore give bitwise-identical activations on
every call.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import nttw
from .errors import ConfigError, MissingTapError, MissingWeightError, ShapeError

__all__ = [
    "FeatureMap",
    "WeightStore",
    "NetworkConfig",
    "vgg19_config",
    "conv2d_forward",
    "rectify",
    "maxpool2",
    "extract_pyramid",
    "load_weights",
    "store_weights",
    "random_extractor_weights",
    "UNIT_RGB_MEAN",
]

# per-channel means of unit-interval RGB over a large natural-image corpus;
# stored in weight files as "preprocess.mean" so engine and exporter agree
UNIT_RGB_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)


@dataclass(frozen=True)
class FeatureMap:
    """Channel-major activations plus where in the network they came from.

    `stride` is the spatial scale relative to the source image:
    height * stride recovers the source height up to pooling floor.
    """

    data: np.ndarray  # (channels, height, width) float64
    layer: str
    stride: int

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


class WeightStore:
    """Named tensor collection; float32 at rest, float64 in compute.

    Lookup failures raise MissingWeightError naming the tensor, which is
    the error surfaced when a config references weights the file lacks.
    """

    def __init__(self, tensors: Dict[str, np.ndarray]):
        self.tensors = {
            name: np.ascontiguousarray(value, dtype=np.float32)
            for name, value in tensors.items()
        }

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name]
        except KeyError:
            raise MissingWeightError(f"weight tensor {name!r} not in store") from None

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __len__(self) -> int:
        return len(self.tensors)

    def names(self) -> List[str]:
        return list(self.tensors)

    def conv_pair(self, layer: str):
        """Kernel and bias for a conv layer, shape-checked."""
        kernel = self[layer + ".kernel"]
        bias = self[layer + ".bias"]
        if kernel.ndim != 4:
            raise ShapeError(f"{layer}.kernel must be 4-D, got shape {kernel.shape!r}")
        if bias.ndim != 1 or bias.shape[0] != kernel.shape[0]:
            raise ShapeError(
                f"{layer}.bias shape {bias.shape!r} does not match {kernel.shape[0]} out-channels"
            )
        return kernel, bias


@dataclass(frozen=True)
class NetworkConfig:
    """Ordered layer list. Entries are dicts with a 'type' key:

    {"type": "conv", "name": str, "channels": int}
    {"type": "rectify", "tap": str}        tap optional
    {"type": "maxpool"}
    """

    layers: tuple
    in_channels: int = 3

    def __post_init__(self):
        taps = [spec.get("tap") for spec in self.layers if spec.get("tap")]
        if len(taps) != len(set(taps)):
            raise ConfigError(f"duplicate tap names in config: {taps}")
        chain = self.in_channels
        for spec in self.layers:
            kind = spec.get("type")
            if kind == "conv":
                if "name" not in spec or "channels" not in spec:
                    raise ConfigError(f"conv layer needs name and channels: {spec!r}")
                chain = int(spec["channels"])
            elif kind not in ("rectify", "maxpool"):
                raise ConfigError(f"unknown layer type {kind!r}")
        if chain <= 0:
            raise ConfigError("channel chain collapsed to zero")

    def tap_names(self) -> List[str]:
        return [spec["tap"] for spec in self.layers if spec.get("tap")]

    def conv_names(self) -> List[str]:
        return [spec["name"] for spec in self.layers if spec.get("type") == "conv"]

    def to_json(self) -> str:
        doc = {"in_channels": self.in_channels, "layers": list(self.layers)}
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "NetworkConfig":
        try:
            doc = json.loads(text)
            layers = tuple(dict(spec) for spec in doc["layers"])
            return NetworkConfig(layers, int(doc.get("in_channels", 3)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad network config document: {exc}") from exc


# VGG19 layout: (block, convs-in-block, channels)
_VGG19_BLOCKS = ((1, 2, 64), (2, 2, 128), (3, 4, 256), (4, 4, 512), (5, 4, 512))


def vgg19_config(through: str = "relu5_1") -> NetworkConfig:
    """Standard 19-layer stack truncated just after the `through` tap.

    Taps are named relu{block}_{index}; pyramid strides under this config
    are relu1_1: 1, relu2_1: 2, relu3_1: 4, relu4_1: 8, relu5_1: 16.
    """
    layers = []
    for block, n_convs, channels in _VGG19_BLOCKS:
        if block > 1:
            layers.append({"type": "maxpool"})
        for i in range(1, n_convs + 1):
            name = f"conv{block}_{i}"
            tap = f"relu{block}_{i}"
            layers.append({"type": "conv", "name": name, "channels": channels})
            layers.append({"type": "rectify", "tap": tap})
            if tap == through:
                return NetworkConfig(tuple(layers))
    if through not in [spec.get("tap") for spec in layers]:
        raise ConfigError(f"unknown tap {through!r} for the standard stack")
    return NetworkConfig(tuple(layers))


def _conv_same(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Stride-1 cross-correlation with zero padding keeping spatial size."""
    c_out, c_in, kh, kw = kernel.shape
    if x.shape[0] != c_in:
        raise ShapeError(f"kernel expects {c_in} input channels, feature map has {x.shape[0]}")
    h, w = x.shape[1], x.shape[2]
    pad_h, pad_w = kh // 2, kw // 2
    padded = np.pad(x, ((0, 0), (pad_h, kh - 1 - pad_h), (pad_w, kw - 1 - pad_w)))
    # im2col: windows (c_in, kh, kw) at every output position, then one GEMM
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(1, 2))
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(h * w, c_in * kh * kw)
    mat = kernel.reshape(c_out, c_in * kh * kw).astype(np.float64)
    out = cols @ mat.T + bias.astype(np.float64)
    return out.T.reshape(c_out, h, w)


def conv2d_forward(input_map, kernel: np.ndarray, bias: np.ndarray):
    """Same-size convolution of a FeatureMap or bare (C, H, W) array.

    Output spatial size equals input (pad k//2, stride 1); arithmetic in
    float64. Returns the same kind the caller passed; a FeatureMap keeps
    its stride, with an empty layer name for the unnamed intermediate.
    """
    kernel = np.asarray(kernel)
    bias = np.asarray(bias)
    if kernel.ndim != 4:
        raise ShapeError(f"kernel must be 4-D, got shape {kernel.shape!r}")
    if isinstance(input_map, FeatureMap):
        return FeatureMap(_conv_same(input_map.data, kernel, bias), "", input_map.stride)
    x = np.asarray(input_map, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"feature data must be (C, H, W), got shape {x.shape!r}")
    return _conv_same(x, kernel, bias)


def rectify(x: np.ndarray) -> np.ndarray:
    """Elementwise max(x, 0)."""
    return np.maximum(x, 0.0)


def maxpool2(x: np.ndarray) -> np.ndarray:
    """2x2 stride-2 max pool over (C, H, W); odd trailing rows/cols drop."""
    c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    if h2 < 1 or w2 < 1:
        raise ShapeError(f"feature map {h}x{w} too small to pool")
    trimmed = x[:, : h2 * 2, : w2 * 2].reshape(c, h2, 2, w2, 2)
    return trimmed.max(axis=(2, 4))


def extract_pyramid(
    img: np.ndarray,
    weights: WeightStore,
    config: Optional[NetworkConfig] = None,
    taps: Optional[Sequence[str]] = None,
) -> List[FeatureMap]:
    """Run the stack over an image and collect the tapped activations.

    Returns one FeatureMap per requested tap, in tap-list order, each
    tagged with the cumulative pooling stride at that depth. Walking
    stops as soon as every tap is collected.
    """
    if config is None:
        config = vgg19_config()
    if taps is None:
        taps = config.tap_names()
    known = set(config.tap_names())
    for tap in taps:
        if tap not in known:
            raise MissingTapError(f"tap {tap!r} is not in the network config")
    if img.ndim != 3 or img.shape[2] != config.in_channels:
        raise ShapeError(
            f"expected (H, W, {config.in_channels}) image, got shape {img.shape!r}"
        )

    x = np.ascontiguousarray(img.transpose(2, 0, 1), dtype=np.float64)
    mean = weights["preprocess.mean"].astype(np.float64).reshape(-1, 1, 1)
    if mean.shape[0] != config.in_channels:
        raise ShapeError(
            f"preprocess.mean has {mean.shape[0]} channels, input has {config.in_channels}"
        )
    x = x - mean

    wanted = set(taps)
    found: Dict[str, FeatureMap] = {}
    stride = 1
    for spec in config.layers:
        kind = spec["type"]
        if kind == "conv":
            kernel, bias = weights.conv_pair(spec["name"])
            if kernel.shape[0] != spec["channels"]:
                raise ShapeError(
                    f"{spec['name']}.kernel out-channels {kernel.shape[0]} "
                    f"disagree with config ({spec['channels']})"
                )
            x = _conv_same(x, kernel, bias)
        elif kind == "rectify":
            x = rectify(x)
            tap = spec.get("tap")
            if tap in wanted:
                found[tap] = FeatureMap(x.copy(), tap, stride)
                if len(found) == len(wanted):
                    break
        else:  # maxpool
            x = maxpool2(x)
            stride *= 2
    missing = wanted - set(found)
    if missing:
        raise MissingTapError(f"taps never reached in forward pass: {sorted(missing)}")
    return [found[tap] for tap in taps]


def load_weights(path) -> WeightStore:
    """Read an NTTW weight file (checksum verified by the reader)."""
    return WeightStore(nttw.read_tensors(path))


def store_weights(weights: WeightStore, path) -> None:
    """Write a WeightStore to an NTTW file, name order preserved."""
    nttw.write_tensors(path, weights.tensors)


def random_extractor_weights(config: Optional[NetworkConfig] = None, seed: int = 0) -> WeightStore:
    """Seeded He-uniform random weights for every conv in the config.

    Useful as a deterministic stand-in when no trained weights are on
    hand: activations are meaningless as textures but every shape and
    data-flow contract holds. Includes preprocess.mean.
    """
    if config is None:
        config = vgg19_config()
    rng = np.random.default_rng(seed)
    tensors: Dict[str, np.ndarray] = {"preprocess.mean": UNIT_RGB_MEAN.copy()}
    c_in = config.in_channels
    for spec in config.layers:
        if spec["type"] != "conv":
            continue
        c_out = spec["channels"]
        bound = np.sqrt(6.0 / (c_in * 9))
        tensors[spec["name"] + ".kernel"] = rng.uniform(
            -bound, bound, size=(c_out, c_in, 3, 3)
        ).astype(np.float32)
        tensors[spec["name"] + ".bias"] = np.zeros(c_out, dtype=np.float32)
        c_in = c_out
    return WeightStore(tensors)
