"""Forward pass of the texture-transfer generator.

The generator starts from the LR image at its native resolution: a two
convolution stem lifts it to the trunk width (psi_0). Each level then
concatenates the current trunk state with that level's swapped map
(trunk channels first), pushes the pair through a merge convolution and
a chain of residual blocks, and adds the pre-merge trunk state back.
Every level except the last ends with a 2x sub-pixel upscale (a conv to
4x channels followed by channel-to-space rearrangement); the last level
ends with a linear 3-channel output convolution instead. Values are
clamped to the unit interval only at the final image conversion, so the
trunk itself is unbounded.

All weights live under the ``gen.`` prefix in the same container format
as the extractor weights:

    gen.stem.conv1 / gen.stem.conv2
    gen.level{i}.merge
    gen.level{i}.block{b}.conv1 / .conv2
    gen.level{i}.up              (levels 1 .. L-1)
    gen.out

with i and b counted from 1, and each name carrying ``.kernel`` and
``.bias`` tensors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, ShapeError
from .feature_extractor import FeatureMap, WeightStore, rectify
from .feature_swap import SwappedPyramid

__all__ = [
    "TransferConfig",
    "residual_block_forward",
    "subpixel_upscale",
    "make_content_base",
    "transfer_forward",
    "random_generator_weights",
]


@dataclass(frozen=True)
class TransferConfig:
    """Trunk geometry: level count, residual blocks per level, width.

    With `levels` = L the trunk upscales L-1 times, so L = 3 gives the
    4x output of the standard pipeline. L = 1 is the degenerate
    no-upscale trunk, useful for exercising the recursion base case.
    """

    levels: int = 3
    blocks: int = 16
    channels: int = 64

    def __post_init__(self):
        if self.levels < 1:
            raise ConfigError(f"levels must be >= 1, got {self.levels}")
        if self.blocks < 1 or self.channels < 1:
            raise ConfigError("blocks and channels must be >= 1")


def _conv(x: np.ndarray, weights: WeightStore, name: str) -> np.ndarray:
    from .feature_extractor import conv2d_forward

    kernel, bias = weights.conv_pair(name)
    return conv2d_forward(x, kernel, bias)


def residual_block_forward(x, weights: WeightStore, name: str):
    """conv -> rectify -> conv plus the identity skip; size preserved.

    Accepts a FeatureMap or a bare (C, H, W) array, like conv2d_forward.
    """
    if isinstance(x, FeatureMap):
        return FeatureMap(
            residual_block_forward(x.data, weights, name), x.layer, x.stride
        )
    inner = _conv(rectify(_conv(x, weights, name + ".conv1")), weights, name + ".conv2")
    return x + inner


def subpixel_upscale(x, r: int):
    """Channel-to-space rearrangement: (C, H, W) -> (C/r^2, H*r, W*r).

    output(c, y, x) = input(c*r*r + (y mod r)*r + (x mod r), y//r, x//r).
    A pure permutation of elements: every input value appears exactly
    once in the output.
    """
    if isinstance(x, FeatureMap):
        out = subpixel_upscale(x.data, r)
        return FeatureMap(out, x.layer, max(1, x.stride // r))
    r = int(r)
    if r < 1:
        raise ConfigError(f"upscale factor must be >= 1, got {r}")
    c, h, w = x.shape
    if c % (r * r) != 0:
        raise ShapeError(f"{c} channels not divisible by r^2 = {r * r}")
    c_out = c // (r * r)
    folded = x.reshape(c_out, r, r, h, w)
    return np.ascontiguousarray(folded.transpose(0, 3, 1, 4, 2).reshape(c_out, h * r, w * r))


def make_content_base(lr: np.ndarray, weights: WeightStore) -> FeatureMap:
    """psi_0: the LR image lifted to trunk width at native resolution."""
    if lr.ndim != 3 or lr.shape[2] != 3:
        raise ShapeError(f"expected (H, W, 3) LR image, got shape {lr.shape!r}")
    x = np.ascontiguousarray(lr.transpose(2, 0, 1), dtype=np.float64)
    x = rectify(_conv(x, weights, "gen.stem.conv1"))
    x = rectify(_conv(x, weights, "gen.stem.conv2"))
    return FeatureMap(x, "psi0", 1)


def transfer_forward(
    content_base: FeatureMap,
    pyramid: SwappedPyramid,
    weights: WeightStore,
    cfg: Optional[TransferConfig] = None,
) -> np.ndarray:
    """Run the trunk over the swapped pyramid and emit the output image.

    Pyramid levels are consumed coarse to fine (largest feature stride
    first); each level's swapped map must match the trunk's current
    spatial size. Returns an (H, W, 3) unit-interval buffer, clamped at
    this conversion and nowhere earlier.
    """
    if cfg is None:
        cfg = TransferConfig()
    order = sorted(
        pyramid.layer_order, key=lambda layer: pyramid.maps[layer].stride, reverse=True
    )
    if len(order) != cfg.levels:
        raise ShapeError(
            f"pyramid has {len(order)} levels, transfer config expects {cfg.levels}"
        )
    psi = content_base.data
    if psi.shape[0] != cfg.channels:
        raise ShapeError(
            f"content base has {psi.shape[0]} channels, trunk expects {cfg.channels}"
        )
    for li, layer in enumerate(order, start=1):
        m = pyramid.maps[layer].data
        if m.shape[1:] != psi.shape[1:]:
            raise ShapeError(
                f"swapped map {layer} is {m.shape[1:]}, trunk state is {psi.shape[1:]}"
            )
        prefix = f"gen.level{li}"
        x = rectify(_conv(np.concatenate([psi, m], axis=0), weights, prefix + ".merge"))
        for b in range(1, cfg.blocks + 1):
            x = residual_block_forward(x, weights, f"{prefix}.block{b}")
        psi = x + psi
        if li < cfg.levels:
            psi = rectify(subpixel_upscale(_conv(psi, weights, prefix + ".up"), 2))
    out = _conv(psi, weights, "gen.out")
    if out.shape[0] != 3:
        raise ShapeError(f"output convolution produced {out.shape[0]} channels, wanted 3")
    return np.clip(out.transpose(1, 2, 0), 0.0, 1.0)


def random_generator_weights(
    pyramid_channels: Sequence[int],
    cfg: Optional[TransferConfig] = None,
    seed: int = 0,
) -> WeightStore:
    """Seeded He-uniform generator weights sized for the given pyramid.

    `pyramid_channels` lists the swapped-map channel counts coarse to
    fine, one per level (e.g. (256, 128, 64) for the standard three).
    """
    if cfg is None:
        cfg = TransferConfig()
    if len(pyramid_channels) != cfg.levels:
        raise ConfigError(
            f"{len(pyramid_channels)} pyramid channel counts for {cfg.levels} levels"
        )
    rng = np.random.default_rng(seed)
    tensors = {}

    def conv(name, c_out, c_in, k=3):
        bound = np.sqrt(6.0 / (c_in * k * k))
        tensors[name + ".kernel"] = rng.uniform(
            -bound, bound, size=(c_out, c_in, k, k)
        ).astype(np.float32)
        tensors[name + ".bias"] = np.zeros(c_out, dtype=np.float32)

    ch = cfg.channels
    conv("gen.stem.conv1", ch, 3)
    conv("gen.stem.conv2", ch, ch)
    for li, m_ch in enumerate(pyramid_channels, start=1):
        conv(f"gen.level{li}.merge", ch, ch + int(m_ch))
        for b in range(1, cfg.blocks + 1):
            conv(f"gen.level{li}.block{b}.conv1", ch, ch)
            conv(f"gen.level{li}.block{b}.conv2", ch, ch)
        if li < cfg.levels:
            conv(f"gen.level{li}.up", 4 * ch, ch)
    conv("gen.out", 3, ch)
    return WeightStore(tensors)
