"""Dense patch matching in feature space and swapped-map assembly.

The pipeline at a glance: up-sample the LR input and degrade each
reference (down/up by the same factor) so both live in the same
frequency band; extract feature pyramids; densely compare every LR
patch against every reference patch at the match layer using inner
products against unit-normalized reference patches (only the reference
side is normalized, so a patch's score scales with the LR patch's own
energy); keep the best index per LR position with ties going to the
smallest index; project that correspondence to the finer layers by
scaling centers and patch sizes; then rebuild each layer from the RAW
(non-degraded) reference features at the matched indices, averaging
overlaps. Best scores ride along as per-layer weight maps, broadcast
over each patch footprint with per-cell maximum.

Matching cost is exact O(N_lr x N_ref) by construction: one GEMM
between the LR patch matrix and the normalized reference patch matrix.
Reference patches whose feature norm is below 1e-12 are flagged
degenerate and score -inf everywhere, so they are never selected.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import nttw
from .errors import (
    AllPatchesDegenerateError,
    ConfigError,
    ReferenceTooSmallError,
    ShapeError,
)
from .feature_extractor import FeatureMap, WeightStore, extract_pyramid, vgg19_config
from .image_core import bicubic_resample, check_image, degrade_ref, rotate_crop

__all__ = [
    "PatchGrid",
    "CorrespondenceMap",
    "SwappedPyramid",
    "SwapConfig",
    "sample_patches",
    "concat_grids",
    "correlation_maps",
    "best_match",
    "match_patches",
    "project_correspondence",
    "assemble_swap_map",
    "broadcast_scores",
    "augment_references",
    "swap_pipeline",
    "save_pyramid",
    "load_pyramid",
    "DEGENERATE_NORM",
]

# reference patches with feature norm below this are excluded via -inf
DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class PatchGrid:
    """Ordered patch collection over one or more source feature maps.

    Kernels are verbatim crops of the source data, materialized lazily:
    entry i is sources[source_index[i]][:, ay:ay+size, ax:ax+size] with
    (ay, ax) = anchors[i]. For a grid sampled from a single map the
    order is row-major over valid anchors and grid_shape records the
    (rows, cols) layout; concatenated grids have grid_shape None.
    """

    sources: Tuple[np.ndarray, ...]  # each (C, H, W)
    source_index: np.ndarray  # (N,) int
    anchors: np.ndarray  # (N, 2) int, top-left (y, x) per patch
    size: int
    stride: int
    layer: str
    origin_stride: int  # feature stride of the source maps
    grid_shape: Optional[Tuple[int, int]] = None

    @property
    def count(self) -> int:
        return len(self.anchors)

    @property
    def channels(self) -> int:
        return self.sources[0].shape[0]

    def kernel(self, i: int) -> np.ndarray:
        si = self.source_index[i]
        ay, ax = self.anchors[i]
        return self.sources[si][:, ay : ay + self.size, ax : ax + self.size]

    def kernels(self) -> np.ndarray:
        """All patches materialized as one (N, C, size, size) array."""
        return np.stack([self.kernel(i) for i in range(self.count)])

    def centers(self) -> np.ndarray:
        """(N, 2) patch centers (y, x) = anchor + size//2 in source cells."""
        return self.anchors + self.size // 2

    def matrix(self) -> np.ndarray:
        """Patches flattened to (N, C*size*size) float64 rows for matching."""
        n = self.count
        out = np.empty((n, self.channels * self.size * self.size), dtype=np.float64)
        for i in range(n):
            out[i] = self.kernel(i).reshape(-1)
        return out


def sample_patches(
    fm: FeatureMap,
    size: int,
    stride: int,
    limit: Optional[Tuple[int, int]] = None,
) -> PatchGrid:
    """Enumerate all fully-interior size x size patches, row-major.

    Count per axis is floor((dim - size) / stride) + 1. `limit` crops
    the grid to at most (rows, cols), used to keep grids sampled from
    different pyramid levels index-aligned when pooling floors disagree.
    """
    data = fm.data
    c, h, w = data.shape
    if size < 1 or stride < 1:
        raise ConfigError(f"patch size and stride must be >= 1, got {size}, {stride}")
    if size > h or size > w:
        raise ReferenceTooSmallError(
            f"{fm.layer or 'feature map'} is {h}x{w}, smaller than one {size}x{size} patch"
        )
    rows = (h - size) // stride + 1
    cols = (w - size) // stride + 1
    if limit is not None:
        rows = min(rows, limit[0])
        cols = min(cols, limit[1])
    ys, xs = np.mgrid[0:rows, 0:cols]
    anchors = np.stack([ys.ravel() * stride, xs.ravel() * stride], axis=1)
    return PatchGrid(
        sources=(data,),
        source_index=np.zeros(rows * cols, dtype=np.int64),
        anchors=anchors,
        size=size,
        stride=stride,
        layer=fm.layer,
        origin_stride=fm.stride,
        grid_shape=(rows, cols),
    )


def concat_grids(grids: Sequence[PatchGrid]) -> PatchGrid:
    """Join grids into one index space (entries of grid 0, then 1, ...)."""
    if not grids:
        raise ConfigError("cannot concatenate an empty grid list")
    first = grids[0]
    for g in grids[1:]:
        if g.size != first.size or g.channels != first.channels:
            raise ShapeError("grids disagree on patch size or channels")
    sources: List[np.ndarray] = []
    source_index = []
    anchors = []
    for g in grids:
        base = len(sources)
        sources.extend(g.sources)
        source_index.append(g.source_index + base)
        anchors.append(g.anchors)
    return PatchGrid(
        sources=tuple(sources),
        source_index=np.concatenate(source_index),
        anchors=np.concatenate(anchors),
        size=first.size,
        stride=first.stride,
        layer=first.layer,
        origin_stride=first.origin_stride,
        grid_shape=None,
    )


@dataclass(frozen=True)
class CorrespondenceMap:
    """Per LR-patch-center best reference index and score.

    Grid cell (i, j) covers source cells starting at (i*step, j*step)
    with the current patch_size; its center is anchor + center_offset.
    Projection to a finer level scales step, patch_size, and
    center_offset together so centers scale exactly.
    """

    best_index: np.ndarray  # (gh, gw) int64
    best_score: np.ndarray  # (gh, gw) float64
    patch_size: int
    step: int
    center_offset: int
    stride: int = 1  # feature stride of the level this map addresses
    layer: str = ""

    @property
    def grid_shape(self) -> Tuple[int, int]:
        return self.best_index.shape


def correlation_maps(lr_fm: FeatureMap, ref_patches: PatchGrid, lr_stride: int = 1) -> np.ndarray:
    """Score volume S of shape (N_ref, gh, gw) over LR patch centers.

    S[j, y, x] is the inner product of the LR patch at grid cell (y, x)
    with reference patch j scaled to unit norm. The LR side is left
    unnormalized on purpose: scores grow with LR patch energy, and only
    the relative ordering per center feeds the argmax. Degenerate
    (near-zero-norm) reference patches get -inf rows.
    """
    if lr_fm.channels != ref_patches.channels:
        raise ShapeError(
            f"LR map has {lr_fm.channels} channels, reference patches {ref_patches.channels}"
        )
    lr_grid = sample_patches(lr_fm, ref_patches.size, lr_stride)
    lr_mat = lr_grid.matrix()  # (N_lr, D)
    ref_mat = ref_patches.matrix()  # (N_ref, D)
    norms = np.linalg.norm(ref_mat, axis=1)
    degenerate = norms < DEGENERATE_NORM
    safe = np.where(degenerate, 1.0, norms)
    scores = lr_mat @ (ref_mat / safe[:, None]).T  # (N_lr, N_ref)
    scores[:, degenerate] = -np.inf
    gh, gw = lr_grid.grid_shape
    return np.ascontiguousarray(scores.T.reshape(ref_patches.count, gh, gw))


def best_match(
    scores: np.ndarray,
    patch_size: int = 3,
    step: int = 1,
    stride: int = 1,
    layer: str = "",
) -> CorrespondenceMap:
    """Argmax over the reference axis, ties to the smallest index.

    Raises if any center has nothing but -inf sentinels left (every
    reference patch degenerate).
    """
    if scores.ndim != 3:
        raise ShapeError(f"score volume must be (N, gh, gw), got shape {scores.shape!r}")
    flat = scores.reshape(scores.shape[0], -1)
    idx = np.argmax(flat, axis=0)  # first occurrence wins exact ties
    best = flat[idx, np.arange(flat.shape[1])]
    if np.isneginf(best).any():
        raise AllPatchesDegenerateError(
            "every reference patch is degenerate at some LR position"
        )
    gh, gw = scores.shape[1], scores.shape[2]
    return CorrespondenceMap(
        best_index=idx.reshape(gh, gw),
        best_score=best.reshape(gh, gw),
        patch_size=patch_size,
        step=step,
        center_offset=patch_size // 2,
        stride=stride,
        layer=layer,
    )


def match_patches(
    lr_fm: FeatureMap, ref_patches: PatchGrid, lr_stride: int = 1
) -> CorrespondenceMap:
    """The match stage: correlation volume followed by per-center argmax."""
    scores = correlation_maps(lr_fm, ref_patches, lr_stride)
    return best_match(
        scores,
        patch_size=ref_patches.size,
        step=lr_stride,
        stride=lr_fm.stride,
        layer=lr_fm.layer,
    )


def project_correspondence(
    corr: CorrespondenceMap, from_stride: int, to_stride: int, patch_size_at_target: int
) -> CorrespondenceMap:
    """Carry a correspondence to a finer pyramid level.

    Centers, steps, and patch sizes all scale by from_stride/to_stride;
    scores and indices are reused unchanged.
    """
    if from_stride % to_stride != 0:
        raise ConfigError(f"stride {from_stride} not divisible by target stride {to_stride}")
    factor = from_stride // to_stride
    if patch_size_at_target != corr.patch_size * factor:
        raise ShapeError(
            f"target patch size {patch_size_at_target} inconsistent with "
            f"{corr.patch_size} x factor {factor}"
        )
    if factor == 1:
        return replace(corr, stride=to_stride)
    return CorrespondenceMap(
        best_index=corr.best_index,
        best_score=corr.best_score,
        patch_size=corr.patch_size * factor,
        step=corr.step * factor,
        center_offset=corr.center_offset * factor,
        stride=to_stride,
        layer=corr.layer,
    )


def assemble_swap_map(
    corr: CorrespondenceMap, ref_hr_patches: PatchGrid, target_shape
) -> Tuple[FeatureMap, np.ndarray]:
    """Paste the matched raw-reference patches and average overlaps.

    Every grid cell writes its matched patch at the cell's anchor;
    contributions accumulate and divide by per-cell coverage. Cells no
    patch reaches (borders under step > 1) stay zero and are reported
    through the returned coverage counts.
    """
    if isinstance(target_shape, FeatureMap):
        target_shape = target_shape.data.shape
    c, h, w = target_shape
    if ref_hr_patches.size != corr.patch_size:
        raise ShapeError(
            f"reference patches are {ref_hr_patches.size} wide, correspondence "
            f"expects {corr.patch_size}"
        )
    if ref_hr_patches.channels != c:
        raise ShapeError(
            f"reference patches have {ref_hr_patches.channels} channels, target has {c}"
        )
    gh, gw = corr.grid_shape
    s, step = corr.patch_size, corr.step
    if (gh - 1) * step + s > h or (gw - 1) * step + s > w:
        raise ShapeError(
            f"correspondence grid {gh}x{gw} (size {s}, step {step}) overruns {h}x{w} target"
        )
    if corr.best_index.max() >= ref_hr_patches.count:
        raise ShapeError("correspondence indexes past the reference patch pool")
    accum = np.zeros((c, h, w), dtype=np.float64)
    coverage = np.zeros((h, w), dtype=np.int64)
    for gy in range(gh):
        ay = gy * step
        for gx in range(gw):
            ax = gx * step
            accum[:, ay : ay + s, ax : ax + s] += ref_hr_patches.kernel(
                int(corr.best_index[gy, gx])
            )
            coverage[ay : ay + s, ax : ax + s] += 1
    covered = coverage > 0
    accum[:, covered] /= coverage[covered]
    fmap = FeatureMap(accum, corr.layer, ref_hr_patches.origin_stride)
    return fmap, coverage


def broadcast_scores(corr: CorrespondenceMap, target_hw: Tuple[int, int]) -> np.ndarray:
    """Best scores rasterized to feature resolution.

    Each grid cell stamps its score over its patch footprint; where
    footprints overlap the per-cell maximum wins (a cell's weight is the
    best score any patch covering it achieved). Uncovered cells are 0.
    """
    h, w = target_hw
    out = np.zeros((h, w), dtype=np.float64)
    gh, gw = corr.grid_shape
    s, step = corr.patch_size, corr.step
    for gy in range(gh):
        ay = gy * step
        for gx in range(gw):
            ax = gx * step
            region = out[ay : ay + s, ax : ax + s]
            np.maximum(region, corr.best_score[gy, gx], out=region)
    return out


def augment_references(
    refs: Sequence[np.ndarray],
    scales: Sequence[float] = (1.0,),
    rotations: Sequence[float] = (0.0,),
) -> List[np.ndarray]:
    """Scaled and rotated variants of each reference, reference-major.

    All (scale, rotation) combinations are emitted in the given order;
    if no combination is the identity (scale 1, rotation 0 mod 360) the
    untouched original is prepended so it is always searchable.
    """
    if not refs:
        raise ConfigError("reference list is empty")
    if any(s <= 0 for s in scales):
        raise ConfigError(f"scales must be positive, got {list(scales)}")
    out: List[np.ndarray] = []
    has_identity = any(s == 1.0 and r % 360.0 == 0.0 for s in scales for r in rotations)
    for ref in refs:
        check_image(ref)
        if not has_identity:
            out.append(ref.copy())
        for s in scales:
            scaled = bicubic_resample(ref, s)
            for r in rotations:
                out.append(scaled.copy() if r % 360.0 == 0.0 and s == 1.0 else rotate_crop(scaled, r))
    return out


@dataclass(frozen=True)
class SwapConfig:
    """Knobs for the swap stage; JSON round-trippable.

    match_layer is where matching happens; layers are the levels the
    swapped maps are assembled for. patch_size/stride apply at the
    match layer and scale with the projection factor elsewhere.
    """

    match_layer: str = "relu3_1"
    layers: Tuple[str, ...] = ("relu1_1", "relu2_1", "relu3_1")
    patch_size: int = 3
    stride: int = 1
    scales: Tuple[float, ...] = (1.0,)
    rotations: Tuple[float, ...] = (0.0,)
    upscale_factor: int = 4

    def __post_init__(self):
        if self.patch_size < 1 or self.stride < 1:
            raise ConfigError("patch_size and stride must be >= 1")
        if self.upscale_factor < 2:
            raise ConfigError("upscale_factor must be >= 2")
        if not self.layers:
            raise ConfigError("at least one target layer required")

    def to_json(self) -> str:
        return json.dumps(
            {
                "match_layer": self.match_layer,
                "layers": list(self.layers),
                "patch_size": self.patch_size,
                "stride": self.stride,
                "scales": list(self.scales),
                "rotations": list(self.rotations),
                "upscale_factor": self.upscale_factor,
            },
            indent=2,
        )

    @staticmethod
    def from_json(text: str) -> "SwapConfig":
        try:
            doc = json.loads(text)
            return SwapConfig(
                match_layer=doc.get("match_layer", "relu3_1"),
                layers=tuple(doc.get("layers", ("relu1_1", "relu2_1", "relu3_1"))),
                patch_size=int(doc.get("patch_size", 3)),
                stride=int(doc.get("stride", 1)),
                scales=tuple(float(s) for s in doc.get("scales", (1.0,))),
                rotations=tuple(float(r) for r in doc.get("rotations", (0.0,))),
                upscale_factor=int(doc.get("upscale_factor", 4)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad swap config document: {exc}") from exc


@dataclass
class SwappedPyramid:
    """Per-layer swapped maps M and weight maps S (plus coverage counts).

    Coverage is diagnostic only and is not serialized.
    """

    layer_order: Tuple[str, ...]
    maps: Dict[str, FeatureMap] = field(default_factory=dict)
    scores: Dict[str, np.ndarray] = field(default_factory=dict)
    coverage: Dict[str, np.ndarray] = field(default_factory=dict)


def save_pyramid(pyr: SwappedPyramid, path) -> None:
    """Serialize as tensors M.<layer> / S.<layer>, layer order preserved."""
    tensors: Dict[str, np.ndarray] = {}
    for layer in pyr.layer_order:
        tensors["M." + layer] = pyr.maps[layer].data.astype(np.float32)
        tensors["S." + layer] = pyr.scores[layer].astype(np.float32)
    nttw.write_tensors(path, tensors)


_LAYER_STRIDES = {"relu1_1": 1, "relu2_1": 2, "relu3_1": 4, "relu4_1": 8, "relu5_1": 16}


def load_pyramid(path) -> SwappedPyramid:
    """Read a pyramid container written by save_pyramid."""
    tensors = nttw.read_tensors(path)
    order = [name[2:] for name in tensors if name.startswith("M.")]
    pyr = SwappedPyramid(layer_order=tuple(order))
    for layer in order:
        if "S." + layer not in tensors:
            raise ShapeError(f"pyramid file lacks the weight map for {layer}")
        stride = _LAYER_STRIDES.get(layer, 1)
        pyr.maps[layer] = FeatureMap(
            tensors["M." + layer].astype(np.float64), layer, stride
        )
        pyr.scores[layer] = tensors["S." + layer].astype(np.float64)
    return pyr


def _variant_features(variant, weights, cfg, taps):
    """Degraded-variant match features plus raw-variant pyramid features."""
    degraded = degrade_ref(variant, cfg.upscale_factor)
    match_fm = extract_pyramid(degraded, weights, vgg19_config(cfg.match_layer), [cfg.match_layer])[0]
    raw_maps = extract_pyramid(variant, weights, vgg19_config(cfg.match_layer), taps)
    return match_fm, raw_maps


def swap_pipeline(
    lr: np.ndarray,
    refs: Sequence[np.ndarray],
    weights: WeightStore,
    cfg: Optional[SwapConfig] = None,
    threads: int = 1,
) -> SwappedPyramid:
    """Full swap stage: frequency-match, extract, match, project, assemble.

    The reference patch index space is the concatenation over every
    augmented variant of every reference, so one argmax ranges over all
    of them at once. Worker threads only parallelize per-variant feature
    extraction; variant order, and therefore every output, is identical
    at any thread count.
    """
    if cfg is None:
        cfg = SwapConfig()
    check_image(lr)
    if not refs:
        raise ConfigError("reference list is empty")
    match_stride = _LAYER_STRIDES.get(cfg.match_layer)
    if match_stride is None:
        raise ConfigError(f"unsupported match layer {cfg.match_layer!r}")
    for layer in cfg.layers:
        if layer not in _LAYER_STRIDES:
            raise ConfigError(f"unsupported target layer {layer!r}")
        if match_stride % _LAYER_STRIDES[layer] != 0:
            raise ConfigError(f"cannot project {cfg.match_layer} onto {layer}")

    lr_up = bicubic_resample(lr, float(cfg.upscale_factor))
    taps = list(cfg.layers)
    lr_maps = {
        fm.layer: fm
        for fm in extract_pyramid(lr_up, weights, vgg19_config(cfg.match_layer), taps)
    }
    lr_match_fm = (
        lr_maps[cfg.match_layer]
        if cfg.match_layer in lr_maps
        else extract_pyramid(lr_up, weights, vgg19_config(cfg.match_layer), [cfg.match_layer])[0]
    )

    variants = augment_references(refs, cfg.scales, cfg.rotations)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_variant = list(
                pool.map(lambda v: _variant_features(v, weights, cfg, taps), variants)
            )
    else:
        per_variant = [_variant_features(v, weights, cfg, taps) for v in variants]

    # match-layer grids over the degraded variants, one shared index space
    match_grids = [
        sample_patches(match_fm, cfg.patch_size, cfg.stride)
        for match_fm, _ in per_variant
    ]
    corr = match_patches(lr_match_fm, concat_grids(match_grids), lr_stride=cfg.stride)

    pyr = SwappedPyramid(layer_order=tuple(cfg.layers))
    for layer in cfg.layers:
        factor = match_stride // _LAYER_STRIDES[layer]
        corr_l = project_correspondence(
            corr, match_stride, _LAYER_STRIDES[layer], cfg.patch_size * factor
        )
        fine_grids = []
        for (match_fm, raw_maps), mgrid in zip(per_variant, match_grids):
            raw_fm = next(m for m in raw_maps if m.layer == layer)
            fine_grids.append(
                sample_patches(
                    raw_fm,
                    cfg.patch_size * factor,
                    cfg.stride * factor,
                    limit=mgrid.grid_shape,
                )
            )
        pool_grid = concat_grids(fine_grids)
        target = lr_maps[layer].data.shape
        corr_l = replace(corr_l, layer=layer)
        m_map, coverage = assemble_swap_map(corr_l, pool_grid, target)
        pyr.maps[layer] = m_map
        pyr.scores[layer] = broadcast_scores(corr_l, (target[1], target[2]))
        pyr.coverage[layer] = coverage
    return pyr
