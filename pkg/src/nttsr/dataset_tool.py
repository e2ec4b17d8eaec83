"""Pair selection and reference synthesis for building evaluation sets.

Two images make a useful input/reference pair when they share textures
without being duplicates.  This module scores a pair by counting mutual
best matches between their mid-level feature patches, buckets the count
into similarity levels, and can synthesize a warped reference from a
ground-truth image so that matching quality can be probed under a known
geometric perturbation.
"""

import dataclasses
import json
import math
import os
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DegenerateWarpError, ShapeError
from .feature_extractor import WeightStore, extract_pyramid, vgg19_config
from .feature_swap import DEGENERATE_NORM, sample_patches
from .image_core import _max_interior_rect, bilinear_sample, check_image, load_image

MATCH_LAYER = "relu3_1"
MATCH_PATCH = 3
DEFAULT_TAU = 0.9

# Side of the square crop scored by pair_directory.  A 160px crop maps to
# a 40x40 grid at the match layer, i.e. 38*38 = 1444 patch centers.
DEFAULT_CROP = 160

MIN_WARP_SIZE = 160
_MAX_WARP_DRAWS = 64


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    """Scale each row to unit length; flat rows are zeroed, not inflated."""
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    safe = np.where(norms < DEGENERATE_NORM, 1.0, norms)
    out = mat / safe
    out[norms[:, 0] < DEGENERATE_NORM] = 0.0
    return out


def _patch_matrix(img: np.ndarray, weights: WeightStore) -> np.ndarray:
    """Unit-normalized match-layer patch rows for one image."""
    config = vgg19_config(through=MATCH_LAYER)
    fm = extract_pyramid(img, weights, config=config, taps=(MATCH_LAYER,))[0]
    grid = sample_patches(fm, MATCH_PATCH, 1)
    return _unit_rows(grid.matrix())


def _mutual_count(a_rows: np.ndarray, b_rows: np.ndarray, tau: float) -> int:
    cos = a_rows @ b_rows.T
    a_best = np.argmax(cos, axis=1)
    b_best = np.argmax(cos, axis=0)
    idx = np.arange(a_rows.shape[0])
    mutual = b_best[a_best] == idx
    strong = cos[idx, a_best] >= tau
    return int(np.count_nonzero(mutual & strong))


def match_count(a: np.ndarray, b: np.ndarray, weights: WeightStore,
                tau: float = DEFAULT_TAU) -> int:
    """Count patch centers of `a` whose best match in `b` points back.

    A center contributes when the two patches pick each other as nearest
    neighbors under cosine similarity and their similarity clears `tau`.
    Symmetric in its image arguments by construction.
    """
    if not 0.0 <= tau <= 1.0:
        raise ConfigError("tau must lie in [0, 1], got %r" % (tau,))
    return _mutual_count(_patch_matrix(a, weights), _patch_matrix(b, weights), tau)


@dataclasses.dataclass(frozen=True)
class SimilarityLevels:
    """Descending match-count cutoffs mapping counts to labels L1..L4.

    A count lands in the first level whose cutoff it meets, so cutoffs
    must be strictly decreasing and the last one must be 0 to make the
    levels exhaustive.
    """

    cutoffs: Tuple[int, int, int, int] = (866, 361, 87, 0)

    def __post_init__(self):
        cuts = tuple(int(c) for c in self.cutoffs)
        if len(cuts) != 4:
            raise ConfigError("expected 4 cutoffs, got %d" % len(cuts))
        if any(b >= a for a, b in zip(cuts, cuts[1:])):
            raise ConfigError("cutoffs must be strictly decreasing: %r" % (cuts,))
        if cuts[-1] != 0:
            raise ConfigError("last cutoff must be 0 so every count gets a level")
        object.__setattr__(self, "cutoffs", cuts)

    def label(self, count: int) -> str:
        if count < 0:
            raise ConfigError("match counts are nonnegative, got %d" % count)
        for i, cut in enumerate(self.cutoffs):
            if count >= cut:
                return "L%d" % (i + 1)
        raise AssertionError("unreachable: last cutoff is 0")


DEFAULT_LEVELS = SimilarityLevels()


@dataclasses.dataclass(frozen=True)
class PairRecord:
    """One scored input/reference pairing, serializable as a JSON line."""

    source: str
    reference: str
    count: int
    level: str
    source_crop: Tuple[int, int]
    reference_crop: Tuple[int, int]
    crop_size: int

    def to_json_line(self) -> str:
        body = dataclasses.asdict(self)
        body["source_crop"] = list(self.source_crop)
        body["reference_crop"] = list(self.reference_crop)
        return json.dumps(body, sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "PairRecord":
        body = json.loads(line)
        return cls(
            source=body["source"],
            reference=body["reference"],
            count=int(body["count"]),
            level=str(body["level"]),
            source_crop=tuple(int(v) for v in body["source_crop"]),
            reference_crop=tuple(int(v) for v in body["reference_crop"]),
            crop_size=int(body["crop_size"]),
        )


def assign_levels(records: Sequence[PairRecord],
                  levels: Optional[SimilarityLevels] = None) -> List[PairRecord]:
    """Relabel records from their counts; idempotent, order-preserving."""
    levels = levels or DEFAULT_LEVELS
    return [dataclasses.replace(r, level=levels.label(r.count)) for r in records]


def write_pairs(records: Sequence[PairRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json_line() + "\n")


def read_pairs(path: str) -> List[PairRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(PairRecord.from_json_line(line))
    return records


_IMAGE_EXTS = (".png", ".ppm")


def pair_directory(dir_path: str, weights: WeightStore,
                   levels: Optional[SimilarityLevels] = None,
                   tau: float = DEFAULT_TAU, seed: int = 0,
                   crop_size: int = DEFAULT_CROP) -> List[PairRecord]:
    """Score every unordered image pair in a directory.

    Each image gets one seeded square crop, features are extracted once
    per image, and all pairs are counted from the cached patch rows.
    """
    levels = levels or DEFAULT_LEVELS
    names = sorted(n for n in os.listdir(dir_path)
                   if n.lower().endswith(_IMAGE_EXTS))
    if len(names) < 2:
        raise ConfigError("need at least 2 images in %s, found %d"
                          % (dir_path, len(names)))
    rng = np.random.default_rng(seed)
    crops = {}
    rows = {}
    for name in names:
        img = load_image(os.path.join(dir_path, name))
        h, w = img.shape[:2]
        if h < crop_size or w < crop_size:
            raise ShapeError("%s is %dx%d, below the %dpx crop"
                             % (name, w, h, crop_size))
        y = int(rng.integers(0, h - crop_size + 1))
        x = int(rng.integers(0, w - crop_size + 1))
        crops[name] = (y, x)
        rows[name] = _patch_matrix(img[y:y + crop_size, x:x + crop_size], weights)
    records = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            count = _mutual_count(rows[a], rows[b], tau)
            records.append(PairRecord(
                source=a, reference=b, count=count, level=levels.label(count),
                source_crop=crops[a], reference_crop=crops[b],
                crop_size=crop_size))
    return records


def _draw_warp_params(rng: np.random.Generator, height: int, width: int):
    """One candidate warp: translation, rotation (degrees), scale, signs."""
    tx = float(rng.uniform(width / 4.0, width / 2.0))
    ty = float(rng.uniform(height / 4.0, height / 2.0))
    theta = float(rng.uniform(10.0, 30.0))
    scale = float(rng.uniform(1.2, 2.0))
    sign_x = 1.0 if rng.random() < 0.5 else -1.0
    sign_y = 1.0 if rng.random() < 0.5 else -1.0
    return tx, ty, theta, scale, sign_x, sign_y


def _warp_window(height: int, width: int, theta_deg: float, scale: float):
    """Half-ranges the crop center may move while staying inside the
    scaled-and-rotated source; negative when the crop does not fit."""
    rad = math.radians(theta_deg)
    wr, hr = _max_interior_rect(width - 1, height - 1, rad)
    return (scale * wr - (width - 1)) / 2.0, (scale * hr - (height - 1)) / 2.0


def _render_warp(img: np.ndarray, tx, ty, theta_deg, scale, sign_x, sign_y,
                 slack_x: float, slack_y: float) -> np.ndarray:
    h, w = img.shape[:2]
    rad = math.radians(theta_deg)
    cos_t, sin_t = math.cos(rad), math.sin(rad)
    # Forward-map the drawn source-space offset, then clamp the resulting
    # crop-center displacement into the valid interior window.
    dx = scale * (cos_t * sign_x * tx + sin_t * sign_y * ty)
    dy = scale * (-sin_t * sign_x * tx + cos_t * sign_y * ty)
    dx = float(np.clip(dx, -slack_x, slack_x))
    dy = float(np.clip(dy, -slack_y, slack_y))
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    rel_x = xx - cx + dx
    rel_y = yy - cy + dy
    src_x = (cos_t * rel_x - sin_t * rel_y) / scale + cx
    src_y = (sin_t * rel_x + cos_t * rel_y) / scale + cy
    return bilinear_sample(img, src_y, src_x)


def gen_warped_ref(hr: np.ndarray, seed: int, zero_motion: bool = False) -> np.ndarray:
    """Synthesize a same-size reference by scale/rotate/translate resampling.

    Parameters are drawn from fixed ranges until the transformed source
    covers a full output crop; the translation is clamped into the valid
    window so no out-of-bounds pixels are invented.  With `zero_motion`
    the transform is the identity and the input comes back exactly.
    """
    check_image(hr)
    h, w = hr.shape[:2]
    if h < MIN_WARP_SIZE or w < MIN_WARP_SIZE:
        raise ShapeError("warp source must be at least %dx%d, got %dx%d"
                         % (MIN_WARP_SIZE, MIN_WARP_SIZE, w, h))
    if zero_motion:
        return _render_warp(hr, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0)
    rng = np.random.default_rng(seed)
    for _ in range(_MAX_WARP_DRAWS):
        tx, ty, theta, scale, sign_x, sign_y = _draw_warp_params(rng, h, w)
        slack_x, slack_y = _warp_window(h, w, theta, scale)
        if slack_x >= 0.0 and slack_y >= 0.0:
            return _render_warp(hr, tx, ty, theta, scale, sign_x, sign_y,
                                slack_x, slack_y)
    raise DegenerateWarpError(
        "no feasible warp for a %dx%d image after %d draws"
        % (w, h, _MAX_WARP_DRAWS))
