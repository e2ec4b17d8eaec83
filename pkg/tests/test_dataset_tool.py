"""Tests for pair scoring, level assignment, and warped-reference synthesis."""

import numpy as np
import pytest

from nttsr.dataset_tool import (
    DEFAULT_LEVELS,
    PairRecord,
    SimilarityLevels,
    _draw_warp_params,
    assign_levels,
    gen_warped_ref,
    match_count,
    pair_directory,
    read_pairs,
    write_pairs,
)
from nttsr.errors import ConfigError, DegenerateWarpError, ShapeError
from nttsr.feature_extractor import random_extractor_weights, vgg19_config
from nttsr.image_core import bicubic_resample, save_image


@pytest.fixture(scope="module")
def weights():
    return random_extractor_weights(vgg19_config(through="relu3_1"), seed=11)


def smooth_image(rng, n=64):
    """Band-limited test image: noise pushed through a down/up resample."""
    coarse = rng.random((max(4, n // 8), max(4, n // 8), 3))
    img = bicubic_resample(coarse, n / coarse.shape[0])
    return np.clip(img[:n, :n], 0.0, 1.0)


def total_centers(n):
    # relu3_1 grid for an n-px square, 3x3 patches at stride 1.
    side = n // 4 - 2
    return side * side


def test_identical_images_match_everywhere(weights):
    rng = np.random.default_rng(0)
    img = smooth_image(rng)
    assert match_count(img, img, weights) == total_centers(64)


def test_noise_pair_matches_rarely(weights):
    for seed in range(3):
        rng = np.random.default_rng(seed)
        img = smooth_image(rng)
        noise = rng.random(img.shape)
        count = match_count(img, noise, weights)
        assert count <= 0.05 * total_centers(64)


def test_blurred_copy_outscores_noise(weights):
    rng = np.random.default_rng(7)
    img = smooth_image(rng)
    blurred = bicubic_resample(bicubic_resample(img, 0.5), 2.0)
    noise = rng.random(img.shape)
    assert match_count(img, blurred, weights) > match_count(img, noise, weights)


def test_count_is_symmetric(weights):
    rng = np.random.default_rng(3)
    a = smooth_image(rng)
    b = smooth_image(rng)
    assert match_count(a, b, weights) == match_count(b, a, weights)


def test_tau_out_of_range_rejected(weights):
    rng = np.random.default_rng(1)
    img = smooth_image(rng)
    with pytest.raises(ConfigError):
        match_count(img, img, weights, tau=1.5)


def test_default_levels_are_valid():
    assert DEFAULT_LEVELS.cutoffs == (866, 361, 87, 0)
    assert DEFAULT_LEVELS.label(1444) == "L1"
    assert DEFAULT_LEVELS.label(0) == "L4"


def test_level_boundaries_use_at_least_semantics():
    levels = SimilarityLevels((90, 40, 10, 0))
    assert levels.label(90) == "L1"
    assert levels.label(89) == "L2"
    assert levels.label(40) == "L2"
    assert levels.label(39) == "L3"
    assert levels.label(10) == "L3"
    assert levels.label(9) == "L4"


def test_bad_cutoffs_rejected():
    with pytest.raises(ConfigError):
        SimilarityLevels((10, 10, 5, 0))
    with pytest.raises(ConfigError):
        SimilarityLevels((40, 30, 20, 1))
    with pytest.raises(ConfigError):
        DEFAULT_LEVELS.label(-1)


def test_assign_levels_idempotent():
    recs = [
        PairRecord("a.png", "b.png", 95, "", (0, 0), (0, 0), 48),
        PairRecord("a.png", "c.png", 12, "", (0, 0), (0, 0), 48),
    ]
    levels = SimilarityLevels((90, 40, 10, 0))
    once = assign_levels(recs, levels)
    assert [r.level for r in once] == ["L1", "L3"]
    assert assign_levels(once, levels) == once


def test_pair_records_round_trip(tmp_path):
    recs = [
        PairRecord("x.png", "y.png", 17, "L3", (4, 9), (0, 2), 160),
        PairRecord("x.png", "z.png", 0, "L4", (4, 9), (5, 5), 160),
    ]
    path = str(tmp_path / "pairs.jsonl")
    write_pairs(recs, path)
    assert read_pairs(path) == recs


def test_pair_directory_scores_all_pairs(tmp_path, weights):
    rng = np.random.default_rng(5)
    base = smooth_image(rng)
    save_image(base, str(tmp_path / "a.png"))
    save_image(np.clip(base + 0.01, 0.0, 1.0), str(tmp_path / "b.png"))
    save_image(rng.random(base.shape), str(tmp_path / "c.png"))
    levels = SimilarityLevels((70, 30, 5, 0))
    recs = pair_directory(str(tmp_path), weights, levels=levels,
                          seed=2, crop_size=48)
    assert [(r.source, r.reference) for r in recs] == [
        ("a.png", "b.png"), ("a.png", "c.png"), ("b.png", "c.png")]
    by_pair = {(r.source, r.reference): r for r in recs}
    assert by_pair[("a.png", "b.png")].count > by_pair[("a.png", "c.png")].count
    for rec in recs:
        assert rec.level == levels.label(rec.count)
        assert rec.crop_size == 48
    again = pair_directory(str(tmp_path), weights, levels=levels,
                           seed=2, crop_size=48)
    assert again == recs


def test_pair_directory_rejects_small_image(tmp_path, weights):
    rng = np.random.default_rng(9)
    save_image(smooth_image(rng), str(tmp_path / "ok.png"))
    save_image(rng.random((20, 20, 3)), str(tmp_path / "tiny.png"))
    with pytest.raises(ShapeError, match="tiny.png"):
        pair_directory(str(tmp_path), weights, crop_size=48)


def test_pair_directory_needs_two_images(tmp_path, weights):
    rng = np.random.default_rng(9)
    save_image(smooth_image(rng), str(tmp_path / "only.png"))
    with pytest.raises(ConfigError):
        pair_directory(str(tmp_path), weights, crop_size=48)


def test_warp_param_ranges():
    h, w = 200, 320
    saw_neg_x = saw_pos_x = saw_neg_y = saw_pos_y = False
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        tx, ty, theta, scale, sx, sy = _draw_warp_params(rng, h, w)
        assert w / 4.0 <= tx <= w / 2.0
        assert h / 4.0 <= ty <= h / 2.0
        assert 10.0 <= theta <= 30.0
        assert 1.2 <= scale <= 2.0
        assert sx in (-1.0, 1.0) and sy in (-1.0, 1.0)
        saw_neg_x |= sx < 0
        saw_pos_x |= sx > 0
        saw_neg_y |= sy < 0
        saw_pos_y |= sy > 0
    assert saw_neg_x and saw_pos_x and saw_neg_y and saw_pos_y


def test_zero_motion_is_identity():
    rng = np.random.default_rng(4)
    img = rng.random((160, 192, 3))
    out = gen_warped_ref(img, seed=0, zero_motion=True)
    assert np.array_equal(out, img)


def test_warp_is_deterministic_and_shape_preserving():
    rng = np.random.default_rng(6)
    img = np.clip(bicubic_resample(rng.random((24, 20, 3)), 8.0), 0.0, 1.0)
    a = gen_warped_ref(img, seed=42)
    b = gen_warped_ref(img, seed=42)
    assert np.array_equal(a, b)
    assert a.shape == img.shape
    assert not np.allclose(a, img, atol=1e-3)
    c = gen_warped_ref(img, seed=43)
    assert not np.array_equal(a, c)


def test_warp_of_constant_image_is_constant():
    img = np.full((160, 160, 3), 0.37)
    out = gen_warped_ref(img, seed=1)
    assert np.allclose(out, 0.37, atol=1e-12)


def test_warp_rejects_small_source():
    with pytest.raises(ShapeError):
        gen_warped_ref(np.zeros((80, 200, 3)), seed=0)


def test_extreme_aspect_ratio_exhausts_draws():
    # A 1600x160 strip cannot inscribe a full-width crop at any drawn
    # rotation and scale, so every candidate is rejected.
    img = np.zeros((160, 1600, 3))
    with pytest.raises(DegenerateWarpError):
        gen_warped_ref(img, seed=0)
