"""Objective and metric tests.

Oracles used here:
  * rec/gram/texture: explicit python loops over every element
  * perceptual: the formula applied directly to separately extracted maps
  * psnr: the closed form 20 log10(255) for a 1/255 constant offset
  * ssim: an independent per-window loop implementation with its own
    Gaussian weights
"""

import numpy as np
import pytest

import nttsr.errors as errors
from nttsr.feature_extractor import (
    FeatureMap,
    NetworkConfig,
    WeightStore,
    extract_pyramid,
    random_extractor_weights,
)
from nttsr.feature_swap import SwappedPyramid
from nttsr.losses import (
    LossWeights,
    TextureLossConfig,
    gram_matrix,
    perceptual_loss,
    psnr,
    rec_loss,
    ssim,
    texture_loss,
    total_objective,
)


def tiny_vgg(depth_tap="relu2_1"):
    return NetworkConfig(
        (
            {"type": "conv", "name": "conv1_1", "channels": 4},
            {"type": "rectify", "tap": "relu1_1"},
            {"type": "maxpool"},
            {"type": "conv", "name": "conv2_1", "channels": 6},
            {"type": "rectify", "tap": "relu2_1"},
        )
    )


def make_pyramid(layer_specs, rng, score=None):
    """layer_specs: {layer: (C, H, W, stride)}; scores constant 1 unless given."""
    pyr = SwappedPyramid(layer_order=tuple(layer_specs))
    for layer, (c, h, w, stride) in layer_specs.items():
        pyr.maps[layer] = FeatureMap(rng.normal(size=(c, h, w)), layer, stride)
        pyr.scores[layer] = np.full((h, w), 1.0) if score is None else score(h, w)
    return pyr


# ---------------------------------------------------------------- rec


def test_rec_identical_zero():
    img = np.random.default_rng(1).random((5, 5, 3))
    assert rec_loss(img, img) == 0.0


def test_rec_constant_offset():
    base = np.full((6, 4, 3), 0.3)
    assert abs(rec_loss(base, base + 0.1) - 0.1) < 1e-12


def test_rec_matches_loop_oracle():
    rng = np.random.default_rng(2)
    a, b = rng.random((4, 5, 3)), rng.random((4, 5, 3))
    want = sum(
        abs(a[i, j, k] - b[i, j, k])
        for i in range(4)
        for j in range(5)
        for k in range(3)
    ) / (4 * 5 * 3)
    assert abs(rec_loss(a, b) - want) <= 1e-7


def test_rec_shape_mismatch():
    with pytest.raises(errors.ShapeError):
        rec_loss(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


# ---------------------------------------------------------------- perceptual


def test_perceptual_identical_zero():
    cfg = tiny_vgg()
    weights = random_extractor_weights(cfg, seed=3)
    img = np.random.default_rng(3).random((8, 8, 3))
    assert perceptual_loss(img, img, weights, cfg, layer="relu2_1") == 0.0


def test_perceptual_zero_weights_zero():
    cfg = tiny_vgg()
    tensors = {"preprocess.mean": np.zeros(3, np.float32)}
    c_in = 3
    for spec in cfg.layers:
        if spec["type"] == "conv":
            tensors[spec["name"] + ".kernel"] = np.zeros((spec["channels"], c_in, 3, 3), np.float32)
            tensors[spec["name"] + ".bias"] = np.zeros(spec["channels"], np.float32)
            c_in = spec["channels"]
    weights = WeightStore(tensors)
    rng = np.random.default_rng(4)
    a, b = rng.random((8, 8, 3)), rng.random((8, 8, 3))
    assert perceptual_loss(a, b, weights, cfg, layer="relu2_1") == 0.0


def test_perceptual_matches_direct_formula():
    cfg = tiny_vgg()
    weights = random_extractor_weights(cfg, seed=5)
    rng = np.random.default_rng(5)
    a, b = rng.random((10, 10, 3)), rng.random((10, 10, 3))
    got = perceptual_loss(a, b, weights, cfg, layer="relu2_1")
    fa = extract_pyramid(a, weights, cfg, ["relu2_1"])[0].data
    fb = extract_pyramid(b, weights, cfg, ["relu2_1"])[0].data
    want = 0.0
    for i in range(fb.shape[0]):
        want += np.sqrt(((fb[i] - fa[i]) ** 2).sum())
    want /= fb.size
    assert abs(got - want) <= 1e-5


# ---------------------------------------------------------------- gram


def test_gram_zero_channel_zero_row():
    rng = np.random.default_rng(6)
    data = rng.normal(size=(3, 4, 4))
    data[1] = 0.0
    g = gram_matrix(data)
    assert np.array_equal(g[1], np.zeros(3))
    assert np.array_equal(g[:, 1], np.zeros(3))


def test_gram_identical_channels():
    rng = np.random.default_rng(7)
    ch = rng.normal(size=(4, 5))
    g = gram_matrix(np.stack([ch, ch]))
    assert g.shape == (2, 2)
    assert np.allclose(g, g[0, 0])


def test_gram_matches_triple_loop():
    rng = np.random.default_rng(8)
    data = rng.normal(size=(3, 4, 4))
    g = gram_matrix(data)
    want = np.zeros((3, 3))
    for a in range(3):
        for b in range(3):
            for y in range(4):
                for x in range(4):
                    want[a, b] += data[a, y, x] * data[b, y, x]
    assert np.abs(g - want).max() <= 1e-6


def test_gram_symmetric_psd():
    rng = np.random.default_rng(9)
    for _ in range(10):
        g = gram_matrix(rng.normal(size=(5, 6, 7)))
        assert np.allclose(g, g.T)
        assert np.linalg.eigvalsh(g).min() >= -1e-8


# ---------------------------------------------------------------- texture


def layer_plan():
    return {"relu2_1": (4, 6, 6, 2), "relu1_1": (2, 12, 12, 1)}


def test_texture_zero_when_features_equal_maps():
    rng = np.random.default_rng(10)
    pyr = make_pyramid(layer_plan(), rng)
    feats = [
        FeatureMap(pyr.maps[layer].data.copy(), layer, pyr.maps[layer].stride)
        for layer in pyr.layer_order
    ]
    cfg = TextureLossConfig(layers=tuple(pyr.layer_order))
    assert texture_loss(feats, pyr, cfg) == 0.0


def test_texture_zero_when_scores_zero():
    rng = np.random.default_rng(11)
    pyr = make_pyramid(layer_plan(), rng, score=lambda h, w: np.zeros((h, w)))
    feats = [
        FeatureMap(rng.normal(size=pyr.maps[layer].data.shape), layer, 1)
        for layer in pyr.layer_order
    ]
    cfg = TextureLossConfig(layers=tuple(pyr.layer_order))
    assert texture_loss(feats, pyr, cfg) == 0.0


def naive_texture(feats, pyr, layers):
    total = 0.0
    for layer in layers:
        phi = feats[layer] * pyr.scores[layer]
        m = pyr.maps[layer].data * pyr.scores[layer]
        c, h, w = phi.shape
        g1 = np.zeros((c, c))
        g2 = np.zeros((c, c))
        for a in range(c):
            for b in range(c):
                g1[a, b] = (phi[a] * phi[b]).sum()
                g2[a, b] = (m[a] * m[b]).sum()
        lam = 1.0 / (4.0 * c * c * float(h * w) ** 2)
        total += lam * np.sqrt(((g1 - g2) ** 2).sum())
    return total


def test_texture_matches_explicit_loops():
    rng = np.random.default_rng(12)
    pyr = make_pyramid(layer_plan(), rng, score=lambda h, w: rng.random((h, w)))
    feats = {
        layer: rng.normal(size=pyr.maps[layer].data.shape) for layer in pyr.layer_order
    }
    fm_list = [FeatureMap(feats[layer], layer, 1) for layer in pyr.layer_order]
    cfg = TextureLossConfig(layers=tuple(pyr.layer_order))
    got = texture_loss(fm_list, pyr, cfg)
    want = naive_texture(feats, pyr, pyr.layer_order)
    assert abs(got - want) / want <= 1e-5


def test_texture_alpha_squared_scaling():
    rng = np.random.default_rng(13)
    pyr = make_pyramid({"relu1_1": (3, 8, 8, 1)}, rng, score=lambda h, w: rng.random((h, w)))
    feats = [FeatureMap(rng.normal(size=(3, 8, 8)), "relu1_1", 1)]
    cfg = TextureLossConfig(layers=("relu1_1",))
    base = texture_loss(feats, pyr, cfg)
    for alpha in (0.5, 0.25, 0.9):
        scaled = SwappedPyramid(layer_order=pyr.layer_order)
        scaled.maps["relu1_1"] = pyr.maps["relu1_1"]
        scaled.scores["relu1_1"] = pyr.scores["relu1_1"] * alpha
        got = texture_loss(feats, scaled, cfg)
        assert abs(got - alpha * alpha * base) / (alpha * alpha * base) <= 1e-6


def test_texture_symmetric_under_swap():
    rng = np.random.default_rng(14)
    pyr = make_pyramid({"relu1_1": (3, 6, 6, 1)}, rng)
    feats_data = rng.normal(size=(3, 6, 6))
    feats = [FeatureMap(feats_data, "relu1_1", 1)]
    cfg = TextureLossConfig(layers=("relu1_1",))
    fwd = texture_loss(feats, pyr, cfg)
    swapped = SwappedPyramid(layer_order=("relu1_1",))
    swapped.maps["relu1_1"] = FeatureMap(feats_data, "relu1_1", 1)
    swapped.scores["relu1_1"] = pyr.scores["relu1_1"]
    rev = texture_loss([pyr.maps["relu1_1"]], swapped, cfg)
    assert abs(fwd - rev) <= 1e-12


def test_texture_invariant_to_shared_spatial_permutation():
    rng = np.random.default_rng(15)
    pyr = make_pyramid({"relu1_1": (3, 4, 5, 1)}, rng, score=lambda h, w: rng.random((h, w)))
    feats_data = rng.normal(size=(3, 4, 5))
    cfg = TextureLossConfig(layers=("relu1_1",))
    base = texture_loss([FeatureMap(feats_data, "relu1_1", 1)], pyr, cfg)

    perm = rng.permutation(20)
    def shuffle(arr):
        flat = arr.reshape(arr.shape[0], -1) if arr.ndim == 3 else arr.reshape(1, -1)
        out = flat[:, perm].reshape(arr.shape)
        return out

    permuted = SwappedPyramid(layer_order=("relu1_1",))
    permuted.maps["relu1_1"] = FeatureMap(shuffle(pyr.maps["relu1_1"].data), "relu1_1", 1)
    permuted.scores["relu1_1"] = shuffle(pyr.scores["relu1_1"])
    got = texture_loss([FeatureMap(shuffle(feats_data), "relu1_1", 1)], permuted, cfg)
    assert abs(got - base) / base <= 1e-10


def test_texture_layer_mismatch():
    rng = np.random.default_rng(16)
    pyr = make_pyramid({"relu1_1": (2, 4, 4, 1)}, rng)
    with pytest.raises(errors.ConfigError):
        texture_loss([], pyr, TextureLossConfig(layers=("relu1_1",)))
    feats = [FeatureMap(np.zeros((2, 4, 4)), "relu1_1", 1)]
    with pytest.raises(errors.ConfigError):
        texture_loss(feats, pyr, TextureLossConfig(layers=("relu9_1",)))


# ---------------------------------------------------------------- total


def test_total_zero_parts():
    assert total_objective({"rec": 0.0, "per": 0.0, "tex": 0.0}) == 0.0


def test_total_rec_only():
    assert total_objective({"rec": 2.0, "per": 0.0, "tex": 0.0}) == 2.0


def test_total_unit_parts_default_weights():
    got = total_objective({"rec": 1.0, "per": 1.0, "tex": 1.0, "adv": 1.0})
    assert abs(got - 1.000201) < 1e-12


def test_total_missing_adv_defaults_zero():
    with_adv = total_objective({"rec": 1.0, "per": 1.0, "tex": 1.0, "adv": 0.0})
    without = total_objective({"rec": 1.0, "per": 1.0, "tex": 1.0})
    assert with_adv == without


def test_negative_weights_rejected():
    with pytest.raises(errors.ConfigError):
        LossWeights(w_rec=-1.0)


# ---------------------------------------------------------------- psnr


def test_psnr_identical_inf():
    img = np.random.default_rng(17).random((8, 8, 3))
    assert psnr(img, img) == float("inf")


def test_psnr_one_step_offset_closed_form():
    base = np.full((16, 16, 3), 0.4)
    got = psnr(base, base + 1.0 / 255.0)
    assert abs(got - 20.0 * np.log10(255.0)) < 1e-9
    assert abs(got - 48.131) < 0.001


def test_psnr_decreases_with_noise():
    rng = np.random.default_rng(18)
    img = rng.random((20, 20, 3)) * 0.5 + 0.25
    values = []
    for amp in (0.01, 0.05, 0.1):
        noise = rng.normal(size=img.shape)
        noise /= np.abs(noise).max()
        values.append(psnr(img, img + amp * noise))
    assert values[0] > values[1] > values[2]


# ---------------------------------------------------------------- ssim


def naive_ssim(x, y, k1=0.01, k2=0.03):
    """Independent per-window loop implementation."""
    half = 5
    coords = np.arange(11) - 5.0
    g = np.exp(-(coords ** 2) / (2 * 1.5 * 1.5))
    win = np.outer(g, g)
    win /= win.sum()
    c1, c2 = k1 * k1, k2 * k2
    h, w = x.shape
    vals = []
    for i in range(h - 10):
        for j in range(w - 10):
            px = x[i : i + 11, j : j + 11]
            py = y[i : i + 11, j : j + 11]
            mx = (px * win).sum()
            my = (py * win).sum()
            vx = (px * px * win).sum() - mx * mx
            vy = (py * py * win).sum() - my * my
            cxy = (px * py * win).sum() - mx * my
            vals.append(
                ((2 * mx * my + c1) * (2 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
            )
    return float(np.mean(vals))


def test_ssim_identical_exactly_one():
    img = np.random.default_rng(19).random((16, 16, 3))
    assert ssim(img, img) == 1.0


def test_ssim_negative_on_inverted_checkerboard():
    yy, xx = np.indices((24, 24))
    img = ((yy + xx) % 2).astype(np.float64)[:, :, None]
    assert ssim(img, 1.0 - img) < 0.0


def test_ssim_matches_independent_loop():
    rng = np.random.default_rng(20)
    a = rng.random((14, 15, 1))
    b = np.clip(a + rng.normal(scale=0.1, size=a.shape), 0, 1)
    got = ssim(a, b)
    want = naive_ssim(a[:, :, 0], b[:, :, 0])
    assert abs(got - want) <= 1e-6


def test_ssim_window_size_guard():
    with pytest.raises(errors.ShapeError):
        ssim(np.zeros((8, 20, 3)), np.zeros((8, 20, 3)))


def test_ssim_uses_luma():
    rng = np.random.default_rng(21)
    rgb = rng.random((16, 16, 3))
    # a pair with identical luma but different chroma scores 1.0
    other = rgb.copy()
    other[:, :, 0] += 0.05
    other[:, :, 1] -= 0.05 * 0.299 / 0.587
    luma_a = rgb[:, :, 0] * 0.299 + rgb[:, :, 1] * 0.587 + rgb[:, :, 2] * 0.114
    luma_b = other[:, :, 0] * 0.299 + other[:, :, 1] * 0.587 + other[:, :, 2] * 0.114
    assert np.abs(luma_a - luma_b).max() < 1e-12
    assert abs(ssim(rgb, other) - 1.0) < 1e-9
