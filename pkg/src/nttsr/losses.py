"""Reconstruction, perceptual, and texture objectives plus PSNR/SSIM.

All reductions are means over element count (recorded choice: it keeps
the combined-objective weights meaningful across image sizes). The
texture term compares Gram matrices of score-weighted features against
score-weighted swapped maps, each layer normalized by
lambda_l = 1 / (4 * C_l^2 * (H_l * W_l)^2) so layer magnitudes stay
O(1) regardless of feature size.

PSNR runs on unit-interval values (peak 1) and returns +inf for
identical inputs; SSIM is the standard single-scale formulation on the
luma channel with an 11x11 Gaussian window, sigma 1.5, k1 = 0.01,
k2 = 0.03, averaged over valid window positions only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ShapeError
from .feature_extractor import FeatureMap, NetworkConfig, WeightStore, extract_pyramid, vgg19_config
from .feature_swap import SwappedPyramid
from .image_core import check_image, to_gray

__all__ = [
    "LossWeights",
    "TextureLossConfig",
    "rec_loss",
    "perceptual_loss",
    "gram_matrix",
    "texture_loss",
    "total_objective",
    "psnr",
    "ssim",
]


@dataclass(frozen=True)
class LossWeights:
    """Combined-objective weights; the defaults favor reconstruction."""

    w_rec: float = 1.0
    w_per: float = 1e-4
    w_adv: float = 1e-6
    w_tex: float = 1e-4

    def __post_init__(self):
        for field_name in ("w_rec", "w_per", "w_adv", "w_tex"):
            if getattr(self, field_name) < 0:
                raise ConfigError(f"{field_name} must be nonnegative")


@dataclass(frozen=True)
class TextureLossConfig:
    """Which pyramid layers the texture term sums over."""

    layers: Tuple[str, ...] = ("relu1_1", "relu2_1", "relu3_1")

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("texture loss needs at least one layer")


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    check_image(a)
    check_image(b)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape!r} vs {b.shape!r}")


def rec_loss(sr: np.ndarray, hr: np.ndarray) -> float:
    """Mean absolute difference over all elements."""
    _check_pair(sr, hr)
    return float(np.abs(sr - hr).mean())


def perceptual_loss(
    sr: np.ndarray,
    hr: np.ndarray,
    weights: WeightStore,
    config: Optional[NetworkConfig] = None,
    layer: str = "relu5_1",
) -> float:
    """Summed per-channel Frobenius distances at a deep tap, over volume.

    (1/V) * sum_i ||phi_i(hr) - phi_i(sr)||_F with V = C*H*W of the tap.
    """
    _check_pair(sr, hr)
    if config is None:
        config = vgg19_config(layer)
    fm_sr = extract_pyramid(sr, weights, config, [layer])[0]
    fm_hr = extract_pyramid(hr, weights, config, [layer])[0]
    diff = fm_hr.data - fm_sr.data
    per_channel = np.sqrt((diff * diff).sum(axis=(1, 2)))
    return float(per_channel.sum() / diff.size)


def gram_matrix(fm) -> np.ndarray:
    """Unnormalized channel co-activation matrix G = F F^T.

    F is the (C, H*W) flattening of the map; G[a, b] sums the products
    of channels a and b over all cells. Symmetric positive semi-definite
    by construction.
    """
    data = fm.data if isinstance(fm, FeatureMap) else np.asarray(fm, dtype=np.float64)
    if data.ndim != 3 or data.size == 0:
        raise ShapeError(f"expected a nonempty (C, H, W) map, got shape {data.shape!r}")
    flat = data.reshape(data.shape[0], -1)
    return flat @ flat.T


def texture_loss(
    sr_features: Sequence[FeatureMap],
    pyramid: SwappedPyramid,
    cfg: Optional[TextureLossConfig] = None,
) -> float:
    """Score-weighted Gram distance between SR features and swapped maps.

    Per layer: lambda_l * ||Gr(phi_l * S_l) - Gr(M_l * S_l)||_F, the
    weight map multiplying every channel elementwise. Layers missing on
    either side are an error rather than silently skipped.
    """
    if cfg is None:
        cfg = TextureLossConfig()
    by_layer = {fm.layer: fm for fm in sr_features}
    total = 0.0
    for layer in cfg.layers:
        if layer not in by_layer:
            raise ConfigError(f"SR features lack layer {layer!r}")
        if layer not in pyramid.maps or layer not in pyramid.scores:
            raise ConfigError(f"pyramid lacks layer {layer!r}")
        phi = by_layer[layer].data
        m = pyramid.maps[layer].data
        s = pyramid.scores[layer]
        if phi.shape != m.shape:
            raise ShapeError(f"{layer}: SR features {phi.shape} vs swapped map {m.shape}")
        if s.shape != phi.shape[1:]:
            raise ShapeError(f"{layer}: weight map {s.shape} vs features {phi.shape[1:]}")
        c, h, w = phi.shape
        lam = 1.0 / (4.0 * (c ** 2) * float(h * w) ** 2)
        diff = gram_matrix(phi * s) - gram_matrix(m * s)
        total += lam * float(np.linalg.norm(diff))
    return total


def total_objective(parts: Dict[str, float], w: Optional[LossWeights] = None) -> float:
    """Weighted sum of the loss parts; a missing adv term counts as 0."""
    if w is None:
        w = LossWeights()
    rec = float(parts["rec"])
    per = float(parts["per"])
    tex = float(parts["tex"])
    adv = float(parts.get("adv", 0.0))
    return w.w_rec * rec + w.w_per * per + w.w_adv * adv + w.w_tex * tex


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10 log10(1 / MSE) in dB; identical inputs give +inf."""
    _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma * sigma))
    win = np.outer(g, g)
    return win / win.sum()


def _window_means(x: np.ndarray, win: np.ndarray) -> np.ndarray:
    """Valid-position weighted local means of a 2-D field."""
    k = win.shape[0]
    patches = np.lib.stride_tricks.sliding_window_view(x, (k, k))
    return np.einsum("ijkl,kl->ij", patches, win)


def ssim(a: np.ndarray, b: np.ndarray, k1: float = 0.01, k2: float = 0.03) -> float:
    """Single-scale structural similarity on luma, valid windows only."""
    _check_pair(a, b)
    win = _gaussian_window()
    size = win.shape[0]
    if a.shape[0] < size or a.shape[1] < size:
        raise ShapeError(
            f"image {a.shape[0]}x{a.shape[1]} smaller than the {size}x{size} SSIM window"
        )
    x = to_gray(a)
    y = to_gray(b)
    c1 = k1 * k1  # peak value is 1
    c2 = k2 * k2
    mu_x = _window_means(x, win)
    mu_y = _window_means(y, win)
    e_xx = _window_means(x * x, win)
    e_yy = _window_means(y * y, win)
    e_xy = _window_means(x * y, win)
    var_x = e_xx - mu_x * mu_x
    var_y = e_yy - mu_y * mu_y
    cov = e_xy - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))
