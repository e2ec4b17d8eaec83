"""
Scoring an upscale
==================

Four numbers summarize a result: psnr and ssim for fidelity, plus the
engine's own loss terms (mean absolute reconstruction error, a deep
feature distance, and the confidence-weighted texture distance against
a swapped pyramid). The eval subcommand emits all of them as JSON;
this script calls the same functions directly.
"""

import numpy as np

from nttsr import (
    FeatureMap,
    LossWeights,
    SwappedPyramid,
    TextureLossConfig,
    bicubic_resample,
    gram_matrix,
    perceptual_loss,
    psnr,
    random_extractor_weights,
    rec_loss,
    ssim,
    texture_loss,
    total_objective,
    vgg19_config,
)

rng = np.random.default_rng(4)

hr = np.clip(bicubic_resample(rng.random((16, 16, 3)), 4.0), 0.0, 1.0)
sr = np.clip(hr + rng.normal(0.0, 0.02, hr.shape), 0.0, 1.0)

print("psnr  %.2f dB" % psnr(sr, hr))
print("ssim  %.4f" % ssim(sr, hr))
print("rec   %.5f" % rec_loss(sr, hr))

# Identical images hit the sentinel values exactly.
print("psnr(x, x) =", psnr(hr, hr), " ssim(x, x) =", ssim(hr, hr))

# The deep-feature distance needs extractor weights.
weights = random_extractor_weights(vgg19_config(), seed=0)
per = perceptual_loss(sr, hr, weights)
print("per   %.6f" % per)

# The texture term compares channel co-activation statistics (Gram
# matrices) between the result's features and the swapped maps, with
# the confidence map S gating every cell. Toy maps keep it readable.
phi = rng.standard_normal((6, 8, 8))
m = rng.standard_normal((6, 8, 8))
s = rng.random((8, 8))
pyr = SwappedPyramid(
    layer_order=("relu1_1",),
    maps={"relu1_1": FeatureMap(m, "relu1_1", 1)},
    scores={"relu1_1": s},
)
cfg = TextureLossConfig(layers=("relu1_1",))
tex = texture_loss([FeatureMap(phi, "relu1_1", 1)], pyr, cfg)
print("tex   %.6f" % tex)

g = gram_matrix(FeatureMap(phi, "relu1_1", 1))
print("gram symmetric:", np.array_equal(g, g.T))

# The combined objective weights the parts; the adversarial slot
# exists for API completeness and defaults to zero here.
parts = {"rec": rec_loss(sr, hr), "per": per, "tex": tex}
print("total %.6f" % total_objective(parts, LossWeights()))
