"""
Patch matching in feature space
===============================

The matcher slides a 3x3 window over the input's feature map and, for
every position, finds the most similar reference patch. Similarity is
an inner product with the reference patch scaled to unit length; the
input side is left unnormalized on purpose, so per-position scores
are comparable across references but ranking is what matters.
"""

import numpy as np

from nttsr import FeatureMap, best_match, correlation_maps, match_patches, sample_patches

rng = np.random.default_rng(2)

# Toy feature maps: 8 channels, input 10x12, reference 9x9.
lr_fm = FeatureMap(rng.standard_normal((8, 10, 12)), "relu3_1", 4)
ref_fm = FeatureMap(rng.standard_normal((8, 9, 9)), "relu3_1", 4)

patches = sample_patches(ref_fm, 3, 1)
print("reference pool: %d patches of %d values" % (patches.count, patches.matrix().shape[1]))

# The full score volume is (N_ref, grid_h, grid_w).
scores = correlation_maps(lr_fm, patches)
print("score volume:", scores.shape)

corr = best_match(scores, patch_size=3, step=1)
print("best-index grid:", corr.best_index.shape)
print("score range: %.3f .. %.3f" % (corr.best_score.min(), corr.best_score.max()))

# match_patches runs both steps in one call.
corr2 = match_patches(lr_fm, patches)
print("one-call matcher agrees:", np.array_equal(corr.best_index, corr2.best_index))

# Scaling a reference patch does not change anything: the unit
# normalization divides the scale right back out.
scaled = FeatureMap(ref_fm.data * 25.0, "relu3_1", 4)
corr3 = match_patches(lr_fm, sample_patches(scaled, 3, 1))
print("argmax invariant to reference scaling:", np.array_equal(corr.best_index, corr3.best_index))
print("max score drift under scaling: %.3g" % np.max(np.abs(corr.best_score - corr3.best_score)))

# An input patch matched against a pool containing itself picks itself
# and scores exactly its own norm.
window = lr_fm.data[:, 4:7, 5:8]
pool = sample_patches(FeatureMap(window.copy(), "relu3_1", 4), 3, 1)
self_score = correlation_maps(lr_fm, pool)[0, 4, 5]
print("self match score %.6f == patch norm %.6f" % (self_score, np.linalg.norm(window)))
