"""
Building evaluation pairs
=========================

Good benchmarks need references at controlled relevance. Two tools
help: a mutual-best-match counter that scores how much texture two
images share, with level buckets L1 (near duplicate) through L4
(unrelated), and a seeded warper that turns a ground-truth image into
a same-content reference under a known scale/rotation/translation.
"""

import numpy as np

from nttsr import (
    DEFAULT_LEVELS,
    SimilarityLevels,
    bicubic_resample,
    gen_warped_ref,
    match_count,
    random_extractor_weights,
    vgg19_config,
)

rng = np.random.default_rng(5)
weights = random_extractor_weights(vgg19_config("relu3_1"), seed=11)


def smooth(seed, n=96):
    r = np.random.default_rng(seed)
    return np.clip(bicubic_resample(r.random((n // 8, n // 8, 3)), 8.0)[:n, :n], 0.0, 1.0)


img = smooth(0)
total = (96 // 4 - 2) ** 2
print("patch centers on a 96px image:", total)

# Identical images match everywhere; unrelated noise almost nowhere.
for name, other in [
    ("itself", img),
    ("blurred copy", np.clip(bicubic_resample(bicubic_resample(img, 0.5), 2.0), 0, 1)),
    ("other image", smooth(9)),
    ("pure noise", rng.random(img.shape)),
]:
    count = match_count(img, other, weights)
    print("vs %-12s %4d / %d matches" % (name, count, total))

# The default level cutoffs are calibrated for the 1444 centers of a
# standard 160px crop; scale them for other crop sizes.
print("default cutoffs:", DEFAULT_LEVELS.cutoffs)
scaled = SimilarityLevels(tuple(
    int(round(c * total / 1444.0)) for c in DEFAULT_LEVELS.cutoffs))
print("scaled for 96px:", scaled.cutoffs)
print("a blurred copy lands in:", scaled.label(
    match_count(img, np.clip(bicubic_resample(bicubic_resample(img, 0.5), 2.0), 0, 1), weights)))

# Warped references: same content, different geometry. The draw is
# seeded, so a dataset built this way is reproducible.
hr = smooth(3, n=160)
warped = gen_warped_ref(hr, seed=7)
print("warped reference:", warped.shape, "identical to source:", np.array_equal(warped, hr))
print("zero-motion sanity:", np.array_equal(gen_warped_ref(hr, seed=7, zero_motion=True), hr))
