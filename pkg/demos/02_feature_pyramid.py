"""
Running the feature extractor
=============================

The extractor is a forward-only 19-layer convolutional stack. Any
rectifier output can be tapped; the three shallow taps relu1_1,
relu2_1, relu3_1 form the pyramid the swap stage works on. Without
trained weights on disk, seeded random weights stand in: activations
are meaningless as textures, but every shape, stride, and data-flow
contract is the real one.
"""

import numpy as np

from nttsr import (
    extract_pyramid,
    load_weights,
    random_extractor_weights,
    store_weights,
    vgg19_config,
)

rng = np.random.default_rng(1)

# Truncating the config right after the deepest tap keeps the forward
# pass cheap: layers past relu3_1 are never built or run.
config = vgg19_config(through="relu3_1")
weights = random_extractor_weights(config, seed=42)
print("tensors in the store:", len(weights.names()))

img = rng.random((64, 64, 3))
taps = ("relu1_1", "relu2_1", "relu3_1")
pyramid = extract_pyramid(img, weights, config, taps)
for fm in pyramid:
    print("%-8s stride %d  shape %s" % (fm.layer, fm.stride, fm.data.shape))

# Weight stores round-trip through the NTTW container byte-exactly.
store_weights(weights, "/tmp/demo_weights.nttw")
again = load_weights("/tmp/demo_weights.nttw")
same = all(np.array_equal(weights[name], again[name]) for name in weights.names())
print("store/load round trip exact:", same)

# The same seed always gives the same weights, which is what makes
# whole-pipeline runs reproducible without any trained checkpoint.
redo = random_extractor_weights(config, seed=42)
print("same seed, same weights:", np.array_equal(weights["conv1_1.kernel"], redo["conv1_1.kernel"]))
