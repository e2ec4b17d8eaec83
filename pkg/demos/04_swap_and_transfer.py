"""
The full pipeline: swap, then synthesize
========================================

Swapping replaces every input feature patch with its best reference
match, assembled into one map per pyramid level (M), alongside a
per-cell confidence map (S). The transfer trunk then merges those
maps into an upscaling network's state and emits the output image.
This run uses seeded random weights, so the output is not a faithful
upscale; the point is the moving parts and their shapes.
"""

import numpy as np

from nttsr import (
    SwapConfig,
    bicubic_resample,
    make_content_base,
    random_extractor_weights,
    random_generator_weights,
    save_image,
    save_pyramid,
    swap_pipeline,
    transfer_forward,
    vgg19_config,
)

rng = np.random.default_rng(3)

# A 40x40 input and one 160x160 reference that shares its content:
# here the reference is simply the ground truth the input was made
# from, the best case a reference can be.
hr = np.clip(bicubic_resample(rng.random((20, 20, 3)), 8.0), 0.0, 1.0)
lr = np.clip(bicubic_resample(hr, 0.25), 0.0, 1.0)
print("input %s, reference %s" % (lr.shape, hr.shape))

weights = random_extractor_weights(vgg19_config("relu3_1"), seed=0)
cfg = SwapConfig()  # match at relu3_1, assemble relu1_1/relu2_1/relu3_1

pyramid = swap_pipeline(lr, [hr], weights, cfg)
for layer in pyramid.layer_order:
    m = pyramid.maps[layer]
    s = pyramid.scores[layer]
    print("%-8s M %s  S %s  mean confidence %.3f"
          % (layer, m.data.shape, s.shape, s.mean()))

# Pyramids serialize to the same container format as weights.
save_pyramid(pyramid, "/tmp/demo_pyramid.nttw")
print("pyramid written to /tmp/demo_pyramid.nttw")

# The trunk consumes levels coarse to fine and upscales 2x between
# them: three levels make the 4x output.
order = sorted(pyramid.layer_order, key=lambda l: pyramid.maps[l].stride, reverse=True)
generator = random_generator_weights([pyramid.maps[l].channels for l in order], seed=0)
out = transfer_forward(make_content_base(lr, generator), pyramid, generator)
print("output image:", out.shape, "range %.3f .. %.3f" % (out.min(), out.max()))

save_image(out, "/tmp/demo_sr.png")
print("wrote /tmp/demo_sr.png")
