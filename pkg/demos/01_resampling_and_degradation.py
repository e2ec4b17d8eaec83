"""
Bicubic resampling and the frequency-matched degradation
========================================================

The engine works on unit-interval float images shaped (H, W, 3).
This walk-through covers the resampling primitive everything else
leans on: upscaling, downscaling, and the down-then-up degradation
that puts a reference image into the same frequency band as an
upscaled input.
"""

import numpy as np

from nttsr import bicubic_resample, degrade_ref, psnr, quantize

rng = np.random.default_rng(0)

# A smooth synthetic test image: coarse noise pushed through an 8x
# upscale. Band-limited content is what resampling handles well.
coarse = rng.random((20, 20, 3))
img = np.clip(bicubic_resample(coarse, 8.0), 0.0, 1.0)
print("test image:", img.shape)

# Factor 4 down, then factor 4 up: the classic degradation pipeline.
small = bicubic_resample(img, 0.25)
print("downscaled:", small.shape)
back = bicubic_resample(small, 4.0)
print("round trip:", back.shape, "psnr vs original %.2f dB" % psnr(np.clip(back, 0, 1), img))

# degrade_ref does both steps in one call and guarantees the output
# size equals the input size even when the dimensions do not divide
# evenly by the factor.
degraded = degrade_ref(img, 4)
print("degraded reference:", degraded.shape)
print("max |degrade_ref - manual|: %.3g" % np.max(np.abs(degraded - back)))

# Quantization reproduces the 8-bit values a PNG would store. A
# factor-1 resample is an exact identity, so save/load round trips
# are bit-stable.
same = bicubic_resample(img, 1.0)
print("factor-1 identity exact:", np.array_equal(same, img))
print("8-bit range:", quantize(img).min(), "..", quantize(img).max())
