"""Image buffers, PNG/PPM I/O, and bicubic resampling.

An image buffer is a numpy array of shape (height, width, channels),
channels 1 or 3, holding float64 intensities on the unit interval.
Loading maps byte value v to v/255 exactly. Saving quantizes with
round-half-away-from-zero and is the only place values are clamped:
intermediate buffers (for example the negative overshoot of the bicubic
kernel around an edge) keep their exact values so downstream math sees
them unclipped.

Resampling uses the Keys cubic kernel with a = -0.5, clamp-to-edge
boundary handling, and an align-centers sampling grid
``src = (dst + 0.5) * in_size / out_size - 0.5``. Output sizes are
``round(size * factor)`` with halves rounding up. No anti-aliasing is
applied on downscale; the down/up pair in :func:`degrade_ref` is the
plain interpolation protocol, which can differ from imresize variants
that prefilter.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    ImageDecodeError,
    ImageWriteError,
    ShapeError,
    ConfigError,
    UnreadableImageError,
    UnsupportedImageError,
)

__all__ = [
    "load_image",
    "save_image",
    "bicubic_resample",
    "degrade_ref",
    "bicubic_weight",
    "to_gray",
    "bilinear_sample",
    "rotate_crop",
    "new_image",
]

_PIL_MODES = {"L": 1, "RGB": 3}


def new_image(height, width, channels=3, value=0.0):
    """Constant image buffer of the given shape."""
    if channels not in (1, 3):
        raise ShapeError(f"channels must be 1 or 3, got {channels}")
    return np.full((height, width, channels), float(value), dtype=np.float64)


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate buffer layout (not the value range, which save enforces)."""
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ShapeError(f"expected (H, W, 1|3) image buffer, got shape {img.shape!r}")
    return img


def load_image(path) -> np.ndarray:
    """Read an 8-bit PNG or binary PPM (P6) into a unit-interval buffer.

    Byte value v maps to v/255 exactly; channel order is preserved.
    Raises UnreadableImageError for missing/unopenable files,
    UnsupportedImageError for depths/modes outside 8-bit gray/RGB, and
    ImageDecodeError for corrupt data.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise UnreadableImageError(f"cannot read image file {path}: {exc}") from exc

    if raw[:2] == b"P6":
        arr = _decode_ppm(raw, path)
    else:
        arr = _decode_png(raw, path)
    return arr.astype(np.float64) / 255.0


def _decode_png(raw: bytes, path) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(raw)) as im:
            if im.format not in ("PNG", "PPM"):
                raise UnsupportedImageError(
                    f"{path}: unsupported format {im.format!r} (PNG or P6 PPM only)"
                )
            if im.mode == "P":
                im = im.convert("RGB")
            if im.mode not in _PIL_MODES:
                raise UnsupportedImageError(
                    f"{path}: unsupported mode/bit depth {im.mode!r} (8-bit L or RGB only)"
                )
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise ImageDecodeError(f"{path}: not a decodable PNG/PPM image") from exc
    except (OSError, SyntaxError) as exc:
        raise ImageDecodeError(f"{path}: truncated or corrupt image data: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _decode_ppm(raw: bytes, path) -> np.ndarray:
    # Header: "P6" <ws> width <ws> height <ws> maxval <single ws> data.
    # '#' comments may appear between tokens.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageDecodeError(f"{path}: truncated PPM header")
        try:
            fields.append(int(raw[start:pos]))
        except ValueError as exc:
            raise ImageDecodeError(f"{path}: malformed PPM header token") from exc
    pos += 1  # the single whitespace byte after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise UnsupportedImageError(f"{path}: PPM maxval {maxval} unsupported (8-bit only)")
    need = width * height * 3
    data = raw[pos : pos + need]
    if len(data) < need:
        raise ImageDecodeError(f"{path}: PPM pixel data truncated ({len(data)}/{need} bytes)")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3)


def quantize(img: np.ndarray) -> np.ndarray:
    """Map unit-interval floats to bytes: round(v*255) half away from zero,
    clamped to [0, 255]. This is the only clamping point in the module."""
    check_image(img)
    scaled = np.clip(img, 0.0, 1.0) * 255.0
    # values are non-negative here, so floor(x + 0.5) is half-away-from-zero
    return np.floor(scaled + 0.5).astype(np.uint8)


def save_image(img: np.ndarray, path) -> None:
    """Write a buffer as PNG, or as binary PPM when the path ends in .ppm.

    load_image(save_image(x)) differs from x by at most 1/510 per element
    for in-range x.
    """
    data = quantize(img)
    text = str(path)
    try:
        if text.lower().endswith(".ppm"):
            if data.shape[2] != 3:
                raise UnsupportedImageError("P6 PPM requires a 3-channel buffer")
            with open(path, "wb") as fh:
                fh.write(b"P6\n%d %d\n255\n" % (data.shape[1], data.shape[0]))
                fh.write(data.tobytes())
        else:
            mode = "RGB" if data.shape[2] == 3 else "L"
            pil = Image.fromarray(data[:, :, 0] if mode == "L" else data, mode=mode)
            pil.save(path, format="PNG")
    except OSError as exc:
        raise ImageWriteError(f"cannot write image to {path}: {exc}") from exc


def bicubic_weight(t):
    """Keys cubic kernel with a = -0.5, evaluated elementwise.

    w(0) = 1, w(0.5) = 0.5625, w(1.5) = -0.0625, zero for |t| >= 2.
    Weights of the four taps at any fractional offset sum to 1.
    """
    t = np.abs(np.asarray(t, dtype=np.float64))
    out = np.zeros_like(t)
    near = t <= 1.0
    far = (t > 1.0) & (t < 2.0)
    tn = t[near]
    tf = t[far]
    out[near] = (1.5 * tn - 2.5) * tn * tn + 1.0
    out[far] = ((-0.5 * tf + 2.5) * tf - 4.0) * tf + 2.0
    return out if out.ndim else float(out)


def _axis_weights(in_len: int, out_len: int):
    """Tap indices (out_len, 4) and kernel weights (out_len, 4) for one axis."""
    dst = np.arange(out_len, dtype=np.float64)
    src = (dst + 0.5) * (in_len / out_len) - 0.5
    base = np.floor(src)
    frac = src - base
    # taps at base-1 .. base+2; offsets measured from the sample point
    offsets = np.stack([1.0 + frac, frac, 1.0 - frac, 2.0 - frac], axis=1)
    weights = bicubic_weight(offsets)
    idx = base[:, None].astype(np.int64) + np.array([-1, 0, 1, 2])
    np.clip(idx, 0, in_len - 1, out=idx)  # clamp-to-edge boundary
    return idx, weights


def _resample_axis(data: np.ndarray, out_len: int) -> np.ndarray:
    """Resample axis 0 of `data` to out_len samples."""
    in_len = data.shape[0]
    if out_len == in_len:
        return data.copy()
    idx, weights = _axis_weights(in_len, out_len)
    taps = data[idx]  # (out_len, 4, ...)
    w = weights.reshape(weights.shape + (1,) * (data.ndim - 1))
    return (taps * w).sum(axis=1)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def bicubic_resample(img: np.ndarray, factor: float) -> np.ndarray:
    """Separable Keys-bicubic resample by `factor` (output dims round(dim*factor)).

    Constant inputs map to the same constant; factor 1 is the exact
    identity. Output values may leave [0, 1] (kernel overshoot) and are
    intentionally not clamped here.
    """
    check_image(img)
    factor = float(factor)
    if factor <= 0.0:
        raise ConfigError(f"resample factor must be positive, got {factor}")
    h, w = img.shape[:2]
    out_h = _round_half_up(h * factor)
    out_w = _round_half_up(w * factor)
    if out_h < 1 or out_w < 1:
        raise ConfigError(f"factor {factor} collapses {h}x{w} below one pixel")
    if out_h == h and out_w == w and factor == 1.0:
        return img.copy()
    rows = _resample_axis(img, out_h)
    cols = _resample_axis(np.swapaxes(rows, 0, 1), out_w)
    return np.ascontiguousarray(np.swapaxes(cols, 0, 1))


def degrade_ref(ref: np.ndarray, factor: int) -> np.ndarray:
    """Bicubic down-then-up by an integer factor, restoring the input size.

    Produces the frequency-matched counterpart of an upscaled LR image:
    the result keeps the reference's geometry but only the frequency band
    that survives 1/factor downsampling. If rounding makes the up-scaled
    size miss the original, the result is cropped / edge-padded back.
    """
    check_image(ref)
    factor = int(factor)
    if factor < 2:
        raise ConfigError(f"degrade factor must be >= 2, got {factor}")
    down = bicubic_resample(ref, 1.0 / factor)
    up = bicubic_resample(down, float(factor))
    h, w = ref.shape[:2]
    if up.shape[:2] != (h, w):
        up = up[:h, :w]
        pad_h, pad_w = h - up.shape[0], w - up.shape[1]
        if pad_h or pad_w:
            up = np.pad(up, ((0, pad_h), (0, pad_w), (0, 0)), mode="edge")
    return up


def to_gray(img: np.ndarray) -> np.ndarray:
    """Rec.601 luma for RGB buffers; pass-through for single-channel ones.

    Returns a 2-D (H, W) array.
    """
    check_image(img)
    if img.shape[2] == 1:
        return img[:, :, 0]
    return img[:, :, 0] * 0.299 + img[:, :, 1] * 0.587 + img[:, :, 2] * 0.114


def bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample (H, W, C) data at fractional (row, col) positions, bilinearly.

    Coordinates within 1e-9 of an integer are snapped so that right-angle
    transforms reproduce pixels exactly. Out-of-range coordinates are
    clamped to the border.
    """
    ys = np.asarray(ys, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.where(np.abs(ys - np.round(ys)) < 1e-9, np.round(ys), ys)
    xs = np.where(np.abs(xs - np.round(xs)) < 1e-9, np.round(xs), xs)
    h, w = img.shape[:2]
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[..., None]
    fx = (xs - x0)[..., None]
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def _max_interior_rect(w: int, h: int, radians: float):
    """Largest axis-aligned (width, height) fully inside a w x h rectangle
    rotated by `radians` about its center."""
    if w <= 0 or h <= 0:
        return 0.0, 0.0
    sin_a = abs(np.sin(radians))
    cos_a = abs(np.cos(radians))
    if sin_a < 1e-12:
        return float(w), float(h)
    long_side, short_side = (w, h) if w >= h else (h, w)
    if short_side <= 2.0 * sin_a * cos_a * long_side or abs(sin_a - cos_a) < 1e-10:
        half = 0.5 * short_side
        wr, hr = (half / sin_a, half / cos_a) if w >= h else (half / cos_a, half / sin_a)
    else:
        cos_2a = cos_a * cos_a - sin_a * sin_a
        wr = (w * cos_a - h * sin_a) / cos_2a
        hr = (h * cos_a - w * sin_a) / cos_2a
    return wr, hr


def rotate_crop(img: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate about the image center (positive = counterclockwise on screen),
    bilinear, cropped to the largest axis-aligned interior rectangle.

    Right angles reduce to exact index permutations (90 degrees equals
    np.rot90 element-for-element).
    """
    check_image(img)
    theta = np.deg2rad(float(degrees))
    h, w = img.shape[:2]
    wr, hr = _max_interior_rect(w, h, theta)
    out_w = max(1, int(np.floor(wr + 1e-9)))
    out_h = max(1, int(np.floor(hr + 1e-9)))
    oy, ox = np.mgrid[0:out_h, 0:out_w]
    dy = oy - (out_h - 1) / 2.0
    dx = ox - (out_w - 1) / 2.0
    # screen-CCW rotation in row/col coordinates: inverse map of
    # (x, y) -> (x cos t + y sin t, -x sin t + y cos t)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    src_x = cos_t * dx - sin_t * dy + (w - 1) / 2.0
    src_y = sin_t * dx + cos_t * dy + (h - 1) / 2.0
    return bilinear_sample(img, src_y, src_x)
