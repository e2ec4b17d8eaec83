"""Exception hierarchy shared across the engine.

The CLI maps these onto its exit-code contract: image/weight-file I/O
problems exit 2, shape/config/degenerate-input problems exit 3.
"""


class NttError(Exception):
    """Base class for all engine errors."""


# --- image I/O -------------------------------------------------------------

class ImageIOError(NttError):
    """Base class for image read/write failures."""


class UnreadableImageError(ImageIOError):
    """File missing or not readable."""


class UnsupportedImageError(ImageIOError):
    """Readable, but not an 8-bit gray/RGB PNG or maxval-255 P6 PPM."""


class ImageDecodeError(ImageIOError):
    """Corrupt or truncated image data."""


class ImageWriteError(ImageIOError):
    """Target path not writable or encode failure."""


# --- weight container ------------------------------------------------------

class WeightFormatError(NttError):
    """Base class for NTTW container failures."""


class BadMagicError(WeightFormatError):
    pass


class UnsupportedVersionError(WeightFormatError):
    pass


class ChecksumError(WeightFormatError):
    pass


class TruncatedFileError(WeightFormatError):
    pass


class MissingWeightError(NttError):
    """A named tensor required by the network is absent from the store."""


class MissingTapError(NttError):
    """A requested tap name does not exist in the network config."""


# --- shapes and configuration ----------------------------------------------

class ShapeError(NttError):
    """Tensor/image dimensions incompatible with the requested operation."""


class ConfigError(NttError):
    """Invalid configuration value (bad factor, non-divisible strides, ...)."""


# --- degenerate numerical inputs -------------------------------------------

class DegenerateInputError(NttError):
    """Input is numerically unusable for the requested operation."""


class ReferenceTooSmallError(DegenerateInputError):
    """A reference variant yields no complete patch at the match layer."""


class AllPatchesDegenerateError(DegenerateInputError):
    """Every candidate patch at some location carried the -inf sentinel."""


class DegenerateWarpError(DegenerateInputError):
    """No warp parameter draw leaves a full-size valid interior."""
