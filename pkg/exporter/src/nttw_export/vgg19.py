"""VGG19 checkpoint conversion.

The target engine feeds unit-interval RGB images to its stack after
subtracting a per-channel mean, with no variance scaling. Torchvision's
VGG19 expects mean-and-std normalized input instead, so the std factors
are folded into the first convolution's kernels here; after that, both
implementations compute the same function on the same raw image.
"""

import dataclasses
from collections import OrderedDict
from typing import Dict, List, Tuple

import numpy as np

from .errors import MissingLayerError, ShapeMismatchError
from .format import write_tensors

# (block, convs in block, output channels); taps are relu{block}_{i}
_BLOCKS = ((1, 2, 64), (2, 2, 128), (3, 4, 256), (4, 4, 512), (5, 4, 512))

# Position of each convolution inside torchvision's `features` module.
TORCHVISION_FEATURE_INDEX = {
    "conv1_1": 0, "conv1_2": 2,
    "conv2_1": 5, "conv2_2": 7,
    "conv3_1": 10, "conv3_2": 12, "conv3_3": 14, "conv3_4": 16,
    "conv4_1": 19, "conv4_2": 21, "conv4_3": 23, "conv4_4": 25,
    "conv5_1": 28, "conv5_2": 30, "conv5_3": 32, "conv5_4": 34,
}

UNIT_RGB_MEAN = (0.485, 0.456, 0.406)
RGB_STD = (0.229, 0.224, 0.225)


def required_conv_layers(through: str = "relu5_1") -> List[Tuple[str, int, int]]:
    """(name, out_channels, in_channels) for every conv up to `through`."""
    layers = []
    c_in = 3
    for block, n_convs, channels in _BLOCKS:
        for i in range(1, n_convs + 1):
            layers.append(("conv%d_%d" % (block, i), channels, c_in))
            c_in = channels
            if "relu%d_%d" % (block, i) == through:
                return layers
    raise MissingLayerError("unknown tap %r for the VGG19 stack" % through)


@dataclasses.dataclass(frozen=True)
class ExportManifest:
    """What to export: source id, name mapping, destination, depth."""

    source: str
    mapping: Dict[str, str]  # framework parameter name -> NTTW tensor name
    out_path: str
    through: str = "relu5_1"


def vgg19_manifest(out_path: str, through: str = "relu5_1",
                   source: str = "torchvision/vgg19") -> ExportManifest:
    """The standard mapping for torchvision's VGG19 `features` layout."""
    mapping = {}
    for name, _, _ in required_conv_layers(through):
        idx = TORCHVISION_FEATURE_INDEX[name]
        mapping["features.%d.weight" % idx] = name + ".kernel"
        mapping["features.%d.bias" % idx] = name + ".bias"
    return ExportManifest(source=source, mapping=mapping,
                          out_path=out_path, through=through)


def _to_numpy(value) -> np.ndarray:
    if hasattr(value, "detach"):  # torch tensor without importing torch here
        value = value.detach().cpu().numpy()
    return np.asarray(value, dtype=np.float64)


def export(manifest: ExportManifest, state_dict: Dict) -> str:
    """Convert a checkpoint into an NTTW file per the manifest.

    Kernels land in (out, in, kH, kW) layout, the std normalization is
    folded into the first convolution, and the preprocess mean rides
    along in unit-interval scale. Same inputs give byte-identical files.
    """
    required = required_conv_layers(manifest.through)
    inverse = {nttw: fw for fw, nttw in manifest.mapping.items()}

    tensors = OrderedDict()
    tensors["preprocess.mean"] = np.asarray(UNIT_RGB_MEAN, dtype=np.float32)
    for name, c_out, c_in in required:
        for suffix in (".kernel", ".bias"):
            if name + suffix not in inverse:
                raise MissingLayerError(
                    "mapping covers no source for %s" % (name + suffix))
            if inverse[name + suffix] not in state_dict:
                raise MissingLayerError(
                    "checkpoint lacks %r, mapped to %s"
                    % (inverse[name + suffix], name + suffix))
        kernel = _to_numpy(state_dict[inverse[name + ".kernel"]])
        bias = _to_numpy(state_dict[inverse[name + ".bias"]])
        if kernel.shape != (c_out, c_in, 3, 3):
            raise ShapeMismatchError(
                "%s.kernel is %r, architecture wants %r"
                % (name, kernel.shape, (c_out, c_in, 3, 3)))
        if bias.shape != (c_out,):
            raise ShapeMismatchError(
                "%s.bias is %r, architecture wants %r"
                % (name, bias.shape, (c_out,)))
        if name == "conv1_1":
            kernel = kernel / np.asarray(RGB_STD)[None, :, None, None]
        tensors[name + ".kernel"] = kernel.astype(np.float32)
        tensors[name + ".bias"] = bias.astype(np.float32)
    write_tensors(manifest.out_path, tensors)
    return manifest.out_path
