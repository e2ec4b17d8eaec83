"""Checkpoint conversion into the NTTW tensor container."""

from .errors import ExportError, MissingLayerError, ShapeMismatchError
from .format import write_tensors
from .vgg19 import ExportManifest, export, required_conv_layers, vgg19_manifest

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "ExportManifest",
    "MissingLayerError",
    "ShapeMismatchError",
    "export",
    "required_conv_layers",
    "vgg19_manifest",
    "write_tensors",
]
