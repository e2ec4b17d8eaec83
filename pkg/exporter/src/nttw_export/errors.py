"""Failure types raised during an export."""


class ExportError(Exception):
    """Base class for everything this package raises on purpose."""


class MissingLayerError(ExportError):
    """The mapping table does not cover a required target tensor."""


class ShapeMismatchError(ExportError):
    """A checkpoint tensor disagrees with the target architecture."""
