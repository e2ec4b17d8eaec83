"""Binary tensor container used for network weights and swapped-feature dumps.

Layout, all integers little-endian:

    magic   4 bytes  b"NTTW"
    version u32      currently 1
    count   u32      number of tensors
    tensor records, `count` times:
        name_len u16
        name     UTF-8 bytes
        ndim     u8
        dims     ndim x u32
        data     prod(dims) float32, row-major
    crc     u32      CRC-32 (zlib) of every byte before this field

Readers fail with a distinct error per defect: wrong magic, unknown
version, checksum mismatch, or a file shorter than its own records
claim. Tensors come back as float32 arrays in file order.
"""

from __future__ import annotations

import struct
import zlib
from typing import Dict

import numpy as np

from .errors import (
    BadMagicError,
    ChecksumError,
    ShapeError,
    TruncatedFileError,
    UnsupportedVersionError,
)

__all__ = ["write_tensors", "read_tensors", "MAGIC", "VERSION"]

MAGIC = b"NTTW"
VERSION = 1


def write_tensors(path, tensors: Dict[str, np.ndarray]) -> None:
    """Serialize named tensors. Values are converted to float32; insertion
    order of the dict is the file order, so writes are reproducible."""
    chunks = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, value in tensors.items():
        arr = np.ascontiguousarray(value, dtype=np.float32)
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ShapeError(f"tensor name too long ({len(encoded)} bytes)")
        if arr.ndim > 0xFF:
            raise ShapeError(f"tensor {name!r} has too many dimensions ({arr.ndim})")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    body = b"".join(chunks)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


class _Cursor:
    """Bounds-checked reader over the in-memory file body."""

    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFileError(
                f"{self.path}: file ends {self.pos + n - len(self.buf)} bytes short"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_tensors(path) -> Dict[str, np.ndarray]:
    """Load a tensor file, verifying magic, version, structure, and CRC.

    Structure is walked before the checksum so that a file cut short is
    reported as truncation, not as a checksum mismatch.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    cur = _Cursor(raw, path)
    cur.take(4)  # magic, already checked
    version, count = cur.unpack("<II")
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: version {version}, reader supports {VERSION}")
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = cur.unpack("<H")
        name = cur.take(name_len).decode("utf-8")
        (ndim,) = cur.unpack("<B")
        dims = cur.unpack(f"<{ndim}I") if ndim else ()
        n_elem = 1
        for d in dims:
            n_elem *= d
        data = np.frombuffer(cur.take(4 * n_elem), dtype="<f4").reshape(dims)
        tensors[name] = data.astype(np.float32, copy=True)
    trailer = cur.take(4)  # raises TruncatedFileError if the CRC field is missing
    if cur.pos != len(raw):
        raise ChecksumError(f"{path}: {len(raw) - cur.pos} unexpected bytes after checksum")
    (stored_crc,) = struct.unpack("<I", trailer)
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError(f"{path}: CRC mismatch, file is corrupt")
    return tensors
