"""Writer for the NTTW tensor container.

Implemented from the documented format rather than borrowed from the
engine, so the two sides stay honest about the byte layout:

    magic   4 bytes  b"NTTW"
    version u32      1
    count   u32      number of tensors
    per tensor: name_len u16, UTF-8 name, ndim u8, ndim x u32 dims,
                float32 row-major data
    crc     u32      CRC-32 of every byte before this field

All integers little-endian.
"""

import struct
import zlib
from typing import Dict

import numpy as np

MAGIC = b"NTTW"
VERSION = 1


def write_tensors(path, tensors: Dict[str, np.ndarray]) -> None:
    """Write tensors in dict insertion order, values cast to float32."""
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, value in tensors.items():
        arr = np.ascontiguousarray(value, dtype="<f4")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack("<%dI" % arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))
