"""Binary envelope shared by all persisted models.

Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON
header, then the arrays listed in ``header["arrays"]`` as little-endian
float64 in order.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ParameterError

MAGIC = b"HIFCKPT1"
ENVELOPE_VERSION = 1


def write_envelope(path, header: dict, arrays: list) -> Path:
    header = dict(header)
    header["envelope_version"] = ENVELOPE_VERSION
    header["arrays"] = [list(np.shape(a)) for a in arrays]
    text = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    path = Path(path)
    path.write_bytes(MAGIC + struct.pack("<Q", len(text)) + text + blob)
    return path


def read_envelope(path) -> tuple:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ParameterError(f"{path} is not a model checkpoint")
    (n,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16 : 16 + n].decode("utf-8"))
    if header.get("envelope_version") != ENVELOPE_VERSION:
        raise ParameterError(f"unsupported checkpoint version {header.get('envelope_version')}")
    offset = 16 + n
    arrays = []
    for shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        a = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).astype(np.float64)
        arrays.append(a.reshape(shape))
        offset += 8 * count
    if offset != len(raw):
        raise ParameterError(f"{path} has trailing or missing bytes")
    return header, arrays
