"""Versioned model checkpoints: a JSON header plus named float blobs.

Shared by the representation and policy trainers. Parameters are stored as
little-endian arrays under their state-dict names; scalars (temperature,
step counts) and configuration live in the header. A CRC32 footer guards
the whole file, mirroring the episode container.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"VTCK"
FORMAT_VERSION = 1

_DTYPE_CODES = {"f4": np.dtype("<f4"), "f8": np.dtype("<f8"), "i8": np.dtype("<i8")}


def save_checkpoint(path: str | Path, kind: str, header: dict,
                    blobs: dict[str, np.ndarray]) -> None:
    index = []
    payload_parts = []
    for name in sorted(blobs):
        arr = np.ascontiguousarray(blobs[name])
        if arr.dtype == np.float32:
            code = "f4"
        elif arr.dtype == np.float64:
            code = "f8"
        elif arr.dtype == np.int64:
            code = "i8"
        else:
            arr = arr.astype(np.float32)
            code = "f4"
        index.append([name, list(arr.shape), code])
        payload_parts.append(arr.astype(_DTYPE_CODES[code]).tobytes())

    doc = {"kind": kind, "header": header, "blobs": index}
    doc_bytes = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = [MAGIC, struct.pack("<H", FORMAT_VERSION),
           struct.pack("<I", len(doc_bytes)), doc_bytes, *payload_parts]
    payload = b"".join(out)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload + struct.pack("<I", crc))


def load_checkpoint(path: str | Path, expect_kind: str | None = None
                    ) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < 14 or raw[:4] != MAGIC:
        raise DataError(f"{path}: not a vtlab checkpoint")
    stored = struct.unpack("<I", raw[-4:])[0]
    if stored != (zlib.crc32(raw[:-4]) & 0xFFFFFFFF):
        raise DataError(f"{path}: checkpoint crc mismatch")
    version = struct.unpack("<H", raw[4:6])[0]
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: checkpoint version {version}, expected {FORMAT_VERSION}")
    doc_len = struct.unpack("<I", raw[6:10])[0]
    doc = json.loads(raw[10:10 + doc_len].decode("utf-8"))
    if expect_kind is not None and doc["kind"] != expect_kind:
        raise DataError(f"{path}: checkpoint kind '{doc['kind']}', expected '{expect_kind}'")

    blobs = {}
    pos = 10 + doc_len
    for name, shape, code in doc["blobs"]:
        dtype = _DTYPE_CODES[code]
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * dtype.itemsize
        if pos + nbytes > len(raw) - 4:
            raise DataError(f"{path}: blob '{name}' extends past end of file")
        blobs[name] = np.frombuffer(raw[pos:pos + nbytes], dtype=dtype).reshape(shape).copy()
        pos += nbytes
    return {"kind": doc["kind"], **doc["header"]}, blobs
