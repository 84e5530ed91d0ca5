"""Binary container for named arrays: simulation snapshots, restart files
and network checkpoints share it.

Layout (little endian): magic "SPHRLSNP", u32 version, u32 array count,
then per array a length-prefixed name, a length-prefixed dtype string, a
u64 element count and the raw payload; a CRC32 of everything before it
closes the file. Saving, loading and saving again is byte-identical.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"SPHRLSNP"
VERSION = 1


class SnapshotError(RuntimeError):
    pass


class SnapshotVersionError(SnapshotError):
    pass


class SnapshotChecksumError(SnapshotError):
    pass


def _encode(data: dict[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(data))]
    for name in data:  # preserves insertion order: stable bytes
        arr = np.ascontiguousarray(data[name])
        name_b = name.encode()
        dtype_b = arr.dtype.str.encode()
        payload = arr.tobytes()
        chunks.append(struct.pack("<H", len(name_b)))
        chunks.append(name_b)
        chunks.append(struct.pack("<H", len(dtype_b)))
        chunks.append(dtype_b)
        chunks.append(struct.pack("<Q", arr.size))
        chunks.append(payload)
    body = b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def save_snapshot(path, data: dict[str, np.ndarray]) -> None:
    """Write named arrays; multidimensional arrays are stored flat and the
    caller reshapes on load (shapes are implied by the simulation layout)."""
    Path(path).write_bytes(_encode(data))


def load_snapshot(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 12 or raw[: len(MAGIC)] != MAGIC:
        raise SnapshotError(f"{path}: not a snapshot file")
    body, crc_stored = raw[:-4], struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise SnapshotChecksumError(f"{path}: checksum mismatch (truncated or corrupt)")
    version, count = struct.unpack_from("<II", body, len(MAGIC))
    if version != VERSION:
        raise SnapshotVersionError(f"{path}: snapshot version {version}, expected {VERSION}")
    offset = len(MAGIC) + 8
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", body, offset)
        offset += 2
        name = body[offset: offset + nlen].decode()
        offset += nlen
        (dlen,) = struct.unpack_from("<H", body, offset)
        offset += 2
        dtype = np.dtype(body[offset: offset + dlen].decode())
        offset += dlen
        (size,) = struct.unpack_from("<Q", body, offset)
        offset += 8
        nbytes = size * dtype.itemsize
        out[name] = np.frombuffer(body[offset: offset + nbytes], dtype=dtype).copy()
        offset += nbytes
    return out


def pack_json(name: str, obj) -> tuple[str, np.ndarray]:
    """Store a JSON-serializable object (e.g. an RNG state) as a byte array."""
    return name, np.frombuffer(json.dumps(obj).encode(), dtype=np.uint8).copy()


def unpack_json(data: dict[str, np.ndarray], name: str):
    return json.loads(bytes(data[name].tobytes()).decode())
