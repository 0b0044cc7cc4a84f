"""Versioned binary container for trained models.

Layout: the 8-byte magic "IPODMDL1", a little-endian uint64 header length,
a UTF-8 JSON header describing the model kind, metadata and array manifest,
then each array's float32 little-endian payload in manifest order.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"IPODMDL1"
FORMAT_VERSION = 1


def save_model(path: str | Path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    """Write a model container; array order follows the dict's insertion order."""
    manifest = []
    payloads = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        manifest.append({"name": name, "shape": list(arr.shape)})
        payloads.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "meta": meta,
        "arrays": manifest,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for payload in payloads:
            fh.write(payload)


def load_model(path: str | Path) -> tuple[str, dict, dict[str, np.ndarray]]:
    """Read a model container back as (kind, meta, arrays as float64)."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < len(MAGIC) + 8:
        raise FormatError("file too short to be a model container", path=str(path))
    if data[: len(MAGIC)] != MAGIC:
        raise FormatError(f"bad magic: expected {MAGIC!r}", path=str(path))
    (header_len,) = struct.unpack("<Q", data[len(MAGIC) : len(MAGIC) + 8])
    header_start = len(MAGIC) + 8
    if header_start + header_len > len(data):
        raise FormatError("declared header length exceeds the file size", path=str(path))
    try:
        header = json.loads(data[header_start : header_start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable header: {exc}", path=str(path)) from None
    for key in ("format_version", "kind", "meta", "arrays"):
        if key not in header:
            raise FormatError(f"header is missing {key!r}", path=str(path))
    if header["format_version"] != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {header['format_version']!r}", path=str(path))

    arrays: dict[str, np.ndarray] = {}
    offset = header_start + header_len
    for item in header["arrays"]:
        name, shape = item["name"], tuple(item["shape"])
        count = 1
        for dim in shape:
            count *= dim
        nbytes = count * 4
        if offset + nbytes > len(data):
            raise FormatError(f"array {name!r} is truncated", path=str(path))
        flat = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        arrays[name] = flat.reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after the last array", path=str(path))
    return header["kind"], header["meta"], arrays


def file_hash(path: str | Path) -> str:
    """Hex sha256 of a file's bytes; pairs models with their embedding source."""
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()
