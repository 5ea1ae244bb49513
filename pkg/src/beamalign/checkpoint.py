"""Byte-stable checkpoint files.

Layout::

    b"BACKPT\\n"                      magic
    uint64 little-endian              header length in bytes
    header                            UTF-8 JSON, sorted keys
    payload                           concatenated little-endian float64 arrays

The header records format version, a config fingerprint, the update counter,
free-form metadata and, per array, its name, shape and byte offset. Nothing
time- or host-dependent is written, so save -> load -> save is byte-identical.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"BACKPT\n"
FORMAT_VERSION = 1


def fingerprint(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Checkpoint:
    arrays: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)
    update: int = 0
    config_fingerprint: str = ""
    format_version: int = FORMAT_VERSION

    def to_bytes(self) -> bytes:
        entries = []
        chunks = []
        offset = 0
        for name in sorted(self.arrays):
            a = np.asarray(self.arrays[name], dtype="<f8", order="C")
            entries.append({"name": name, "shape": list(a.shape), "offset": offset})
            chunks.append(a.tobytes())
            offset += a.nbytes
        header = {
            "format_version": self.format_version,
            "config_fingerprint": self.config_fingerprint,
            "update": int(self.update),
            "meta": self.meta,
            "arrays": entries,
        }
        hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        return MAGIC + struct.pack("<Q", len(hbytes)) + hbytes + b"".join(chunks)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        if not data.startswith(MAGIC):
            raise ValueError("not a checkpoint file (bad magic)")
        pos = len(MAGIC)
        (hlen,) = struct.unpack("<Q", data[pos:pos + 8])
        pos += 8
        header = json.loads(data[pos:pos + hlen].decode())
        if header["format_version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['format_version']}")
        payload = memoryview(data)[pos + hlen:]
        arrays = {}
        for e in header["arrays"]:
            count = int(np.prod(e["shape"])) if e["shape"] else 1
            a = np.frombuffer(payload, dtype="<f8", count=count, offset=e["offset"])
            arrays[e["name"]] = a.reshape(tuple(e["shape"])).astype(np.float64)
        return cls(arrays, header["meta"], header["update"], header["config_fingerprint"],
                   header["format_version"])

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(self.to_bytes())
        os.replace(tmp, path)
        return path

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        return cls.from_bytes(path.read_bytes())

    def subset(self, prefix: str) -> dict[str, np.ndarray]:
        """Arrays stored under ``prefix/``, with the prefix stripped."""
        p = prefix + "/"
        return {k[len(p):]: v for k, v in self.arrays.items() if k.startswith(p)}
