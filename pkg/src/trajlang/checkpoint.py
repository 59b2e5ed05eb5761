"""Checkpoint container: model config, named tensors, training metadata.

Layout: 4-byte magic, uint32 format version, uint64 header length, UTF-8
JSON header, then raw little-endian tensor payloads in header manifest
order.  Loading validates the manifest against the payload byte-for-byte;
shape/name validation against a live model happens in load_state_dict.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .model import ModelConfig

MAGIC = b"TJLC"
FORMAT_VERSION = 1

_DTYPES = {"float32": "<f4", "float64": "<f8"}


class CheckpointError(ValueError):
    """Corrupt, truncated, or incompatible checkpoint file."""


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)
    encoder: dict = field(default_factory=dict)


def save_checkpoint(path, config: ModelConfig, params: dict[str, np.ndarray],
                    metadata: dict | None = None,
                    encoder: dict | None = None) -> None:
    manifest = []
    payloads = []
    for name, arr in params.items():
        arr = np.asarray(arr)
        dtype_name = str(arr.dtype)
        if dtype_name not in _DTYPES:
            raise CheckpointError(f"tensor {name!r} has unsupported dtype {dtype_name}")
        data = np.ascontiguousarray(arr.astype(_DTYPES[dtype_name])).tobytes()
        manifest.append({"name": name, "shape": list(arr.shape),
                         "dtype": dtype_name, "nbytes": len(data)})
        payloads.append(data)
    header = json.dumps({
        "format_version": FORMAT_VERSION,
        "config": config.to_dict(),
        "metadata": metadata or {},
        "encoder": encoder or {},
        "tensors": manifest,
    }, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for data in payloads:
            f.write(data)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    version = struct.unpack_from("<I", blob, 4)[0]
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    header_len = struct.unpack_from("<Q", blob, 8)[0]
    header_end = 16 + header_len
    if header_end > len(blob):
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob[16:header_end].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}")
    params: dict[str, np.ndarray] = {}
    offset = header_end
    for entry in header["tensors"]:
        nbytes = entry["nbytes"]
        if offset + nbytes > len(blob):
            raise CheckpointError(f"{path}: truncated payload for tensor "
                                  f"{entry['name']!r}")
        arr = np.frombuffer(blob, dtype=_DTYPES[entry["dtype"]],
                            count=int(np.prod(entry["shape"], dtype=np.int64)),
                            offset=offset)
        params[entry["name"]] = arr.reshape(entry["shape"]).astype(entry["dtype"])
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return Checkpoint(config=ModelConfig.from_dict(header["config"]),
                      params=params,
                      metadata=header.get("metadata", {}),
                      encoder=header.get("encoder", {}))
