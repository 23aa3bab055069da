"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    offset  size  content
    0       8     magic b"CELETRIP"
    8       4     uint32 format version (currently 1)
    12      8     uint64 header length H in bytes
    20      H     UTF-8 JSON header
    20+H    ...   payload: float64 little-endian arrays, back to back

The header holds ``tensors``, a list of ``{"name", "shape", "offset"}``
records where ``offset`` counts bytes from the start of the payload and the
element count is the product of ``shape``; ``optimizer``, the Adam scalars
(``lr``, ``beta1``, ``beta2``, ``eps``, ``step``) whose moment arrays are
stored as tensors named ``adam.m/<param>`` and ``adam.v/<param>``; and a free
``metadata`` object (model configuration, tf-idf vocabulary, ...).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from celetrip.tensor import AdamState

MAGIC = b"CELETRIP"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    optimizer: AdamState | None = None
    metadata: dict = field(default_factory=dict)


def save_checkpoint(path: str | Path, params: Mapping[str, np.ndarray],
                    optimizer: AdamState | None = None, metadata: Mapping | None = None) -> None:
    arrays: list[tuple[str, np.ndarray]] = [(k, np.asarray(v, dtype="<f8")) for k, v in params.items()]
    opt = None
    if optimizer is not None:
        opt = {"lr": optimizer.lr, "beta1": optimizer.beta1, "beta2": optimizer.beta2,
               "eps": optimizer.eps, "step": optimizer.step}
        for k in optimizer.m:
            arrays.append((f"adam.m/{k}", np.asarray(optimizer.m[k], dtype="<f8")))
            arrays.append((f"adam.v/{k}", np.asarray(optimizer.v[k], dtype="<f8")))
    records, offset = [], 0
    for name, arr in arrays:
        records.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size * 8
    header = json.dumps({"tensors": records, "optimizer": opt, "metadata": dict(metadata or {})},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(header)))
        fh.write(header)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr).tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise CheckpointError("file too short for a checkpoint")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError("not a celetrip checkpoint (bad magic)")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    header = json.loads(data[_PREFIX.size:_PREFIX.size + hlen].decode("utf-8"))
    payload = memoryview(data)[_PREFIX.size + hlen:]
    tensors: dict[str, np.ndarray] = {}
    for rec in header["tensors"]:
        count = int(np.prod(rec["shape"], dtype=np.int64))
        start = rec["offset"]
        if start + count * 8 > len(payload):
            raise CheckpointError(f"tensor {rec['name']} runs past the end of the file")
        arr = np.frombuffer(payload[start:start + count * 8], dtype="<f8").astype(np.float64)
        tensors[rec["name"]] = arr.reshape(rec["shape"])
    params = {k: v for k, v in tensors.items() if not k.startswith("adam.")}
    opt = None
    if header.get("optimizer") is not None:
        o = header["optimizer"]
        opt = AdamState(lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"], step=o["step"])
        for k, v in tensors.items():
            if k.startswith("adam.m/"):
                opt.m[k[7:]] = v.copy()
            elif k.startswith("adam.v/"):
                opt.v[k[7:]] = v.copy()
    return Checkpoint(params, opt, header.get("metadata", {}))
