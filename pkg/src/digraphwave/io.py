"""
Embedding files and run manifests.

* CSV: ``node_id,c0,...,c{k-1}`` with ``%.17g`` values (exact round trip).
* Binary: ``DGWE`` magic, then little-endian u16 version, u64 n, u32 cols,
  u8 precision (0 = float64, 1 = float32), a column-tag table of
  ``(u8 orientation, u16 tau index, u16 t index, u8 part)`` records, and
  row-major values.
* A JSON sidecar next to each embedding with the configuration echo and
  the SHA-256 of the data file.
"""

from __future__ import annotations

import hashlib
import json
import os
import resource
import struct
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .embed import ColumnTag, EmbeddingMatrix
from .errors import GraphFormatError

EMB_MAGIC = b"DGWE"
EMB_VERSION = 1
_HEADER = "<HQIB"
_TAG = "<BHHB"
_ORIENT = ("normal", "transposed", "aggregated")
_PART = ("Re", "Im")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_embedding_csv(emb: EmbeddingMatrix, path, node_ids=None):
    data = np.asarray(emb.data, dtype=np.float64)
    ids = np.arange(data.shape[0]) if node_ids is None else np.asarray(node_ids)
    header = "node_id," + ",".join(f"c{i}" for i in range(data.shape[1]))
    table = np.column_stack([ids.astype(np.float64), data]) if data.size else ids[:, None]
    fmt = ["%d"] + ["%.17g"] * data.shape[1]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        np.savetxt(fh, table, fmt=fmt, delimiter=",", header=header, comments="")


def read_embedding_csv(path):
    """Return ``(node_ids, data)`` from an embedding CSV."""
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return raw[:, 0].astype(np.int64), raw[:, 1:]


def write_embedding_binary(emb: EmbeddingMatrix, path):
    data = np.ascontiguousarray(emb.data)
    precision = 1 if data.dtype == np.float32 else 0
    dtype = "<f4" if precision else "<f8"
    n, cols = data.shape
    if len(emb.column_tags) != cols:
        raise ValueError("column tag count does not match the embedding width")
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack(_HEADER, EMB_VERSION, n, cols, precision))
        for t in emb.column_tags:
            fh.write(struct.pack(_TAG, _ORIENT.index(t.orientation), t.tau_index, t.t_index,
                                 _PART.index(t.part)))
        fh.write(data.astype(dtype, copy=False).tobytes())


def read_embedding_binary(path) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != EMB_MAGIC:
        raise GraphFormatError("not an embedding file (bad magic)")
    version, n, cols, precision = struct.unpack_from(_HEADER, blob, 4)
    if version != EMB_VERSION:
        raise GraphFormatError(f"unsupported embedding version {version}")
    off = 4 + struct.calcsize(_HEADER)
    tags = []
    for _ in range(cols):
        o, s, q, p = struct.unpack_from(_TAG, blob, off)
        tags.append(ColumnTag(_ORIENT[o], s, q, _PART[p]))
        off += struct.calcsize(_TAG)
    dtype = np.dtype("<f4" if precision else "<f8")
    if len(blob) != off + n * cols * dtype.itemsize:
        raise GraphFormatError("embedding file truncated")
    data = np.frombuffer(blob, dtype, n * cols, off).reshape(n, cols).astype(dtype.newbyteorder("="))
    return EmbeddingMatrix(data, tags)


def write_embedding(emb: EmbeddingMatrix, path, fmt="csv", extra=None):
    """Write the embedding plus ``<path>.json`` sidecar; returns the sidecar dict."""
    if fmt == "csv":
        write_embedding_csv(emb, path)
    elif fmt == "bin":
        write_embedding_binary(emb, path)
    else:
        raise ValueError(f"unknown embedding format {fmt!r}")
    sidecar = {
        "format": fmt,
        "shape": list(emb.data.shape),
        "config": emb.config,
        "standardized": emb.mean is not None,
        "sha256": sha256_file(path),
    }
    if emb.mean is not None:
        sidecar["mean"] = np.asarray(emb.mean).tolist()
        sidecar["std"] = np.asarray(emb.std).tolist()
    sidecar.update(extra or {})
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
    return sidecar


def sidecar_path(path):
    return os.fspath(path) + ".json"


def verify_checksum(path):
    """True when the data file still matches the hash recorded in its sidecar."""
    with open(sidecar_path(path), encoding="utf-8") as fh:
        sidecar = json.load(fh)
    return sidecar.get("sha256") == sha256_file(path)


@dataclass
class RunManifest:
    command: str
    argv: list
    flags: dict
    seeds: list = field(default_factory=list)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    version: str = ""
    wall_time: float = 0.0
    peak_memory_mb: float = 0.0
    python: str = field(default_factory=lambda: sys.version.split()[0])

    def finish(self, started):
        self.wall_time = time.perf_counter() - started
        # ru_maxrss is reported in kilobytes on Linux
        self.peak_memory_mb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
        for p in list(self.outputs):
            if os.path.exists(p):
                self.outputs[p] = sha256_file(p)
        return self

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True, default=str)

    @classmethod
    def read(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))
