"""FeatureVector serialization: JSON lines, CSV, and a raw float32 binary."""

from __future__ import annotations

import csv
import io
import json
import struct
from typing import BinaryIO, Iterable, Sequence, TextIO

import numpy as np

from .patterns import FeatureVector

BIN_MAGIC = b"CVEC"
# magic, vector length, vector count
_HEADER = struct.Struct("<4sIQ")
FORMATS = ("json", "csv", "bin")


def _plain(values: np.ndarray) -> list:
    if values.dtype.kind in "iu":
        return [int(v) for v in values]
    return [float(v) for v in values]


def write_jsonl(vectors: Iterable[FeatureVector], fh: TextIO):
    for v in vectors:
        rec = {"id": v.id, "encoder": v.encoder, "d": v.d, "values": _plain(v.values)}
        fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_jsonl(fh: TextIO) -> list[FeatureVector]:
    out = []
    for line in fh:
        if line.strip():
            rec = json.loads(line)
            out.append(FeatureVector(np.asarray(rec["values"]), rec["encoder"], rec["d"], rec["id"]))
    return out


def write_csv(vectors: Sequence[FeatureVector], fh: TextIO):
    w = csv.writer(fh, lineterminator="\n")
    width = max((len(v) for v in vectors), default=0)
    w.writerow(["id", "encoder", "d"] + [f"v{i}" for i in range(width)])
    for v in vectors:
        w.writerow([v.id, v.encoder, v.d] + [repr(x) for x in _plain(v.values)])


def write_bin(vectors: Sequence[FeatureVector], fh: BinaryIO):
    """16-byte little-endian header then ``count * dim`` float32 values."""
    dims = {len(v) for v in vectors}
    if len(dims) > 1:
        raise ValueError(f"binary export needs equal vector lengths, got {sorted(dims)}")
    dim = dims.pop() if dims else 0
    fh.write(_HEADER.pack(BIN_MAGIC, dim, len(vectors)))
    if vectors:
        fh.write(np.stack([v.values for v in vectors]).astype("<f4").tobytes())


def read_bin(fh: BinaryIO) -> np.ndarray:
    magic, dim, count = _HEADER.unpack(fh.read(_HEADER.size))
    if magic != BIN_MAGIC:
        raise ValueError("not a clause-vector binary file")
    data = np.frombuffer(fh.read(4 * dim * count), dtype="<f4")
    return data.reshape(count, dim).astype(np.float32)


def dumps(vectors: Sequence[FeatureVector], fmt: str) -> bytes:
    if fmt == "bin":
        buf = io.BytesIO()
        write_bin(vectors, buf)
        return buf.getvalue()
    sbuf = io.StringIO()
    if fmt == "json":
        write_jsonl(vectors, sbuf)
    elif fmt == "csv":
        write_csv(vectors, sbuf)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return sbuf.getvalue().encode("utf-8")
