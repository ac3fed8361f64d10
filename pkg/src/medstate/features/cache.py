"""On-disk feature cache: one file per recording.

Byte layout (little-endian):

    bytes 0..5   magic b"MSFEAT"
    bytes 6..7   format version, uint16
    bytes 8..11  header length H, uint32
    bytes 12..   H bytes of UTF-8 JSON: {"kind", "dim", "num_frames",
                 "frame_period_ms", "history"}
    then         num_frames * dim float32 values, row-major
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .types import FeatureKind, FeatureMatrix

MAGIC = b"MSFEAT"
CACHE_FORMAT_VERSION = 1


def save_features(path, feat: FeatureMatrix) -> None:
    header = json.dumps(
        {
            "kind": feat.kind.value,
            "dim": feat.dim,
            "num_frames": feat.num_frames,
            "frame_period_ms": feat.frame_period_ms,
            "history": list(feat.history),
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", CACHE_FORMAT_VERSION, len(header)))
        fh.write(header)
        fh.write(feat.values.astype("<f4").tobytes())


def load_features(path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        magic = fh.read(6)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a feature cache file")
        version, header_len = struct.unpack("<HI", fh.read(6))
        if version != CACHE_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<f4")
    num_frames, dim = header["num_frames"], header["dim"]
    if data.size != num_frames * dim:
        raise ValueError(f"{path}: truncated payload")
    return FeatureMatrix(
        data.reshape(num_frames, dim).astype(np.float64),
        FeatureKind(header["kind"]),
        frame_period_ms=header["frame_period_ms"],
        history=tuple(header["history"]),
    )
