"""Dataset file formats.

Binary layouts (little-endian):

* Hamming: magic ``DPH1``, uint64 n, uint64 d, then n rows of
  ``ceil(d/8)`` packed bit bytes.
* Euclidean: magic ``DPL1``, uint64 n, uint64 d, then row-major float32.

Files with a ``.csv`` suffix fall back to plain comma-separated rows of
0/1 integers (Hamming) or floats (Euclidean).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..lsh import EuclideanDataset, HammingDataset

_HAMMING_MAGIC = b"DPH1"
_L2_MAGIC = b"DPL1"


def save_hamming(path, dataset: HammingDataset) -> None:
    path = Path(path)
    if path.suffix == ".csv":
        np.savetxt(path, dataset.points, fmt="%d", delimiter=",")
        return
    with open(path, "wb") as fh:
        fh.write(_HAMMING_MAGIC)
        fh.write(struct.pack("<QQ", dataset.n, dataset.d))
        fh.write(np.ascontiguousarray(dataset.packed).tobytes())


def load_hamming(path) -> HammingDataset:
    path = Path(path)
    if path.suffix == ".csv":
        return HammingDataset(np.loadtxt(path, delimiter=",", dtype=np.uint8, ndmin=2))
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _HAMMING_MAGIC:
            raise ValueError(f"bad magic {magic!r} for Hamming dataset {path}")
        n, d = struct.unpack("<QQ", fh.read(16))
        width = (d + 7) // 8
        packed = np.frombuffer(fh.read(n * width), dtype=np.uint8).reshape(n, width)
        bits = np.unpackbits(packed, axis=1)[:, :d]
        return HammingDataset(bits)


def save_l2(path, dataset: EuclideanDataset) -> None:
    path = Path(path)
    if path.suffix == ".csv":
        np.savetxt(path, dataset.points, delimiter=",")
        return
    with open(path, "wb") as fh:
        fh.write(_L2_MAGIC)
        fh.write(struct.pack("<QQ", dataset.n, dataset.d))
        fh.write(dataset.points.astype("<f4").tobytes())


def load_l2(path) -> EuclideanDataset:
    path = Path(path)
    if path.suffix == ".csv":
        return EuclideanDataset(np.loadtxt(path, delimiter=",", ndmin=2))
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _L2_MAGIC:
            raise ValueError(f"bad magic {magic!r} for Euclidean dataset {path}")
        n, d = struct.unpack("<QQ", fh.read(16))
        flat = np.frombuffer(fh.read(n * d * 4), dtype="<f4")
        return EuclideanDataset(flat.reshape(n, d).astype(np.float64))
