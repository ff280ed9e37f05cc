"""Seeded linear sketching operators.

Four operator families, all reproducible from ``(dims, seed)`` alone:

* :class:`CountSketchSpec` -- one random sign per input coordinate,
  scattered into ``m`` rows; applies in one pass over nonzeros.
* :class:`SrhtSpec` -- subsampled randomized Hadamard transform
  ``(1/sqrt(r)) * P @ H @ D`` with the Hadamard factor applied by an
  in-place fast Walsh-Hadamard transform on the zero-padded input.
* :class:`ComposedSketch` -- SRHT after CountSketch, so a height-``n``
  input is crushed to ``m`` rows in input-sparsity time and then mixed.
* :class:`GaussianSketchSpec` -- i.i.d. ``N(0, 1/r)`` entries whose
  columns are regenerable in isolation from a counter-based stream, so
  sparse updates never require materializing the whole matrix.

Single-column actions are exposed for all specs, which is what makes
sparse updates to sketched state cheap: an update touching one input row
costs ``O(r)`` instead of a fresh sketch application.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .rng import counter_generator, generator, open_unit

__all__ = [
    "SketchDims",
    "sketch_dims",
    "fwht",
    "CountSketchSpec",
    "SrhtSpec",
    "ComposedSketch",
    "GaussianSketchSpec",
]


@dataclass(frozen=True)
class SketchDims:
    r: int
    m: int
    clamped: bool = False


def sketch_dims(
    d: int,
    n: int,
    alpha_eff: float,
    beta_prime: float,
    c_r: float = 1.0 / 64.0,
    c_m: float = 0.25,
) -> SketchDims:
    """Row counts for the composed sketch.

    ``r = ceil(c_r * d * log2(n/beta')**3 / alpha'**2)`` and
    ``m = ceil(c_m * (d**2 + d / (alpha'**2 * beta')))``.  If the formulas
    come out inverted (``r >= m``) the CountSketch width is clamped to
    ``2r`` and the result is flagged, since the composition must reduce
    dimension at each stage.
    """
    if not (0 < alpha_eff < 1):
        raise ValueError(f"alpha_eff must be in (0, 1), got {alpha_eff}")
    if not (0 < beta_prime < 1):
        raise ValueError(f"beta_prime must be in (0, 1), got {beta_prime}")
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    r = int(math.ceil(c_r * d * math.log2(n / beta_prime) ** 3 / alpha_eff**2))
    m = int(math.ceil(c_m * (d**2 + d / (alpha_eff**2 * beta_prime))))
    clamped = r >= m
    if clamped:
        m = 2 * r
    return SketchDims(r=r, m=m, clamped=clamped)


# ---------------------------------------------------------------------------
# Fast Walsh-Hadamard transform
# ---------------------------------------------------------------------------

def fwht(x: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along axis 0, in place.

    Length must be a power of two; ``fwht(fwht(x)) == len(x) * x`` exactly
    on integer inputs.  Returns the (mutated) input array.
    """
    x = np.asanyarray(x)
    n = x.shape[0]
    if n == 0 or (n & (n - 1)) != 0:
        raise ValueError(f"length must be a power of two, got {n}")
    buf = x if x.flags.c_contiguous else x.copy()
    h = 1
    while h < n:
        y = buf.reshape(n // (2 * h), 2, h, *buf.shape[1:])
        top = y[:, 0].copy()
        y[:, 0] += y[:, 1]
        y[:, 1] = top - y[:, 1]
        h *= 2
    if buf is not x:
        x[...] = buf
    return x


def _next_pow2(m: int) -> int:
    return 1 if m <= 1 else 1 << (m - 1).bit_length()


def _hadamard_rows(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Entries of the Sylvester Hadamard matrix at ``rows x cols``.

    ``H[i, j] = (-1)**popcount(i & j)``, matching :func:`fwht`.
    """
    parity = np.bitwise_count(np.bitwise_and(rows[:, None], cols[None, :])) & 1
    return 1.0 - 2.0 * parity.astype(np.float64)


# ---------------------------------------------------------------------------
# Specs
# ---------------------------------------------------------------------------

class CountSketchSpec:
    """Sign-hash sketch: coordinate ``i`` lands in row ``h[i]`` with sign ``sigma[i]``."""

    def __init__(self, n: int, m: int, seed: int):
        if n < 1 or m < 1:
            raise ValueError("dimensions must be positive")
        self.n = int(n)
        self.m = int(m)
        self.seed = int(seed)
        rng = generator(seed, 0xC5)
        self.h = rng.integers(0, m, size=n, dtype=np.int64)
        self.sigma = (rng.integers(0, 2, size=n, dtype=np.int64) * 2 - 1).astype(np.float64)

    def apply(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        if a.shape[0] != self.n:
            raise ValueError(f"input has {a.shape[0]} rows, spec expects {self.n}")
        if a.ndim == 1:
            return np.bincount(self.h, weights=self.sigma * a, minlength=self.m)
        out = np.zeros((self.m,) + a.shape[1:], dtype=np.float64)
        np.add.at(out, self.h, self.sigma[:, None] * a)
        return out


class SrhtSpec:
    """Subsampled randomized Hadamard transform on inputs of height ``m_in``.

    The input is zero-padded to the next power of two ``m_padded``; the ``r``
    output rows are sampled i.i.d. uniform with replacement.
    """

    def __init__(self, m_in: int, r: int, seed: int):
        if m_in < 1 or r < 1:
            raise ValueError("dimensions must be positive")
        self.m_in = int(m_in)
        self.m_padded = _next_pow2(m_in)
        if r > self.m_padded:
            raise ValueError(f"r={r} exceeds padded input dimension {self.m_padded}")
        self.r = int(r)
        self.seed = int(seed)
        rng = generator(seed, 0x58)
        self.rows = rng.integers(0, self.m_padded, size=r, dtype=np.int64)
        self.signs = (rng.integers(0, 2, size=self.m_padded, dtype=np.int64) * 2 - 1).astype(
            np.float64
        )
        self.scale = 1.0 / math.sqrt(r)

    def apply(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        if a.shape[0] != self.m_in:
            raise ValueError(f"input has {a.shape[0]} rows, spec expects {self.m_in}")
        buf = np.zeros((self.m_padded,) + a.shape[1:], dtype=np.float64)
        buf[: self.m_in] = self.signs[: self.m_in].reshape((-1,) + (1,) * (a.ndim - 1)) * a
        fwht(buf)
        return self.scale * buf[self.rows]

    def column(self, j: int) -> np.ndarray:
        if not (0 <= j < self.m_in):
            raise ValueError(f"column {j} out of range [0, {self.m_in})")
        return self.columns(np.array([j]))[:, 0]

    def columns(self, js: np.ndarray) -> np.ndarray:
        js = np.asarray(js, dtype=np.int64)
        return self.scale * self.signs[js][None, :] * _hadamard_rows(self.rows, js)


class ComposedSketch:
    """SRHT applied after CountSketch: heights chain ``n -> m -> r``."""

    def __init__(self, n: int, m: int, r: int, seed: int):
        self.n = int(n)
        self.m = int(m)
        self.r = int(r)
        self.seed = int(seed)
        self.cs = CountSketchSpec(n, m, seed)
        self.srht = SrhtSpec(m, r, seed + 1)

    def apply(self, a: np.ndarray) -> np.ndarray:
        return self.srht.apply(self.cs.apply(a))

    def column(self, i: int) -> np.ndarray:
        if not (0 <= i < self.n):
            raise ValueError(f"column {i} out of range [0, {self.n})")
        return self.cs.sigma[i] * self.srht.column(int(self.cs.h[i]))

    def columns(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        return self.cs.sigma[rows][None, :] * self.srht.columns(self.cs.h[rows])

    def apply_sparse(self, entries, width: int | None = None) -> np.ndarray:
        """Sketched increment for a sparse update.

        ``entries`` is a list of ``(row, value)`` pairs (vector update,
        returns shape ``(r,)``) or ``(row, col, value)`` triples (matrix
        update, returns shape ``(r, width)``).
        """
        return _apply_sparse(self, entries, width)


class GaussianSketchSpec:
    """Dense Gaussian sketch with column-addressable generation.

    Column ``i`` is reproduced bit-identically from ``(seed, i)`` alone via
    a counter-based uniform stream pushed through the normal inverse CDF.
    Entries are i.i.d. ``N(0, 1/r)``.
    """

    def __init__(self, n: int, r: int, seed: int):
        if n < 1 or r < 1:
            raise ValueError("dimensions must be positive")
        self.n = int(n)
        self.r = int(r)
        self.seed = int(seed)
        self._scale = 1.0 / math.sqrt(r)

    def column(self, i: int) -> np.ndarray:
        if not (0 <= i < self.n):
            raise ValueError(f"column {i} out of range [0, {self.n})")
        rng = counter_generator(self.seed, i)
        return ndtri(open_unit(rng, self.r)) * self._scale

    def columns(self, js) -> np.ndarray:
        js = np.asarray(js, dtype=np.int64)
        out = np.empty((self.r, js.size), dtype=np.float64)
        for pos, j in enumerate(js):
            out[:, pos] = self.column(int(j))
        return out

    def apply(self, a: np.ndarray, block: int = 512) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        if a.shape[0] != self.n:
            raise ValueError(f"input has {a.shape[0]} rows, spec expects {self.n}")
        vec = a.ndim == 1
        mat = a[:, None] if vec else a
        out = np.zeros((self.r, mat.shape[1]), dtype=np.float64)
        for start in range(0, self.n, block):
            stop = min(start + block, self.n)
            out += self.columns(np.arange(start, stop)) @ mat[start:stop]
        return out[:, 0] if vec else out

    def apply_sparse(self, entries, width: int | None = None) -> np.ndarray:
        return _apply_sparse(self, entries, width)


def _apply_sparse(spec, entries, width):
    entries = list(entries)
    matrix_update = width is not None or (bool(entries) and len(entries[0]) == 3)
    if not matrix_update:
        out = np.zeros(spec.r, dtype=np.float64)
        if not entries:
            return out
        rows = np.array([e[0] for e in entries], dtype=np.int64)
        vals = np.array([e[1] for e in entries], dtype=np.float64)
        if rows.min() < 0 or rows.max() >= spec.n:
            raise ValueError("update row out of range")
        return spec.columns(rows) @ vals
    if entries and len(entries[0]) != 3:
        raise ValueError("matrix updates need (row, col, value) triples")
    if width is None:
        width = max(e[1] for e in entries) + 1
    out = np.zeros((spec.r, width), dtype=np.float64)
    if not entries:
        return out
    rows = np.array([e[0] for e in entries], dtype=np.int64)
    cols = np.array([e[1] for e in entries], dtype=np.int64)
    vals = np.array([e[2] for e in entries], dtype=np.float64)
    if rows.min() < 0 or rows.max() >= spec.n:
        raise ValueError("update row out of range")
    if cols.min() < 0 or cols.max() >= width:
        raise ValueError("update column out of range")
    contrib = spec.columns(rows) * vals[None, :]
    np.add.at(out.T, cols, contrib.T)
    return out
