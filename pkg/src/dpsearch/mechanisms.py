"""Differentially private selection mechanisms and their noise primitives.

The selection core is a one-sided noisy argmax: add i.i.d. exponential
noise to a vector of nonnegative counts and report the index of the largest
noisy entry.  Two implementations are provided with *identical* output
distributions:

* :func:`dense_noisy_argmax` draws one noise variate per category, and
* :func:`sparse_noisy_argmax` touches only the support of the counts,
  using the maximum order statistic of all ``n`` noises plus conditioned
  batch resampling.

The module also houses the exponential-mechanism private median over a
finite output grid, and the closed-form privacy calculators (amplification
by subsampling, advanced composition, and the sample/copy sizing used by
the adaptive ANN wrapper).

All samplers are parameterized by *scale* (the mean of the exponential),
and all uniform variates are drawn from the open interval (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import open_unit

__all__ = [
    "SparseCounts",
    "DpParams",
    "MechanismDiagnostics",
    "OutputGrid",
    "exponential_from_uniform",
    "sample_exponential",
    "max_order_stat_from_uniform",
    "sample_max_order_stat",
    "dense_noisy_argmax",
    "sparse_noisy_argmax",
    "rejection_acceptance_probe",
    "private_median",
    "amplified_epsilon",
    "advanced_composition",
    "ann_parameters",
]


# ---------------------------------------------------------------------------
# Noise primitives
# ---------------------------------------------------------------------------

def exponential_from_uniform(scale: float, u):
    """Inverse-CDF transform: ``X = -scale * ln(1 - u)`` for ``u`` in (0, 1)."""
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return -scale * np.log1p(-np.asarray(u)) if np.ndim(u) else -scale * math.log1p(-u)


def sample_exponential(scale: float, rng: np.random.Generator, size=None):
    """Exponential variates with mean ``scale`` via the inverse CDF."""
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    u = open_unit(rng, size)
    if size is None:
        return -scale * math.log1p(-u)
    return -scale * np.log1p(-u)


def max_order_stat_from_uniform(n: int, scale: float, u):
    """Inverse CDF of the maximum of ``n`` i.i.d. exponentials at ``u``.

    ``X = -scale * ln(1 - u**(1/n))``; the ``n == 1`` branch reuses the
    plain exponential transform so both agree bit for bit.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    if n == 1:
        return exponential_from_uniform(scale, u)
    u = np.asarray(u, dtype=np.float64)
    # 1 - u**(1/n) via expm1 keeps precision when u**(1/n) approaches 1
    out = -scale * np.log(-np.expm1(np.log(u) / n))
    return float(out) if out.ndim == 0 else out


def sample_max_order_stat(n: int, scale: float, rng: np.random.Generator, size=None):
    """Draw the maximum of ``n`` i.i.d. exponentials in O(1) per variate."""
    u = open_unit(rng, size)
    return max_order_stat_from_uniform(n, scale, u)


# ---------------------------------------------------------------------------
# Counts and diagnostics
# ---------------------------------------------------------------------------

class SparseCounts:
    """Sparse nonnegative histogram over ``n`` categories.

    Stores only the support: ``indices`` (category ids in ``[0, n)``) and
    their positive integer ``counts``.
    """

    __slots__ = ("n", "indices", "counts")

    def __init__(self, n: int, entries=None):
        if n < 1:
            raise ValueError(f"domain size must be positive, got {n}")
        self.n = int(n)
        if entries is None:
            entries = {}
        if isinstance(entries, dict):
            items = sorted(entries.items())
            idx = np.array([i for i, _ in items], dtype=np.int64)
            cnt = np.array([c for _, c in items], dtype=np.int64)
        else:
            idx, cnt = entries
            idx = np.asarray(idx, dtype=np.int64)
            cnt = np.asarray(cnt, dtype=np.int64)
            order = np.argsort(idx)
            idx, cnt = idx[order], cnt[order]
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.n:
                raise ValueError("support index out of range")
            if np.any(np.diff(idx) == 0):
                raise ValueError("duplicate support index")
            if np.any(cnt < 1):
                raise ValueError("support counts must be >= 1")
        if idx.size > self.n:
            raise ValueError("support larger than domain")
        self.indices = idx
        self.counts = cnt

    @property
    def support_size(self) -> int:
        return int(self.indices.size)

    def densify(self) -> np.ndarray:
        dense = np.zeros(self.n, dtype=np.int64)
        dense[self.indices] = self.counts
        return dense


@dataclass
class MechanismDiagnostics:
    """Plain counters for the sparse mechanism's rejection loop."""

    calls: int = 0
    head_calls: int = 0
    tail_calls: int = 0
    batches_drawn: int = 0
    loops_run: int = 0  # calls whose conditioning batch was nonempty

    @property
    def resamples(self) -> int:
        return self.batches_drawn - self.loops_run

    @property
    def acceptance_rate(self) -> float:
        return self.loops_run / self.batches_drawn if self.batches_drawn else float("nan")

    def as_record(self) -> dict:
        return {
            "calls": self.calls,
            "head_calls": self.head_calls,
            "tail_calls": self.tail_calls,
            "batches_drawn": self.batches_drawn,
            "resamples": self.resamples,
            "acceptance_rate": self.acceptance_rate,
        }


# ---------------------------------------------------------------------------
# Noisy argmax, dense and sparse
# ---------------------------------------------------------------------------

def dense_noisy_argmax(counts, eps: float, rng: np.random.Generator) -> int:
    """Add i.i.d. ``Exp(1/eps)`` noise to every count, return the argmax.

    Ties break toward the lowest index (a measure-zero event for
    continuous noise, but floating point can collide).
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1 or counts.size == 0:
        raise ValueError("counts must be a non-empty vector")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    noise = sample_exponential(1.0 / eps, rng, counts.size)
    return int(np.argmax(counts + noise))


def _batch_below(rng, scale, size, ceiling, diag):
    """Draw ``size`` i.i.d. exponentials conditioned on all being <= ceiling.

    Las Vegas rejection: whole batches are redrawn until one is accepted.
    The loop is unbounded by design; falling back to a bounded scheme would
    perturb the output distribution.
    """
    if size == 0:
        return np.empty(0, dtype=np.float64)
    if diag is not None:
        diag.loops_run += 1
    while True:
        if diag is not None:
            diag.batches_drawn += 1
        batch = -scale * np.log1p(-open_unit(rng, size))
        if batch.max() <= ceiling:
            return batch


def sparse_noisy_argmax(
    counts: SparseCounts,
    eps: float,
    rng: np.random.Generator,
    diag: MechanismDiagnostics | None = None,
) -> int:
    """Noisy argmax touching only the support of ``counts``.

    Output distribution is identical to :func:`dense_noisy_argmax` on the
    densified vector.  The maximum of all ``n`` noises is drawn directly via
    its order-statistic inverse CDF; the remaining support noises are drawn
    conditioned to lie below it.  A coin with head probability ``s/n``
    decides whether the maximum noise lands inside the support.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    n = counts.n
    s = counts.support_size
    if s > n:
        raise ValueError("support larger than domain")
    scale = 1.0 / eps
    if diag is not None:
        diag.calls += 1

    if s == 0:
        # All-zero counts: the argmax is wherever the max noise lands.
        return int(rng.integers(0, n))

    head = rng.random() < s / n
    x_max = sample_max_order_stat(n, scale, rng)
    support_vals = counts.counts.astype(np.float64)

    if head:
        if diag is not None:
            diag.head_calls += 1
        below = _batch_below(rng, scale, s - 1, x_max, diag)
        noisy = support_vals.copy()
        slot = int(rng.integers(0, s))
        # conditioned batch entries are exchangeable, so only the slot of
        # the maximum needs randomizing
        noisy[slot] += x_max
        rest = np.delete(np.arange(s), slot)
        noisy[rest] += below
        return int(counts.indices[int(np.argmax(noisy))])

    if diag is not None:
        diag.tail_calls += 1
    below = _batch_below(rng, scale, s, x_max, diag)
    noisy = support_vals + below
    best = int(np.argmax(noisy))
    if x_max > noisy[best]:
        support = counts.indices
        while True:
            j = int(rng.integers(0, n))
            if not np.any(support == j):
                return j
    return int(counts.indices[best])


def rejection_acceptance_probe(
    n: int, s: int, batches: int, rng: np.random.Generator, scale: float = 2.0
) -> float:
    """Empirical acceptance rate of a fresh conditioning batch.

    For each trial, draw the ceiling from the max-of-``n`` distribution and
    one batch of ``s`` exponentials; accept when the whole batch lies below
    the ceiling.  The analytic acceptance probability is ``n / (n + s)``.
    """
    if n < 1 or s < 1 or batches < 1:
        raise ValueError("n, s and batches must be positive")
    x = sample_max_order_stat(n, scale, rng, batches)
    y = sample_max_order_stat(s, scale, rng, batches)
    return float(np.mean(y <= x))


# ---------------------------------------------------------------------------
# Output grid and private median
# ---------------------------------------------------------------------------

class OutputGrid:
    """Finite, sorted set of representable outputs for private selection.

    The default is a signed geometric grid ``{0} U {+-(1+tau)^j * g_min}``
    capped at ``g_max``, covering the magnitude range the regression
    engines assume for solution coordinates.
    """

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("grid must be a non-empty 1-D array")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid must be strictly ascending")
        self.points = pts

    @classmethod
    def geometric(cls, tau: float = 2.0**-8, g_min: float = 2.0**-30, g_max: float = 2.0**30):
        j_max = int(math.floor(math.log(g_max / g_min) / math.log1p(tau)))
        mags = g_min * (1.0 + tau) ** np.arange(j_max + 1)
        return cls(np.concatenate([-mags[::-1], [0.0], mags]))

    @classmethod
    def linear(cls, lo: float, hi: float, count: int):
        return cls(np.linspace(lo, hi, count))

    def __len__(self) -> int:
        return int(self.points.size)

    def nearest_index(self, values) -> np.ndarray:
        """Index of the closest grid point for each value (clamped at ends)."""
        v = np.atleast_1d(np.asarray(values, dtype=np.float64))
        hi = np.clip(np.searchsorted(self.points, v), 1, len(self) - 1)
        lo = hi - 1
        pick_hi = (self.points[hi] - v) < (v - self.points[lo])
        return np.where(pick_hi, hi, lo)

    def round_to(self, values):
        out = self.points[self.nearest_index(values)]
        return float(out[0]) if np.ndim(values) == 0 else out


def private_median(
    values, grid: OutputGrid, eps: float, rng: np.random.Generator
) -> float:
    """Exponential-mechanism median over a finite grid.

    Values are clamped to the grid; a grid point ``x`` is sampled with
    probability proportional to ``exp(-eps * |below(x) - above(x)| / 2)``
    where ``below``/``above`` count clamped values strictly on each side.
    The rank utility has sensitivity 1, so the mechanism is ``eps``-DP.
    With probability at least ``1 - beta`` the output has at least
    ``len(values)/2 - (2/eps) * ln(len(grid)/beta)`` values on each side.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("values must be non-empty")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    occupancy = np.bincount(grid.nearest_index(v), minlength=len(grid))
    cum = np.cumsum(occupancy)
    below = cum - occupancy          # strictly below each grid point
    above = v.size - cum             # strictly above
    logits = -0.5 * eps * np.abs(below - above)
    gumbel = -np.log(-np.log(open_unit(rng, len(grid))))
    return float(grid.points[int(np.argmax(logits + gumbel))])


def median_rank_bound(grid_size: int, eps: float, beta: float) -> float:
    """The rank-error bound Gamma = (2/eps) * ln(grid_size / beta)."""
    return (2.0 / eps) * math.log(grid_size / beta)


# ---------------------------------------------------------------------------
# Privacy calculators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DpParams:
    """Sizing of a DP-wrapped structure: per-mechanism budget and copy counts."""

    eps_dp: float
    l: int
    k: int
    T: int
    beta: float

    def __post_init__(self):
        if not (0 < self.eps_dp <= 1):
            raise ValueError(f"eps_dp must be in (0, 1], got {self.eps_dp}")
        if self.l < 1 or self.k < 1 or self.T < 1:
            raise ValueError("l, k and T must be positive")
        if self.l > self.k:
            raise ValueError(f"l={self.l} exceeds k={self.k}")
        if not (0 < self.beta < 1):
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")


def amplified_epsilon(l: int, k: int, eps: float) -> float:
    """Privacy after subsampling ``l`` of ``k`` rows with repetition: ``(6l/k) * eps``.

    Requires ``l <= k/2`` (the amplification theorem's precondition).
    """
    if l < 0 or k < 1:
        raise ValueError("need l >= 0 and k >= 1")
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    if l > k / 2:
        raise ValueError(f"l={l} violates the subsampling precondition l <= k/2={k / 2}")
    return (6.0 * l / k) * eps


def advanced_composition(
    folds: int, eps: float, delta: float, delta0: float
) -> tuple[float, float]:
    """k-fold adaptive composition: returns ``(eps_total, delta_total)``.

    ``eps_total = sqrt(2 * folds * ln(1/delta0)) * eps + 2 * folds * eps**2``
    and ``delta_total = delta0 + folds * delta``.
    """
    if folds < 1:
        raise ValueError(f"folds must be positive, got {folds}")
    if eps < 0 or delta < 0:
        raise ValueError("eps and delta must be nonnegative")
    if delta0 <= 0:
        raise ValueError(f"delta0 must be positive, got {delta0}")
    eps_total = math.sqrt(2.0 * folds * math.log(1.0 / delta0)) * eps + 2.0 * folds * eps**2
    return eps_total, delta0 + folds * delta


def ann_parameters(
    s: int,
    n: int,
    T: int,
    beta: float,
    eps_dp: float = 0.5,
    c_l: float = 4.0,
) -> DpParams:
    """Copy and sample sizing for the DP-selection ANN wrapper.

    ``l = c_l * s * ceil(log2(n/beta)**2)`` samples per query and
    ``k = ceil(200 * 6 * l * eps_dp * sqrt(2 * T * ln(100/beta)))`` total
    copies.  ``c_l`` is the one calibration constant the analysis leaves
    free; logs in ``l`` are base 2.
    """
    if s < 1 or n < 1 or T < 1:
        raise ValueError("s, n and T must be positive")
    if not (0 < beta < 1):
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    l = int(math.ceil(c_l * s * math.ceil(math.log2(n / beta) ** 2)))
    k = int(math.ceil(200.0 * 6.0 * l * eps_dp * math.sqrt(2.0 * T * math.log(100.0 / beta))))
    return DpParams(eps_dp=eps_dp, l=l, k=k, T=T, beta=beta)
