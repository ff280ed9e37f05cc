"""Adaptive ANN index: DP selection over many oblivious LSH copies.

The wrapper prepares ``k`` independently seeded LSH copies of one dataset.
Each query samples ``l`` copies with replacement, asks every sampled copy
for all near points it can find, sums the resulting 0/1 characteristic
vectors into a sparse count histogram, and reports the winner of a sparse
one-sided noisy argmax.  A final distance check converts a noisy winner
that is not genuinely near into NULL.  Because the released index is a
differentially private function of the copies' random bits, answers reveal
almost nothing about any copy's hash functions, which is what defeats
adaptive adversaries that try to learn and then dodge them.

Deletions are lazy: ids go to a global deletion list, sampled copies are
synchronized on demand at query time, and a full flush to all copies runs
once the list has grown by the block size ``theta``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import lsh as lsh_mod
from .mechanisms import (
    DpParams,
    MechanismDiagnostics,
    SparseCounts,
    ann_parameters,
    sparse_noisy_argmax,
)
from .rng import generator

__all__ = [
    "AnnAnswer",
    "AdaptiveAnnIndex",
    "QueryBudgetError",
    "build",
    "verify_sparsity",
]

_COPY_TAG = 0x10
_QUERY_TAG = 0x20


class QueryBudgetError(RuntimeError):
    """Raised when the query budget T is exhausted; answering further
    queries would break the privacy accounting."""


@dataclass(frozen=True)
class AnnAnswer:
    """A verified near neighbor: recomputed distance is always <= c*r."""

    id: int
    distance: float


class AdaptiveAnnIndex:
    """The robust index.  Operations require exclusive access: queries
    mutate internal state (copy synchronization, budget counter)."""

    def __init__(self, dataset, metric, c, r, s_bound, params: DpParams, seed, theta,
                 lsh_kwargs=None):
        self.dataset = dataset
        self.metric = metric
        self.c = float(c)
        self.r = float(r)
        self.s_bound = int(s_bound)
        self.params = params
        self.master_seed = int(seed)
        self.lsh_kwargs = dict(lsh_kwargs or {})
        self.theta = int(theta)
        if self.theta < 1:
            raise ValueError(f"theta must be positive, got {theta}")
        self.copies = [self._build_copy(i) for i in range(params.k)]
        self.global_deletion_list: list[int] = []
        self._deleted: set[int] = set()
        self.cursors = [0] * params.k
        self._last_flush_len = 0
        self.queries_answered = 0
        self.diag = MechanismDiagnostics()
        self.stats = {
            "queries": 0,
            "copies_consulted": 0,
            "candidates_examined": 0,
            "flush_events": 0,
            "synced_deletions": 0,
            "last_support_size": 0,
        }

    # -- construction ---------------------------------------------------------

    def _build_copy(self, i: int) -> lsh_mod.LshIndex:
        seed = int(generator(self.master_seed, _COPY_TAG, i).integers(0, 2**63))
        if self.metric == "hamming":
            return lsh_mod.build_hamming(self.dataset, self.c, int(self.r), seed,
                                         **self.lsh_kwargs)
        return lsh_mod.build_l2(self.dataset, self.c, self.r, seed, **self.lsh_kwargs)

    # -- deletion machinery -----------------------------------------------------

    def _sync_copy(self, i: int) -> None:
        pending = self.global_deletion_list[self.cursors[i]:]
        for point_id in pending:
            self.copies[i].delete(point_id)
        self.stats["synced_deletions"] += len(pending)
        self.cursors[i] = len(self.global_deletion_list)

    def delete_lazy(self, point_id: int) -> None:
        """Record a deletion; copies learn of it at sync or flush time."""
        point_id = int(point_id)
        if point_id in self._deleted:
            raise KeyError(f"id {point_id} already deleted")
        if not (0 <= point_id < self.dataset.n):
            raise KeyError(f"id {point_id} unknown")
        self.global_deletion_list.append(point_id)
        self._deleted.add(point_id)
        if len(self.global_deletion_list) - self._last_flush_len >= self.theta:
            self.flush_block()

    def flush_block(self) -> None:
        """Apply all pending deletions to every copy and advance cursors.

        For Euclidean copies the per-point projections were produced by one
        blocked matrix product at build time and are looked up here, so the
        flush is a pure bucket-maintenance pass.
        """
        for i in range(self.params.k):
            pending = self.global_deletion_list[self.cursors[i]:]
            if pending:
                self.copies[i].delete_many(pending)
                self.cursors[i] = len(self.global_deletion_list)
        if len(self.global_deletion_list) > self._last_flush_len:
            self.stats["flush_events"] += 1
        self._last_flush_len = len(self.global_deletion_list)

    # -- queries -----------------------------------------------------------------

    def query(self, v) -> AnnAnswer | None:
        """Answer one (possibly adaptive) near-neighbor query.

        Raises :class:`QueryBudgetError` once ``T`` queries have been
        answered.  Returns an :class:`AnnAnswer` whose recomputed distance
        is <= c*r, or ``None``.
        """
        if self.queries_answered >= self.params.T:
            raise QueryBudgetError(f"query budget T={self.params.T} exhausted")
        v = np.asarray(v)
        if v.shape[0] != self.dataset.d:
            raise ValueError(f"query has dimension {v.shape[0]}, index expects {self.dataset.d}")
        qrng = generator(self.master_seed, _QUERY_TAG, self.queries_answered)
        self.queries_answered += 1
        self.stats["queries"] += 1

        sampled = qrng.integers(0, self.params.k, size=self.params.l)
        self.stats["copies_consulted"] += int(sampled.size)
        for i in sorted(set(int(x) for x in sampled)):
            self._sync_copy(i)

        examined_before = sum(c.stats["candidates_examined"] for c in self.copies)
        per_copy: dict[int, list[tuple[int, float]]] = {}
        counts: dict[int, int] = {}
        for i in sampled:
            i = int(i)
            if i not in per_copy:
                per_copy[i] = self.copies[i].query_all(v)
            for point_id, _ in per_copy[i]:
                counts[point_id] = counts.get(point_id, 0) + 1
        self.stats["candidates_examined"] += (
            sum(c.stats["candidates_examined"] for c in self.copies) - examined_before
        )

        histogram = SparseCounts(self.dataset.n, counts)
        self.stats["last_support_size"] = histogram.support_size
        winner = sparse_noisy_argmax(histogram, self.params.eps_dp, qrng, self.diag)
        if winner in self._deleted:
            return None
        dist = float(self.dataset.distance(self.dataset.points[winner], v))
        if dist <= self.c * self.r:
            return AnnAnswer(id=winner, distance=dist)
        return None

    def greedy_match(self, arrivals) -> list[AnnAnswer | None]:
        """Greedy online matching: query each arrival, delete any match.

        Matched ids are pairwise distinct (each is deleted on match) and
        every matched pair has distance <= c*r.
        """
        arrivals = list(arrivals)
        if self.queries_answered + len(arrivals) > self.params.T:
            raise QueryBudgetError(
                f"{len(arrivals)} arrivals exceed remaining budget "
                f"{self.params.T - self.queries_answered}"
            )
        matches: list[AnnAnswer | None] = []
        for v in arrivals:
            answer = self.query(v)
            if answer is not None:
                self.delete_lazy(answer.id)
            matches.append(answer)
        return matches

    # -- instrumentation and persistence -------------------------------------------

    def instrumentation(self) -> dict:
        record = dict(self.stats)
        record.update({f"mech_{k}": v for k, v in self.diag.as_record().items()})
        return record

    def to_state(self) -> dict:
        """Serializable state: seeds and parameters only, never tables."""
        return {
            "format": "dpsearch-ann-v1",
            "metric": self.metric,
            "c": self.c,
            "r": self.r,
            "s_bound": self.s_bound,
            "master_seed": self.master_seed,
            "theta": self.theta,
            "lsh_kwargs": self.lsh_kwargs,
            "params": {
                "eps_dp": self.params.eps_dp,
                "l": self.params.l,
                "k": self.params.k,
                "T": self.params.T,
                "beta": self.params.beta,
            },
            "deletion_list": list(self.global_deletion_list),
            "cursors": list(self.cursors),
            "last_flush_len": self._last_flush_len,
            "queries_answered": self.queries_answered,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_state(), fh)

    @classmethod
    def from_state(cls, dataset, state: dict) -> "AdaptiveAnnIndex":
        """Rebuild deterministically from seeds, then replay deletions."""
        if state.get("format") != "dpsearch-ann-v1":
            raise ValueError("unrecognized index state format")
        params = DpParams(**state["params"])
        index = cls(
            dataset,
            state["metric"],
            state["c"],
            state["r"],
            state["s_bound"],
            params,
            state["master_seed"],
            state["theta"],
            state["lsh_kwargs"],
        )
        index.global_deletion_list = [int(x) for x in state["deletion_list"]]
        index._deleted = set(index.global_deletion_list)
        index._last_flush_len = int(state["last_flush_len"])
        index.queries_answered = int(state["queries_answered"])
        for i, cursor in enumerate(state["cursors"]):
            for point_id in index.global_deletion_list[:cursor]:
                index.copies[i].delete(point_id)
            index.cursors[i] = int(cursor)
        return index

    @classmethod
    def load(cls, dataset, path) -> "AdaptiveAnnIndex":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_state(dataset, json.load(fh))


def build(
    dataset,
    c: float,
    r: float,
    s_bound: int,
    T: int,
    beta: float,
    seed: int,
    metric: str = "hamming",
    params: DpParams | None = None,
    theta: int | None = None,
    eps_dp: float = 0.5,
    c_l: float = 4.0,
    lsh_kwargs: dict | None = None,
) -> AdaptiveAnnIndex:
    """Build the wrapper; ``(l, k)`` default to the closed-form sizing.

    The closed form is astronomically conservative at experiment scale, so
    ``params`` may carry explicit desk-scale ``(l, k)`` instead; everything
    else about the mechanism is unchanged.
    """
    if params is None:
        params = ann_parameters(s_bound, dataset.n, T, beta, eps_dp=eps_dp, c_l=c_l)
    if theta is None:
        theta = int(math.ceil(math.sqrt(params.k * dataset.d)))
    return AdaptiveAnnIndex(dataset, metric, c, r, s_bound, params, seed, theta, lsh_kwargs)


def verify_sparsity(dataset, c: float, r: float, chunk: int = 256) -> int:
    """Max over points of how many *other* points lie within distance 2cr.

    Exhaustive O(n^2 d) scan; harness-side diagnostic for checking the
    neighborhood-sparsity assumption on an instance.
    """
    n = dataset.n
    if n <= 1:
        return 0
    threshold = 2.0 * c * r
    worst = 0
    if isinstance(dataset, lsh_mod.HammingDataset):
        packed = dataset.packed
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            block = packed[start:stop]
            dists = np.bitwise_count(block[:, None, :] ^ packed[None, :, :]).sum(axis=2)
            within = (dists <= threshold).sum(axis=1) - 1   # drop self-distance
            worst = max(worst, int(within.max()))
        return worst
    pts = dataset.points
    sq = np.einsum("ij,ij->i", pts, pts)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = pts[start:stop]
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * block @ pts.T
        np.maximum(d2, 0.0, out=d2)
        within = (np.sqrt(d2) <= threshold).sum(axis=1) - 1
        worst = max(worst, int(within.max()))
    return worst
