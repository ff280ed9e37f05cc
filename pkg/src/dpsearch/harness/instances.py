"""Synthetic instance constructors and exact-count diagnostics.

Planted ANN instances guarantee one point at the target distance per query
and everything else far; regression instances are built from an SVD with
chosen singular values so their condition number, optimum, and optimal
cost are known exactly and can be written to a sidecar for oracle-free
checking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..adversary import make_isolated_instance
from ..lsh import EuclideanDataset, HammingDataset, hamming_distances
from ..regression import RegProblem
from ..rng import generator
from . import datasets as dataset_io

_SYNTH_TAG = 0x70


@dataclass
class PlantedHamming:
    dataset: HammingDataset
    queries: np.ndarray          # (q, d) bits
    planted_ids: np.ndarray      # (q,)


@dataclass
class PlantedL2:
    dataset: EuclideanDataset
    queries: np.ndarray
    planted_ids: np.ndarray


def planted_hamming(n: int, d: int, c: float, r: int, n_queries: int, seed: int) -> PlantedHamming:
    """Random bit dataset with queries planted at distance exactly r.

    At these sizes random points sit near mutual distance d/2, far above
    2cr; each query flips exactly r random bits of its planted point so it
    has that point at distance r and, overwhelmingly, nothing else within
    cr.
    """
    if c * r >= d / 2:
        raise ValueError("need c*r well below d/2 for a planted instance")
    rng = generator(seed, _SYNTH_TAG, 0)
    points = rng.integers(0, 2, size=(n, d), dtype=np.uint8)
    dataset = HammingDataset(points)
    ids = rng.integers(0, n, size=n_queries)
    queries = points[ids].copy()
    for row, point_id in enumerate(ids):
        coords = rng.choice(d, size=r, replace=False)
        queries[row, coords] ^= 1
    return PlantedHamming(dataset=dataset, queries=queries, planted_ids=ids)


def planted_l2(n: int, d: int, c: float, r: float, n_queries: int, seed: int) -> PlantedL2:
    """Points on a sphere of radius 4cr (pairwise far), queries at distance r."""
    rng = generator(seed, _SYNTH_TAG, 1)
    points = rng.normal(size=(n, d))
    points *= (4.0 * c * r) / np.linalg.norm(points, axis=1, keepdims=True)
    dataset = EuclideanDataset(points)
    ids = rng.integers(0, n, size=n_queries)
    offsets = rng.normal(size=(n_queries, d))
    offsets *= r / np.linalg.norm(offsets, axis=1, keepdims=True)
    return PlantedL2(dataset=dataset, queries=points[ids] + offsets, planted_ids=ids)


def verify_planted(planted, c: float, r: float) -> bool:
    """Exhaustive check: each query has its planted point within r and no
    other point within c*r."""
    dataset = planted.dataset
    for q, planted_id in zip(planted.queries, planted.planted_ids):
        if isinstance(dataset, HammingDataset):
            dists = hamming_distances(dataset.packed, np.packbits(q)).astype(float)
        else:
            dists = np.linalg.norm(dataset.points - q[None, :], axis=1)
        if dists[planted_id] > r * (1.0 + 1e-9):
            return False
        others = np.delete(dists, planted_id)
        if (others <= c * r).any():
            return False
    return True


def kappa_instance(
    n: int, d: int, kappa: float, seed: int, residual_scale: float = 0.5
) -> tuple[RegProblem, dict]:
    """Least-squares instance with exact condition number and known optimum.

    ``U = Q1 diag(sigma) Q2^T`` with log-spaced singular values in
    ``[1, kappa]``; ``b = U x* + residual`` with the residual orthogonal to
    the column space, so ``x*`` is the exact minimizer and the optimal cost
    is the residual norm.  Returns the problem plus sidecar metadata.
    """
    rng = generator(seed, _SYNTH_TAG, 2)
    q1, _ = np.linalg.qr(rng.normal(size=(n, d)))
    q2, _ = np.linalg.qr(rng.normal(size=(d, d)))
    sigma = np.logspace(0.0, math.log10(kappa), d)[::-1]
    u = (q1 * sigma) @ q2.T
    x_star = rng.normal(size=d)
    raw = rng.normal(size=n)
    residual = raw - q1 @ (q1.T @ raw)
    residual *= residual_scale * np.linalg.norm(u @ x_star) / np.linalg.norm(residual)
    b = u @ x_star + residual
    problem = RegProblem(u, b, kappa_bound=float(kappa))
    meta = {
        "n": n,
        "d": d,
        "kappa": float(kappa),
        "x_star": [float(v) for v in x_star],
        "opt_cost": float(np.linalg.norm(residual)),
    }
    return problem, meta


# ---------------------------------------------------------------------------
# Radius ladder search (harness diagnostic, exact counting)
# ---------------------------------------------------------------------------

def radius_ladder(r0: float, c: float, levels: int) -> list[float]:
    """Geometric ladder ``r0 * (c/2)**i``; needs c > 2 to actually grow."""
    if c <= 2:
        raise ValueError("ladder growth needs c > 2")
    return [r0 * (c / 2.0) ** i for i in range(levels)]


def radius_ladder_search(dataset, v, ladder: list[float]) -> int:
    """Smallest ladder index whose exact ball around v is nonempty, or -1.

    Binary search over the ladder using exhaustive distance counts; valid
    because the counts are monotone in the radius.
    """
    if isinstance(dataset, HammingDataset):
        dists = hamming_distances(dataset.packed, np.packbits(np.asarray(v, dtype=np.uint8)))
    else:
        dists = np.linalg.norm(dataset.points - np.asarray(v)[None, :], axis=1)
    if dists.min() > ladder[-1]:
        return -1
    lo, hi = 0, len(ladder) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if (dists <= ladder[mid]).any():
            hi = mid
        else:
            lo = mid + 1
    return lo


# ---------------------------------------------------------------------------
# File-producing synthesizer
# ---------------------------------------------------------------------------

def synth_instance(kind: str, params: dict, seed: int, out_dir) -> dict:
    """Write one synthetic instance to disk, returning the file manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if kind == "planted-hamming":
        inst = planted_hamming(
            params["n"], params["d"], params["c"], params["r"],
            params.get("queries", 100), seed,
        )
        base = out_dir / f"planted_hamming_{seed}"
        dataset_io.save_hamming(base.with_suffix(".bin"), inst.dataset)
        dataset_io.save_hamming(base.with_suffix(".q.bin"), HammingDataset(inst.queries))
        meta = {
            "kind": kind,
            "params": params,
            "seed": seed,
            "planted_ids": [int(i) for i in inst.planted_ids],
            "verified": verify_planted(inst, params["c"], params["r"]),
        }
    elif kind == "planted-l2":
        inst = planted_l2(
            params["n"], params["d"], params["c"], params["r"],
            params.get("queries", 100), seed,
        )
        base = out_dir / f"planted_l2_{seed}"
        dataset_io.save_l2(base.with_suffix(".bin"), inst.dataset)
        dataset_io.save_l2(base.with_suffix(".q.bin"), EuclideanDataset(inst.queries))
        meta = {
            "kind": kind,
            "params": params,
            "seed": seed,
            "planted_ids": [int(i) for i in inst.planted_ids],
            "verified": verify_planted(inst, params["c"], params["r"]),
        }
    elif kind == "isolated":
        inst = make_isolated_instance(
            params["n"], params["d"], params["c"], params["r"], seed
        )
        base = out_dir / f"isolated_{seed}"
        dataset_io.save_hamming(base.with_suffix(".bin"), inst.dataset)
        meta = {"kind": kind, "params": params, "seed": seed, "isolated_id": inst.isolated_id}
    elif kind == "regression":
        problem, sidecar = kappa_instance(params["n"], params["d"], params["kappa"], seed)
        base = out_dir / f"regression_{seed}"
        np.savez(base.with_suffix(".npz"), U=problem.U, b=problem.b)
        meta = {"kind": kind, "params": params, "seed": seed, **sidecar}
    else:
        raise ValueError(f"unknown synth kind {kind!r}")
    meta_path = base.with_suffix(".meta.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    meta["files"] = sorted(str(p) for p in out_dir.glob(base.name + "*"))
    return meta
