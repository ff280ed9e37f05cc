"""Adaptive adversaries and the instances they attack.

Two adversaries are provided.  The bit-flip attack targets Hamming LSH
built over an instance with one *isolated* point ``z`` (all other points
at distance >= 2cr): it walks away from ``z`` one accepted flip batch at a
time, keeping batches the oracle tolerates, then spends its reserved
distance budget hunting for a small flip set that makes the oracle lose
``z`` entirely.  Against a single oblivious index that final state is a
genuine false negative; against an exhaustive-scan oracle it cannot exist,
and against the DP wrapper the hunt exhausts its query budget.

The regression adversary perturbs a least-squares instance in directions
correlated with the engine's own outputs, projecting each perturbed design
matrix back to the allowed condition number, which is the strongest simple
strategy the update model admits.

Both adversaries see engines only through their public query/update
surface and record every interaction in a :class:`Transcript`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .adaptive_ann import AnnAnswer
from .lsh import HammingDataset, LshIndex, hamming_distances
from .regression import RegUpdate, solve_least_squares
from .rng import generator

__all__ = [
    "Transcript",
    "IsolatedInstance",
    "InstanceError",
    "AttackResult",
    "make_isolated_instance",
    "attack_budget",
    "kms_attack",
    "regression_adversary",
    "exact_ann_oracle",
    "lsh_oracle",
]

_INSTANCE_TAG = 0x60
_ATTACK_TAG = 0x61
_REG_ADV_TAG = 0x62


class InstanceError(RuntimeError):
    """Instance construction failed its invariants after all retries."""


class Transcript:
    """Ordered record of (input, output) steps of one adversary interaction."""

    def __init__(self, max_len: int | None = None):
        self.steps: list[dict] = []
        self.max_len = max_len

    def record(self, kind: str, payload: dict) -> None:
        if self.max_len is not None and len(self.steps) >= self.max_len:
            raise ValueError(f"transcript exceeds its cap of {self.max_len} steps")
        self.steps.append({"t": len(self.steps), "kind": kind, **payload})

    def __len__(self) -> int:
        return len(self.steps)

    def queries(self) -> list[dict]:
        return [s for s in self.steps if s["kind"] == "query"]

    def to_lines(self) -> str:
        return "\n".join(json.dumps(step, sort_keys=True) for step in self.steps) + "\n"

    @classmethod
    def from_lines(cls, text: str) -> "Transcript":
        out = cls()
        for line in text.splitlines():
            if line.strip():
                out.steps.append(json.loads(line))
        return out


# ---------------------------------------------------------------------------
# Isolated instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IsolatedInstance:
    dataset: HammingDataset
    isolated_id: int
    c: float
    r: int


def make_isolated_instance(
    n: int, d: int, c: float, r: int, seed: int, retries: int = 100
) -> IsolatedInstance:
    """Hamming instance with a designated point at distance >= 2cr from all others.

    The other ``n - 1`` points are sampled inside a Hamming ball around a
    far-away center; isolation of ``z`` is verified exhaustively and the
    construction retried on failure.
    """
    if 2 * c * r >= d:
        raise ValueError(f"need 2*c*r < d, got {2 * c * r} >= {d}")
    margin = int(2 * c * r)
    cluster_radius = max(1, min(d // 8, (d // 2 - margin) // 2))
    for attempt in range(retries):
        rng = generator(seed, _INSTANCE_TAG, attempt)
        z = rng.integers(0, 2, size=d, dtype=np.uint8)
        center = z ^ 1  # complement: distance d from z
        flips = rng.random((n - 1, d)) < (cluster_radius / d)
        others = (center[None, :] ^ flips.astype(np.uint8)).astype(np.uint8)
        points = np.vstack([z[None, :], others])
        dataset = HammingDataset(points)
        dists = hamming_distances(dataset.packed[1:], dataset.packed[0])
        if dists.min() > margin:
            return IsolatedInstance(dataset=dataset, isolated_id=0, c=float(c), r=int(r))
    raise InstanceError(f"no isolated instance found in {retries} attempts")


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def exact_ann_oracle(dataset: HammingDataset, c: float, r: float):
    """Deterministic exhaustive-scan oracle: nearest point if within cr."""

    def query(v):
        qp = np.packbits(np.asarray(v, dtype=np.uint8))
        dists = hamming_distances(dataset.packed, qp)
        best = int(np.argmin(dists))
        if dists[best] <= c * r:
            return AnnAnswer(id=best, distance=float(dists[best]))
        return None

    return query


def lsh_oracle(index: LshIndex):
    """Single-answer view of a multi-answer LSH index (closest candidate)."""

    def query(v):
        found = index.query_all(v)
        if not found:
            return None
        best = min(found, key=lambda pair: pair[1])
        return AnnAnswer(id=best[0], distance=best[1])

    return query


# ---------------------------------------------------------------------------
# Bit-flip attack
# ---------------------------------------------------------------------------

@dataclass
class AttackResult:
    success: bool
    query: np.ndarray | None
    flips: int
    queries_used: int
    transcript: Transcript = field(repr=False, default_factory=Transcript)


def attack_budget(c: float, r: int, lam: int, c_a: float = 1.0) -> int:
    """Query budget ``ceil(c_a * log2(c*r) * lam)`` for complexity knob lam."""
    return int(math.ceil(c_a * math.log2(max(c * r, 2.0)) * lam))


def kms_attack(
    oracle,
    instance: IsolatedInstance,
    budget: int,
    seed: int,
    reserve: int | None = None,
) -> AttackResult:
    """Interactive bit-flip attack hunting a false negative near ``z``.

    Phase 1 commits random flip batches (sizes halving from r/2) that the
    oracle still answers with ``z``; such flips steadily shrink the set of
    hash tables that can see ``z`` while staying within distance budget.
    Phase 2 spends the reserved ``reserve`` flips probing for one batch
    whose addition makes the oracle return NULL; committing it yields a
    point within distance r of ``z`` that the oracle cannot find.  Success
    requires a final confirmation query at the final point.
    """
    dataset = instance.dataset
    z_id = instance.isolated_id
    z = dataset.points[z_id].astype(np.uint8)
    d = dataset.d
    r = int(instance.r)
    if reserve is None:
        reserve = max(2, r // 2)
    reserve = min(reserve, r)
    rng = generator(seed, _ATTACK_TAG)
    transcript = Transcript()
    queries_used = 0

    def ask(point: np.ndarray):
        nonlocal queries_used
        queries_used += 1
        answer = oracle(point)
        transcript.record(
            "query",
            {
                "dist_to_z": int(np.count_nonzero(point != z)),
                "answer_id": None if answer is None else int(answer.id),
            },
        )
        return answer

    q = z.copy()
    flipped: list[int] = []
    unflipped = list(range(d))
    batch_size = max(1, r // 2)

    # Phase 1: walk away from z on flips the oracle tolerates.
    phase1_budget = budget // 2
    while len(flipped) < r - reserve and queries_used < phase1_budget:
        size = min(batch_size, r - reserve - len(flipped))
        batch = rng.choice(len(unflipped), size=size, replace=False)
        coords = [unflipped[i] for i in batch]
        candidate = q.copy()
        candidate[coords] ^= 1
        answer = ask(candidate)
        if answer is not None and answer.id == z_id:
            q = candidate
            for coord in coords:
                unflipped.remove(coord)
                flipped.append(coord)
        else:
            batch_size = max(1, batch_size // 2)

    # Phase 2: hunt for a killing batch within the reserved distance.
    remaining = r - len(flipped)
    while queries_used < budget - 1 and remaining > 0:
        batch = rng.choice(len(unflipped), size=remaining, replace=False)
        coords = [unflipped[i] for i in batch]
        candidate = q.copy()
        candidate[coords] ^= 1
        answer = ask(candidate)
        if answer is None:
            q = candidate
            flipped.extend(coords)
            confirmation = ask(q)
            dist = int(np.count_nonzero(q != z))
            if confirmation is None and dist <= r:
                return AttackResult(True, q, dist, queries_used, transcript)
            return AttackResult(False, None, dist, queries_used, transcript)

    return AttackResult(False, None, len(flipped), queries_used, transcript)


# ---------------------------------------------------------------------------
# Regression adversary
# ---------------------------------------------------------------------------

def _clip_condition(u: np.ndarray, kappa_bound: float) -> np.ndarray:
    """Project a matrix to condition number <= kappa_bound by clipping
    singular values from below."""
    left, sv, right = np.linalg.svd(u, full_matrices=False)
    floor = sv[0] / kappa_bound
    if sv[-1] >= floor:
        return u
    return (left * np.maximum(sv, floor)) @ right


def regression_adversary(
    engine,
    problem,
    steps: int,
    kappa_bound: float,
    seed: int,
    mode: str = "U",
    magnitude: float = 0.05,
    sparsity: int | None = None,
) -> Transcript:
    """Drive an engine with output-correlated perturbations.

    Maintains its own ground-truth copy of ``(U, b)``; at each step it
    builds a perturbation from the engine's previous answer (rank-one
    ``u g^T`` for U-updates, residual-aligned for b-updates), projects the
    perturbed design matrix back to ``kappa <= kappa_bound``, pushes the
    update through the engine's public interface, queries, and records the
    answer together with exact-solver reference costs.
    """
    if mode not in ("U", "b"):
        raise ValueError(f"mode must be 'U' or 'b', got {mode!r}")
    u_true = problem.U.copy()
    b_true = problem.b.copy()
    rng = generator(seed, _REG_ADV_TAG)
    transcript = Transcript()
    g = solve_least_squares(u_true, b_true)

    for t in range(steps):
        if mode == "U":
            direction = rng.normal(size=u_true.shape[0])
            direction /= np.linalg.norm(direction)
            g_dir = g / max(np.linalg.norm(g), 1e-12)
            scale = magnitude * np.linalg.svd(u_true, compute_uv=False)[0]
            proposed = u_true + scale * np.outer(direction, g_dir)
            projected = _clip_condition(proposed, kappa_bound)
            if projected is proposed and hasattr(engine, "update_rank_one"):
                u_true = proposed
                engine.update_rank_one(scale * direction, g_dir)
                update_summary = {"kind": "U", "rank_one": True,
                                  "norm": float(abs(scale))}
            else:
                delta = projected - u_true
                u_true = projected
                engine.update(dense=delta, kind="U")
                update_summary = {"kind": "U", "rank_one": False,
                                  "norm": float(np.linalg.norm(delta))}
        else:
            residual = u_true @ g - b_true
            if sparsity is not None:
                coords = np.argsort(-np.abs(residual))[:sparsity]
            else:
                coords = np.arange(b_true.shape[0])
            vals = magnitude * residual[coords]
            entries = tuple((int(i), float(v)) for i, v in zip(coords, vals))
            b_true[coords] += vals
            engine.update(RegUpdate("b", entries))
            update_summary = {"kind": "b", "nnz": len(entries)}

        g = engine.query()
        x_star = solve_least_squares(u_true, b_true)
        opt_cost = float(np.linalg.norm(u_true @ x_star - b_true))
        got_cost = float(np.linalg.norm(u_true @ g - b_true))
        sv = np.linalg.svd(u_true, compute_uv=False)
        transcript.record(
            "query",
            {
                "update": update_summary,
                "solution": [float(v) for v in g],
                "opt_cost": opt_cost,
                "achieved_cost": got_cost,
                "kappa": float(sv[0] / sv[-1]),
            },
        )
    return transcript
