"""Adaptive sketched least-squares engines with private aggregation.

Three engines answer ``argmin_x ||U x - b||_2`` under adaptively chosen
turnstile updates to ``U`` or ``b``:

* :class:`AdaptiveRegDP` keeps ``k`` composed CountSketch+SRHT pairs,
  solves a sampled handful per query, and aggregates the solution vectors
  coordinate-wise with the DP private median.  The composed sketch's
  coordinate-wise (ell-infinity) error guarantee is what makes a
  per-coordinate median meaningful.
* :class:`AdaptiveRegPath` keeps a single seeded Gaussian sketch sized for
  a budget of distinguishable output sequences and rounds every answer to
  a finite output net, so a union bound over computation paths replaces
  privacy.
* :class:`AdaptiveRegPreconditioner` handles sparse label-only updates:
  it preconditions ``U`` once (sketch-QR), stores per-copy solve operators
  ``N_i = (S_i U P)^+``, keeps solved vectors incrementally, and restarts
  with fresh sketches every ``T`` updates.

All engines share :func:`solve_least_squares` and the update-stream file
formats at the bottom of the module.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .mechanisms import OutputGrid, private_median
from .rng import generator
from .sketch import ComposedSketch, GaussianSketchSpec, sketch_dims

__all__ = [
    "RegProblem",
    "RegUpdate",
    "reg_dp_sizing",
    "solve_least_squares",
    "AdaptiveRegDP",
    "AdaptiveRegPath",
    "AdaptiveRegPreconditioner",
    "QueryBudgetError",
    "read_update_stream",
    "write_update_stream",
]

_SPEC_TAG = 0x30
_QUERY_TAG = 0x31
_PRECOND_TAG = 0x33


class QueryBudgetError(RuntimeError):
    """Query budget exhausted; the engine's accounting covers T queries."""


@dataclass
class RegProblem:
    """Overdetermined least-squares instance with a condition-number cap."""

    U: np.ndarray
    b: np.ndarray
    kappa_bound: float = 1.0

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.U.ndim != 2 or self.b.ndim != 1 or self.U.shape[0] != self.b.shape[0]:
            raise ValueError("U must be n x d and b length n")
        if self.U.shape[0] < self.U.shape[1]:
            raise ValueError("need n >= d")
        if not (np.isfinite(self.U).all() and np.isfinite(self.b).all()):
            raise ValueError("entries must be finite")
        if self.kappa_bound < 1:
            raise ValueError("kappa_bound must be >= 1")

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def d(self) -> int:
        return self.U.shape[1]


@dataclass(frozen=True)
class RegUpdate:
    """One turnstile update: kind 'U' with (row, col, delta) triples or
    kind 'b' with (row, delta) pairs."""

    kind: str
    entries: tuple

    def __post_init__(self):
        if self.kind not in ("U", "b"):
            raise ValueError(f"kind must be 'U' or 'b', got {self.kind!r}")
        width = 3 if self.kind == "U" else 2
        for e in self.entries:
            if len(e) != width:
                raise ValueError(f"{self.kind}-update entries need {width} fields")


def reg_dp_sizing(
    d: int, T: int, beta: float, eps_dp: float, grid_size: int
) -> tuple[float, int, int]:
    """Closed-form sizing for the private-median engines.

    Returns ``(gamma, s_med, k)`` with
    ``gamma = (2/eps) * ln(T * d * grid_size / beta)``, ``s_med = ceil(100 * gamma)``
    and ``k = ceil(200 * 6 * s_med * eps * sqrt(2 * T * d * ln(100/beta)))``.
    """
    if d < 1 or T < 1 or grid_size < 1:
        raise ValueError("d, T and grid_size must be positive")
    if not (0 < beta < 1) or eps_dp <= 0:
        raise ValueError("need beta in (0, 1) and eps_dp > 0")
    gamma = (2.0 / eps_dp) * math.log(T * d * grid_size / beta)
    s_med = int(math.ceil(100.0 * gamma))
    k = int(
        math.ceil(
            200.0 * 6.0 * s_med * eps_dp * math.sqrt(2.0 * T * d * math.log(100.0 / beta))
        )
    )
    return gamma, s_med, k


def solve_least_squares(a: np.ndarray, y: np.ndarray, return_info: bool = False):
    """Minimum-norm least-squares solution via orthogonal factorization.

    Requires at least as many rows as columns.  With ``return_info`` the
    result also carries the numerical rank and a rank-deficiency flag.
    """
    a = np.asarray(a, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise ValueError(f"need r >= d, got shape {a.shape}")
    if y.shape[0] != a.shape[0]:
        raise ValueError("row-count mismatch between matrix and target")
    x, _, rank, _ = scipy.linalg.lstsq(a, y, lapack_driver="gelsd")
    if return_info:
        return x, {"rank": int(rank), "rank_deficient": bool(rank < a.shape[1])}
    return x


# ---------------------------------------------------------------------------
# Engine 1: coordinate-wise private median over k sketched copies
# ---------------------------------------------------------------------------

class AdaptiveRegDP:
    """k sketched copies, sampled solves, coordinate-wise private median.

    Default sizing follows the closed forms (``alpha' = alpha/kappa``,
    ``Gamma = (2/eps) ln(T d |grid| / beta)``, ``s_med = 100 Gamma``,
    ``k = ceil(200 * 6 * s_med * eps * sqrt(2 T d ln(100/beta)))``); all of
    them accept desk-scale overrides since the constants are conservative
    by orders of magnitude.
    """

    def __init__(
        self,
        problem: RegProblem,
        T: int,
        alpha: float,
        beta: float,
        seed: int,
        eps_dp: float = 0.5,
        beta_prime: float = 0.01,
        grid: OutputGrid | None = None,
        r: int | None = None,
        m: int | None = None,
        k: int | None = None,
        s_med: int | None = None,
        resketch_accessor=None,
        resketch_every: int = 1024,
    ):
        if not (0 < alpha < 1):
            raise ValueError(f"alpha must be in (0, 1), got {alpha}")
        if not (0 < beta < 1):
            raise ValueError(f"beta must be in (0, 1), got {beta}")
        if T < 1:
            raise ValueError("T must be positive")
        self.n, self.d = problem.n, problem.d
        # optional floating-point-drift control: re-sketch from ground truth
        # every resketch_every incremental updates; off by default
        self.resketch_accessor = resketch_accessor
        self.resketch_every = int(resketch_every)
        self.T = int(T)
        self.alpha = float(alpha)
        self.alpha_eff = float(alpha) / float(problem.kappa_bound)
        self.beta = float(beta)
        self.eps_dp = float(eps_dp)
        self.seed = int(seed)
        self.grid = grid if grid is not None else OutputGrid.geometric()

        if r is None or m is None:
            dims = sketch_dims(self.d, self.n, self.alpha_eff, beta_prime)
            r = dims.r if r is None else r
            m = dims.m if m is None else m
        self.r, self.m = int(r), int(m)
        _, s_med_formula, k_formula = reg_dp_sizing(
            self.d, self.T, self.beta, self.eps_dp, len(self.grid)
        )
        self.s_med = s_med_formula if s_med is None else int(s_med)
        self.k = k_formula if k is None else int(k)
        if self.s_med > self.k / 2:
            raise ValueError(
                f"s_med={self.s_med} violates the subsampling precondition s_med <= k/2={self.k / 2}"
            )

        self.specs = [
            ComposedSketch(self.n, self.m, self.r, self._spec_seed(i)) for i in range(self.k)
        ]
        self.sk_U = np.stack([spec.apply(problem.U) for spec in self.specs])
        self.sk_b = np.stack([spec.apply(problem.b) for spec in self.specs])
        self.queries_answered = 0
        self.updates_applied = 0
        self.last_query_info: dict | None = None

    def _spec_seed(self, i: int) -> int:
        return int(generator(self.seed, _SPEC_TAG, i).integers(0, 2**63))

    def update(self, upd: RegUpdate | None = None, dense=None, kind: str = "U") -> None:
        """Apply one turnstile update to every sketched copy.

        Either pass a :class:`RegUpdate` (sparse entries) or a dense delta
        array via ``dense`` with ``kind``.
        """
        if upd is None and dense is None:
            raise ValueError("update needs either a RegUpdate or a dense delta")
        if upd is not None:
            if upd.kind == "U":
                for i, spec in enumerate(self.specs):
                    self.sk_U[i] += spec.apply_sparse(upd.entries, width=self.d)
            else:
                for i, spec in enumerate(self.specs):
                    self.sk_b[i] += spec.apply_sparse(upd.entries)
        else:
            delta = np.asarray(dense, dtype=np.float64)
            if kind == "U":
                if delta.shape != (self.n, self.d):
                    raise ValueError("dense U-update must be n x d")
                for i, spec in enumerate(self.specs):
                    self.sk_U[i] += spec.apply(delta)
            elif kind == "b":
                if delta.shape != (self.n,):
                    raise ValueError("dense b-update must be length n")
                for i, spec in enumerate(self.specs):
                    self.sk_b[i] += spec.apply(delta)
            else:
                raise ValueError(f"unknown update kind {kind!r}")
        self.updates_applied += 1
        self._maybe_resketch()

    def _maybe_resketch(self) -> None:
        if self.resketch_accessor is None or self.updates_applied % self.resketch_every:
            return
        u_now, b_now = self.resketch_accessor()
        for i, spec in enumerate(self.specs):
            self.sk_U[i] = spec.apply(u_now)
            self.sk_b[i] = spec.apply(b_now)

    def update_rank_one(self, col_factor, row_factor) -> None:
        """Apply the U-update ``outer(col_factor, row_factor)``.

        Sketching a rank-one perturbation costs one vector sketch per copy
        instead of a full matrix application.
        """
        col_factor = np.asarray(col_factor, dtype=np.float64)
        row_factor = np.asarray(row_factor, dtype=np.float64)
        if col_factor.shape != (self.n,) or row_factor.shape != (self.d,):
            raise ValueError("rank-one factors must have shapes (n,) and (d,)")
        for i, spec in enumerate(self.specs):
            self.sk_U[i] += np.outer(spec.apply(col_factor), row_factor)
        self.updates_applied += 1
        self._maybe_resketch()

    def query(self) -> np.ndarray:
        """Sampled sketched solves, then a private median per coordinate."""
        if self.queries_answered >= self.T:
            raise QueryBudgetError(f"query budget T={self.T} exhausted")
        qrng = generator(self.seed, _QUERY_TAG, self.queries_answered)
        self.queries_answered += 1
        sampled = qrng.integers(0, self.k, size=self.s_med)
        cache: dict[int, np.ndarray] = {}
        for i in sampled:
            i = int(i)
            if i not in cache:
                cache[i] = solve_least_squares(self.sk_U[i], self.sk_b[i])
        solutions = np.stack([cache[int(i)] for i in sampled])     # (s_med, d)
        g = np.empty(self.d)
        for coord in range(self.d):
            g[coord] = private_median(solutions[:, coord], self.grid, self.eps_dp, qrng)
        self.last_query_info = {"sampled": sampled.copy(), "solutions": solutions, "g": g}
        return g

    def snapshot_state(self, U: np.ndarray, b: np.ndarray) -> dict:
        """Serializable state: seeds, parameters, and a raw (U, b) snapshot
        supplied by the caller (the engine itself stores only sketches)."""
        return {
            "format": "dpsearch-regdp-v1",
            "seed": self.seed,
            "T": self.T,
            "alpha": self.alpha,
            "beta": self.beta,
            "eps_dp": self.eps_dp,
            "r": self.r,
            "m": self.m,
            "k": self.k,
            "s_med": self.s_med,
            "queries_answered": self.queries_answered,
            "U": np.asarray(U).tolist(),
            "b": np.asarray(b).tolist(),
            "kappa_bound": self.alpha / self.alpha_eff,
        }

    @classmethod
    def from_snapshot(cls, state: dict, grid: OutputGrid | None = None) -> "AdaptiveRegDP":
        if state.get("format") != "dpsearch-regdp-v1":
            raise ValueError("unrecognized engine state format")
        problem = RegProblem(
            np.array(state["U"]), np.array(state["b"]), kappa_bound=state["kappa_bound"]
        )
        engine = cls(
            problem,
            state["T"],
            state["alpha"],
            state["beta"],
            state["seed"],
            eps_dp=state["eps_dp"],
            grid=grid,
            r=state["r"],
            m=state["m"],
            k=state["k"],
            s_med=state["s_med"],
        )
        engine.queries_answered = int(state["queries_answered"])
        return engine


# ---------------------------------------------------------------------------
# Engine 2: single Gaussian sketch with bounded computation paths
# ---------------------------------------------------------------------------

class AdaptiveRegPath:
    """One seeded Gaussian sketch sized for ``path_budget`` output bits,
    answers rounded onto the output grid.

    ``r = ceil(c_p * (d + path_budget + ln(1/beta)) / alpha**2)``.  The
    default path budget is ``d * ln(len(grid))``: the output net is the
    d-fold product of the grid.  Queries are deterministic given state.
    """

    def __init__(
        self,
        problem: RegProblem,
        alpha: float,
        beta: float,
        seed: int,
        path_budget: float | None = None,
        c_p: float = 0.25,
        r: int | None = None,
        grid: OutputGrid | None = None,
        query_budget: int | None = None,
    ):
        if not (0 < alpha < 1):
            raise ValueError(f"alpha must be in (0, 1), got {alpha}")
        if not (0 < beta < 1):
            raise ValueError(f"beta must be in (0, 1), got {beta}")
        self.n, self.d = problem.n, problem.d
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.seed = int(seed)
        self.grid = grid if grid is not None else OutputGrid.geometric()
        self.path_budget = (
            float(path_budget) if path_budget is not None else self.d * math.log(len(self.grid))
        )
        if r is None:
            r = int(math.ceil(c_p * (self.d + self.path_budget + math.log(1.0 / beta)) / alpha**2))
        self.r = max(int(r), self.d)
        self.spec = GaussianSketchSpec(self.n, self.r, int(generator(seed, _SPEC_TAG).integers(0, 2**63)))
        self.sk_U = self.spec.apply(problem.U)
        self.sk_b = self.spec.apply(problem.b)
        self.query_budget = query_budget
        self.queries_answered = 0
        self.last_rounding: dict | None = None

    def update(self, upd: RegUpdate | None = None, dense=None, kind: str = "U") -> None:
        if upd is None and dense is None:
            raise ValueError("update needs either a RegUpdate or a dense delta")
        if upd is not None:
            if upd.kind == "U":
                self.sk_U += self.spec.apply_sparse(upd.entries, width=self.d)
            else:
                self.sk_b += self.spec.apply_sparse(upd.entries)
            return
        delta = np.asarray(dense, dtype=np.float64)
        if kind == "U":
            self.sk_U += self.spec.apply(delta)
        elif kind == "b":
            self.sk_b += self.spec.apply(delta)
        else:
            raise ValueError(f"unknown update kind {kind!r}")

    def query(self) -> np.ndarray:
        """Solve the sketched problem, round to the output net."""
        if self.query_budget is not None and self.queries_answered >= self.query_budget:
            raise QueryBudgetError(f"query budget {self.query_budget} exhausted")
        self.queries_answered += 1
        x = solve_least_squares(self.sk_U, self.sk_b)
        g = self.grid.round_to(x)
        shift = g - x
        self.last_rounding = {
            "linf_shift": float(np.abs(shift).max()),
            "l2_shift": float(np.linalg.norm(shift)),
        }
        return g

    def snapshot_state(self, U: np.ndarray, b: np.ndarray) -> dict:
        """Seeds, parameters, and a caller-supplied raw (U, b) snapshot."""
        return {
            "format": "dpsearch-regpath-v1",
            "seed": self.seed,
            "alpha": self.alpha,
            "beta": self.beta,
            "path_budget": self.path_budget,
            "r": self.r,
            "query_budget": self.query_budget,
            "queries_answered": self.queries_answered,
            "U": np.asarray(U).tolist(),
            "b": np.asarray(b).tolist(),
        }

    @classmethod
    def from_snapshot(cls, state: dict, grid: OutputGrid | None = None) -> "AdaptiveRegPath":
        if state.get("format") != "dpsearch-regpath-v1":
            raise ValueError("unrecognized engine state format")
        problem = RegProblem(np.array(state["U"]), np.array(state["b"]))
        engine = cls(
            problem, state["alpha"], state["beta"], state["seed"],
            path_budget=state["path_budget"], r=state["r"], grid=grid,
            query_budget=state["query_budget"],
        )
        engine.queries_answered = int(state["queries_answered"])
        return engine


# ---------------------------------------------------------------------------
# Engine 3: preconditioned solve operators for sparse label shifts
# ---------------------------------------------------------------------------

class AdaptiveRegPreconditioner:
    """Sparse-label-shift engine: fixed ``U``, adaptive updates to ``b``.

    A sketch-QR preconditioner ``P`` makes ``U P`` well conditioned, per-copy
    solve operators ``N_i = (S_i U P)^+`` turn label updates into O(r d)
    work, and every ``T`` updates the sketches are regenerated from the
    current ``(U, b)``.  Queries are private medians of the stored solved
    vectors, mapped back through ``P``.
    """

    def __init__(
        self,
        problem: RegProblem,
        T: int,
        alpha: float,
        beta: float,
        seed: int,
        eps_dp: float = 0.5,
        beta_prime: float = 0.01,
        c_pre: float = 3.0,
        grid: OutputGrid | None = None,
        r: int | None = None,
        m: int | None = None,
        k: int | None = None,
        s_med: int | None = None,
        s_max: int | None = None,
        query_budget: int | None = None,
    ):
        if not (0 < alpha < 1):
            raise ValueError(f"alpha must be in (0, 1), got {alpha}")
        if T < 1:
            raise ValueError("batch size T must be positive")
        self.problem = problem
        self.n, self.d = problem.n, problem.d
        self.T = int(T)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.eps_dp = float(eps_dp)
        self.seed = int(seed)
        self.c_pre = float(c_pre)
        self.s_max = s_max
        self.grid = grid if grid is not None else OutputGrid.geometric()

        if r is None or m is None:
            dims = sketch_dims(self.d, self.n, alpha, beta_prime)   # alpha' = alpha here
            r = dims.r if r is None else r
            m = dims.m if m is None else m
        self.r, self.m = int(r), int(m)
        _, s_med_formula, k_formula = reg_dp_sizing(
            self.d, self.T, self.beta, self.eps_dp, len(self.grid)
        )
        self.s_med = s_med_formula if s_med is None else int(s_med)
        self.k = k_formula if k is None else int(k)
        if self.s_med > self.k / 2:
            raise ValueError(
                f"s_med={self.s_med} violates the subsampling precondition s_med <= k/2={self.k / 2}"
            )

        self.b = problem.b.copy()
        self.P, self.kappa_up = self._build_preconditioner()
        self.counter = 0
        self.restarts = 0
        self.query_budget = query_budget
        self.queries_answered = 0
        self._build_copies()

    def _build_preconditioner(self):
        up = self.problem.U
        r0 = min(self.n, max(64, 8 * self.d))
        m0 = min(max(self.n, r0 + 1), max(4 * r0, 2 * self.d * self.d))
        for attempt in range(4):
            seed0 = int(generator(self.seed, _PRECOND_TAG, attempt).integers(0, 2**63))
            s0 = ComposedSketch(self.n, m0, r0, seed0)
            sketched = s0.apply(up)
            rr = np.linalg.qr(sketched, mode="r")
            if np.abs(np.diag(rr)).min() <= np.abs(np.diag(rr)).max() * 1e-12:
                raise np.linalg.LinAlgError("rank-deficient design matrix in preconditioning")
            p = scipy.linalg.solve_triangular(rr, np.eye(self.d))
            sv = np.linalg.svd(up @ p, compute_uv=False)
            kappa = float(sv[0] / sv[-1])
            if kappa <= self.c_pre:
                return p, kappa
        raise RuntimeError(
            f"preconditioner quality kappa(UP)={kappa:.3f} exceeded c_pre={self.c_pre} "
            "after 4 sketch draws"
        )

    def _build_copies(self) -> None:
        up = self.problem.U @ self.P
        self.specs = []
        self.solve_ops = np.empty((self.k, self.d, self.r))
        self.sk = np.empty((self.k, self.d))
        for i in range(self.k):
            seed_i = int(
                generator(self.seed, _SPEC_TAG, self.restarts, i).integers(0, 2**63)
            )
            spec = ComposedSketch(self.n, self.m, self.r, seed_i)
            self.specs.append(spec)
            n_i = np.linalg.pinv(spec.apply(up))
            self.solve_ops[i] = n_i
            self.sk[i] = n_i @ spec.apply(self.b)

    def update(self, upd: RegUpdate) -> None:
        """Apply one s-sparse update to b; restart on the T-th update."""
        if upd.kind != "b":
            raise ValueError("preconditioned engine accepts b-updates only")
        if self.s_max is not None and len(upd.entries) > self.s_max:
            raise ValueError(f"update has {len(upd.entries)} nonzeros, cap is {self.s_max}")
        rows = [int(e[0]) for e in upd.entries]
        vals = [float(e[1]) for e in upd.entries]
        if rows and (min(rows) < 0 or max(rows) >= self.n):
            raise ValueError("update row out of range")
        self.b[rows] += vals
        self.counter += 1
        if self.counter >= self.T:
            self.restarts += 1
            self.counter = 0
            self._build_copies()
            return
        for i, spec in enumerate(self.specs):
            self.sk[i] += self.solve_ops[i] @ spec.apply_sparse(upd.entries)

    def query(self) -> np.ndarray:
        """Private median of stored solved vectors, mapped through P."""
        if self.query_budget is not None and self.queries_answered >= self.query_budget:
            raise QueryBudgetError(f"query budget {self.query_budget} exhausted")
        qrng = generator(self.seed, _QUERY_TAG, self.queries_answered)
        self.queries_answered += 1
        sampled = qrng.integers(0, self.k, size=self.s_med)
        vectors = self.sk[sampled]                                  # (s_med, d)
        g_tilde = np.empty(self.d)
        for coord in range(self.d):
            g_tilde[coord] = private_median(vectors[:, coord], self.grid, self.eps_dp, qrng)
        return self.P @ g_tilde

    def snapshot_state(self) -> dict:
        """Seeds, parameters, and the engine's own raw (U, b) snapshot."""
        return {
            "format": "dpsearch-regprecond-v1",
            "seed": self.seed,
            "T": self.T,
            "alpha": self.alpha,
            "beta": self.beta,
            "eps_dp": self.eps_dp,
            "c_pre": self.c_pre,
            "r": self.r,
            "m": self.m,
            "k": self.k,
            "s_med": self.s_med,
            "s_max": self.s_max,
            "query_budget": self.query_budget,
            "queries_answered": self.queries_answered,
            "counter": self.counter,
            "restarts": self.restarts,
            "U": self.problem.U.tolist(),
            "b": self.b.tolist(),
        }

    @classmethod
    def from_snapshot(
        cls, state: dict, grid: OutputGrid | None = None
    ) -> "AdaptiveRegPreconditioner":
        if state.get("format") != "dpsearch-regprecond-v1":
            raise ValueError("unrecognized engine state format")
        problem = RegProblem(np.array(state["U"]), np.array(state["b"]))
        engine = cls(
            problem, state["T"], state["alpha"], state["beta"], state["seed"],
            eps_dp=state["eps_dp"], c_pre=state["c_pre"], grid=grid,
            r=state["r"], m=state["m"], k=state["k"], s_med=state["s_med"],
            s_max=state["s_max"], query_budget=state["query_budget"],
        )
        engine.queries_answered = int(state["queries_answered"])
        engine.counter = int(state["counter"])
        if int(state["restarts"]) != engine.restarts:
            # copy seeds depend on the restart counter; rebuild so future
            # regenerations continue the same seed sequence
            engine.restarts = int(state["restarts"])
            engine._build_copies()
        return engine


# ---------------------------------------------------------------------------
# Update-stream file formats
# ---------------------------------------------------------------------------

_STREAM_MAGIC = b"DPRU"


def write_update_stream(path, updates, binary: bool = False) -> None:
    """Persist a sequence of updates; text (one record per line) or binary."""
    updates = list(updates)
    if binary:
        with open(path, "wb") as fh:
            fh.write(_STREAM_MAGIC)
            fh.write(struct.pack("<Q", len(updates)))
            for upd in updates:
                kind = 0 if upd.kind == "U" else 1
                fh.write(struct.pack("<BI", kind, len(upd.entries)))
                for e in upd.entries:
                    if upd.kind == "U":
                        fh.write(struct.pack("<IId", int(e[0]), int(e[1]), float(e[2])))
                    else:
                        fh.write(struct.pack("<Id", int(e[0]), float(e[1])))
        return
    with open(path, "w", encoding="utf-8") as fh:
        for upd in updates:
            if upd.kind == "U":
                parts = [f"{int(r)}:{int(c)}:{v!r}" for r, c, v in upd.entries]
            else:
                parts = [f"{int(r)}:{v!r}" for r, v in upd.entries]
            fh.write(" ".join([upd.kind] + parts) + "\n")


def read_update_stream(path, binary: bool = False) -> list[RegUpdate]:
    if binary:
        out = []
        with open(path, "rb") as fh:
            if fh.read(4) != _STREAM_MAGIC:
                raise ValueError("bad update-stream magic")
            (count,) = struct.unpack("<Q", fh.read(8))
            for _ in range(count):
                kind_code, n_entries = struct.unpack("<BI", fh.read(5))
                kind = "U" if kind_code == 0 else "b"
                entries = []
                for _ in range(n_entries):
                    if kind == "U":
                        entries.append(struct.unpack("<IId", fh.read(16)))
                    else:
                        entries.append(struct.unpack("<Id", fh.read(12)))
                out.append(RegUpdate(kind, tuple(entries)))
        return out
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            kind = fields[0]
            if kind == "U":
                entries = tuple(
                    (int(r), int(c), float(v))
                    for r, c, v in (f.split(":") for f in fields[1:])
                )
            elif kind == "b":
                entries = tuple(
                    (int(r), float(v)) for r, v in (f.split(":") for f in fields[1:])
                )
            else:
                raise ValueError(f"line {line_no}: unknown update kind {kind!r}")
            out.append(RegUpdate(kind, entries))
    return out
