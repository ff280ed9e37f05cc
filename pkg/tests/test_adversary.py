"""Tests for the attack machinery and the regression adversary."""

import numpy as np
import pytest

from dpsearch import adversary as A
from dpsearch import lsh, regression
from dpsearch.harness.instances import kappa_instance
from dpsearch.mechanisms import OutputGrid
from dpsearch.rng import generator

SMALL_GRID = OutputGrid.geometric(tau=2.0**-6, g_min=2.0**-12, g_max=2.0**12)


class TestIsolatedInstance:
    def test_two_point_instance(self):
        inst = A.make_isolated_instance(2, 64, 2.0, 4, seed=1)
        z = inst.dataset.points[inst.isolated_id]
        other = inst.dataset.points[1 - inst.isolated_id]
        assert np.count_nonzero(z != other) >= 16

    def test_constructions_verify_exhaustively(self):
        for seed in range(100):
            inst = A.make_isolated_instance(128, 128, 2.0, 4, seed=seed)
            z = inst.dataset.packed[inst.isolated_id]
            others = np.delete(np.arange(inst.dataset.n), inst.isolated_id)
            dists = lsh.hamming_distances(inst.dataset.packed[others], z)
            assert dists.min() >= 2 * 2.0 * 4

    def test_isolated_point_has_no_overlaps(self):
        from dpsearch.adaptive_ann import verify_sparsity

        inst = A.make_isolated_instance(64, 128, 2.0, 4, seed=3)
        z = inst.dataset.packed[inst.isolated_id]
        others = np.delete(np.arange(inst.dataset.n), inst.isolated_id)
        within = (
            lsh.hamming_distances(inst.dataset.packed[others], z) <= 2 * 2.0 * 4
        ).sum()
        assert within == 0
        # the cluster points themselves may overlap; the instance-level
        # diagnostic just has to be consistent with that
        assert verify_sparsity(inst.dataset, 2.0, 4) >= 0

    def test_infeasible_parameters(self):
        with pytest.raises(ValueError):
            A.make_isolated_instance(16, 16, 2.0, 4, seed=0)


class TestAttack:
    def test_budget_formula(self):
        assert A.attack_budget(2.0, 8, 16) == 64        # log2(16) * 16
        assert A.attack_budget(2.0, 8, 16, c_a=2.0) == 128

    def test_exact_oracle_never_fooled(self):
        for seed in range(5):
            inst = A.make_isolated_instance(128, 256, 2.0, 8, seed=seed)
            oracle = A.exact_ann_oracle(inst.dataset, 2.0, 8)
            result = A.kms_attack(oracle, inst, budget=64, seed=seed)
            assert not result.success

    def test_oblivious_lsh_fooled(self):
        wins = 0
        for seed in range(10):
            inst = A.make_isolated_instance(512, 256, 2.0, 8, seed=seed)
            index = lsh.build_hamming(inst.dataset, 2.0, 8, seed=seed + 1)
            result = A.kms_attack(A.lsh_oracle(index), inst, budget=64, seed=seed)
            wins += result.success
            if result.success:
                z = inst.dataset.points[inst.isolated_id]
                # attack validity: the returned point is within r of z
                assert np.count_nonzero(result.query != z) <= 8
                # and the oracle genuinely misses it
                assert A.lsh_oracle(index)(result.query) is None
        assert wins >= 3

    def test_transcript_records_every_query(self):
        inst = A.make_isolated_instance(128, 256, 2.0, 8, seed=11)
        index = lsh.build_hamming(inst.dataset, 2.0, 8, seed=12)
        result = A.kms_attack(A.lsh_oracle(index), inst, budget=40, seed=13)
        assert len(result.transcript.queries()) == result.queries_used
        assert result.queries_used <= 40
        for step in result.transcript.queries():
            assert step["dist_to_z"] <= 8

    def test_transcript_serialization(self):
        tr = A.Transcript()
        tr.record("query", {"answer_id": 3})
        tr.record("query", {"answer_id": None})
        text = tr.to_lines()
        back = A.Transcript.from_lines(text)
        assert back.steps == tr.steps

    def test_transcript_cap(self):
        tr = A.Transcript(max_len=1)
        tr.record("query", {})
        with pytest.raises(ValueError):
            tr.record("query", {})


class TestRegressionAdversary:
    def test_zero_magnitude_is_oblivious(self):
        problem, _ = kappa_instance(256, 4, 2.0, 20)
        engine = regression.AdaptiveRegDP(problem, T=4, alpha=0.5, beta=0.1, seed=21,
                                          r=128, m=256, k=64, s_med=32, grid=SMALL_GRID)
        tr = A.regression_adversary(engine, problem, 4, kappa_bound=4.0, seed=22,
                                    mode="U", magnitude=0.0)
        for step in tr.queries():
            assert step["update"]["norm"] == 0.0

    def test_kappa_projection_enforced(self):
        problem, _ = kappa_instance(256, 4, 3.0, 23)
        engine = regression.AdaptiveRegDP(problem, T=8, alpha=0.5, beta=0.1, seed=24,
                                          r=192, m=512, k=128, s_med=64, grid=SMALL_GRID)
        tr = A.regression_adversary(engine, problem, 8, kappa_bound=4.0, seed=25,
                                    mode="U", magnitude=0.3)
        for step in tr.queries():
            assert step["kappa"] <= 4.0 + 1e-9

    def test_utility_under_attack(self):
        good = 0
        for seed in range(10):
            problem, _ = kappa_instance(512, 6, 3.0, 30 + seed)
            engine = regression.AdaptiveRegDP(problem, T=6, alpha=0.5, beta=0.1,
                                              seed=31 + seed,
                                              r=192, m=512, k=128, s_med=64,
                                              grid=SMALL_GRID)
            tr = A.regression_adversary(engine, problem, 6, kappa_bound=4.0,
                                        seed=32 + seed, mode="U")
            ratios = [s["achieved_cost"] / s["opt_cost"] for s in tr.queries()]
            good += all(x <= 1.5 for x in ratios)
        assert good >= 9

    def test_sparse_mode_respects_sparsity(self):
        problem, _ = kappa_instance(256, 4, 2.0, 40)
        engine = regression.AdaptiveRegPreconditioner(
            problem, T=8, alpha=0.5, beta=0.1, seed=41,
            r=128, m=256, k=64, s_med=32, s_max=3, grid=SMALL_GRID,
        )
        tr = A.regression_adversary(engine, problem, 5, kappa_bound=4.0, seed=42,
                                    mode="b", sparsity=3)
        for step in tr.queries():
            assert step["update"]["nnz"] <= 3

    def test_mode_validation(self):
        problem, _ = kappa_instance(128, 4, 2.0, 43)
        engine = regression.AdaptiveRegDP(problem, T=2, alpha=0.5, beta=0.1, seed=44,
                                          r=64, m=128, k=32, s_med=16, grid=SMALL_GRID)
        with pytest.raises(ValueError):
            A.regression_adversary(engine, problem, 2, 4.0, 45, mode="x")
