"""Tests for the oblivious LSH indices."""

import math

import numpy as np
import pytest

from dpsearch import lsh
from dpsearch.harness.instances import planted_hamming, planted_l2
from dpsearch.rng import generator


def brute_force_within(dataset, q, radius):
    if isinstance(dataset, lsh.HammingDataset):
        dists = lsh.hamming_distances(dataset.packed, np.packbits(np.asarray(q, np.uint8)))
    else:
        dists = np.linalg.norm(dataset.points - np.asarray(q)[None, :], axis=1)
    return {int(i) for i in np.flatnonzero(dists <= radius)}


class TestDatasets:
    def test_hamming_validation(self):
        with pytest.raises(ValueError):
            lsh.HammingDataset(np.array([[0, 2]]))
        ds = lsh.HammingDataset(np.array([[0, 1, 1], [1, 0, 0]]))
        assert (ds.n, ds.d) == (2, 3)
        assert ds.distance(ds.points[0], ds.points[1]) == 3

    def test_euclidean_validation(self):
        with pytest.raises(ValueError):
            lsh.EuclideanDataset(np.array([[np.inf, 0.0]]))
        ds = lsh.EuclideanDataset(np.array([[0.0, 0.0], [3.0, 4.0]]))
        assert ds.distance(ds.points[0], ds.points[1]) == pytest.approx(5.0)


class TestBuildHamming:
    def test_rho_formula(self):
        # d=8, r=1, c=2: p1=0.875, p2=0.75
        rng = generator(1)
        ds = lsh.HammingDataset(rng.integers(0, 2, size=(16, 8), dtype=np.uint8))
        index = lsh.build_hamming(ds, 2.0, 1, seed=3)
        expected_rho = math.log(1 / 0.875) / math.log(1 / 0.75)
        assert index.rho == pytest.approx(expected_rho, rel=1e-12)
        assert index.kappa_len == math.ceil(math.log(16) / math.log(1 / 0.75))

    def test_cr_exceeding_d_rejected(self):
        ds = lsh.HammingDataset(generator(2).integers(0, 2, size=(8, 8), dtype=np.uint8))
        with pytest.raises(ValueError):
            lsh.build_hamming(ds, 4.0, 2, seed=0)

    def test_self_query_returns_self(self):
        pl = planted_hamming(500, 64, 2.0, 4, 1, seed=4)
        index = lsh.build_hamming(pl.dataset, 2.0, 4, seed=5)
        found = index.query_all(pl.dataset.points[123])
        assert any(i == 123 and dist == 0 for i, dist in found)

    def test_rebuild_determinism(self):
        pl = planted_hamming(200, 64, 2.0, 4, 1, seed=6)
        a = lsh.build_hamming(pl.dataset, 2.0, 4, seed=7)
        b = lsh.build_hamming(pl.dataset, 2.0, 4, seed=7)
        assert len(a.tables) == len(b.tables)
        for ta, tb in zip(a.tables, b.tables):
            assert ta.keys() == tb.keys()
            assert all(np.array_equal(ta[k], tb[k]) for k in ta)

    def test_planted_recall(self):
        pl = planted_hamming(2000, 128, 2.0, 8, 300, seed=8)
        index = lsh.build_hamming(pl.dataset, 2.0, 8, seed=9)
        hits = sum(
            any(i == pid for i, _ in index.query_all(q))
            for q, pid in zip(pl.queries, pl.planted_ids)
        )
        assert hits / 300 >= 0.9


class TestBuildL2:
    def test_self_query_returns_self(self):
        pl = planted_l2(500, 32, 2.0, 1.0, 1, seed=10)
        index = lsh.build_l2(pl.dataset, 2.0, 1.0, seed=11)
        found = index.query_all(pl.dataset.points[77])
        assert any(i == 77 for i, _ in found)

    def test_planted_recall(self):
        # spec-scale planted family; (kappa, L, w) frozen via c_tables=3, c_width=4
        pl = planted_l2(10_000, 64, 2.0, 1.0, 300, seed=12)
        index = lsh.build_l2(pl.dataset, 2.0, 1.0, seed=13)
        hits = sum(
            any(i == pid for i, _ in index.query_all(q))
            for q, pid in zip(pl.queries, pl.planted_ids)
        )
        assert hits / 300 >= 0.9

    def test_projection_preserves_distances(self):
        # JL step: 100 random pairs within (1 +- 0.15) of true distance
        rng = generator(14)
        pts = rng.normal(size=(200, 2048))
        ds = lsh.EuclideanDataset(pts)
        index = lsh.build_l2(ds, 2.0, 1.0, seed=15)
        proj = index._state["projected"]
        for _ in range(100):
            i, j = rng.choice(200, size=2, replace=False)
            true = np.linalg.norm(pts[i] - pts[j])
            approx = np.linalg.norm(proj[i] - proj[j])
            assert 0.85 * true <= approx <= 1.15 * true

    def test_collision_prob_formula(self):
        # sanity anchors: p(w/t -> inf) -> 1, monotone decreasing in t
        assert lsh.l2_collision_prob(4.0, 1e-9) == pytest.approx(1.0, abs=1e-6)
        probs = [lsh.l2_collision_prob(4.0, t) for t in (0.5, 1.0, 2.0, 4.0)]
        assert all(a > b for a, b in zip(probs, probs[1:]))


class TestQueryAll:
    def test_emptied_index_returns_nothing(self):
        ds = lsh.HammingDataset(generator(16).integers(0, 2, size=(6, 32), dtype=np.uint8))
        index = lsh.build_hamming(ds, 2.0, 2, seed=16)
        for i in range(6):
            index.delete(i)
        assert index.query_all(ds.points[0]) == []

    def test_distance_filter_empties_far_answers(self):
        ds = lsh.HammingDataset(
            np.concatenate([np.zeros((1, 16)), np.ones((1, 16))]).astype(np.uint8)
        )
        index = lsh.build_hamming(ds, 2.0, 2, seed=17)
        q = np.zeros(16, dtype=np.uint8)
        q[:9] = 1          # distance 9 and 7 from the two points, both > cr=4
        assert index.query_all(q) == []

    def test_never_returns_far_points(self):
        pl = planted_hamming(1000, 64, 2.0, 4, 50, seed=17)
        index = lsh.build_hamming(pl.dataset, 2.0, 4, seed=18)
        for q in pl.queries:
            near = brute_force_within(pl.dataset, q, 2.0 * 4)
            for i, dist in index.query_all(q):
                assert i in near
                assert dist <= 2.0 * 4

    def test_returned_subset_of_ball(self):
        # craft a query with exactly 3 points inside B(q, cr)
        rng = generator(19)
        base = rng.integers(0, 2, size=(300, 128), dtype=np.uint8)
        q = base[0].copy()
        base[1] = q.copy(); base[1][:3] ^= 1     # distance 3
        base[2] = q.copy(); base[2][:7] ^= 1     # distance 7
        ds = lsh.HammingDataset(base)
        index = lsh.build_hamming(ds, 2.0, 4, seed=20)
        ball = brute_force_within(ds, q, 8)
        assert len(ball) == 3
        found = {i for i, _ in index.query_all(q)}
        assert found <= ball

    def test_probe_budget_cap(self):
        pl = planted_hamming(500, 32, 2.0, 2, 5, seed=21)
        index = lsh.build_hamming(pl.dataset, 2.0, 2, seed=22)
        before = index.stats["candidates_examined"]
        index.query_all(pl.queries[0], probe_budget=3)
        assert index.stats["candidates_examined"] - before <= 3

    def test_dimension_mismatch(self):
        pl = planted_hamming(100, 32, 2.0, 2, 1, seed=23)
        index = lsh.build_hamming(pl.dataset, 2.0, 2, seed=24)
        with pytest.raises(ValueError):
            index.query_all(np.zeros(31, dtype=np.uint8))


class TestMutation:
    def test_insert_then_delete_round_trip(self):
        pl = planted_hamming(300, 64, 2.0, 4, 1, seed=25)
        index = lsh.build_hamming(pl.dataset, 2.0, 4, seed=26)
        new_point = pl.dataset.points[5].copy()
        new_point[:2] ^= 1
        index.insert(new_point, 300)
        found = {i for i, _ in index.query_all(new_point)}
        assert 300 in found
        index.delete(300)
        found = {i for i, _ in index.query_all(new_point)}
        assert 300 not in found
        assert not any((b == 300).any() for t in index.tables for b in t.values())

    def test_delete_clears_every_bucket(self):
        pl = planted_hamming(300, 64, 2.0, 4, 1, seed=27)
        index = lsh.build_hamming(pl.dataset, 2.0, 4, seed=28)
        index.delete(42)
        assert not any((b == 42).any() for t in index.tables for b in t.values())

    def test_delete_unique_near_neighbor_empties_answer(self):
        pl = planted_hamming(500, 128, 2.0, 8, 20, seed=29)
        index = lsh.build_hamming(pl.dataset, 2.0, 8, seed=30)
        q, pid = pl.queries[0], int(pl.planted_ids[0])
        near = brute_force_within(pl.dataset, q, 16)
        assert near == {pid}
        index.delete(pid)
        assert index.query_all(q) == []

    def test_double_delete_and_unknown(self):
        pl = planted_hamming(100, 32, 2.0, 2, 1, seed=31)
        index = lsh.build_hamming(pl.dataset, 2.0, 2, seed=32)
        index.delete(3)
        with pytest.raises(KeyError):
            index.delete(3)
        with pytest.raises(KeyError):
            index.insert(pl.dataset.points[0], 5)  # already present

    def test_l2_delete(self):
        pl = planted_l2(400, 32, 2.0, 1.0, 5, seed=33)
        index = lsh.build_l2(pl.dataset, 2.0, 1.0, seed=34)
        index.delete(17)
        assert not any((b == 17).any() for t in index.tables for b in t.values())
        found = {i for i, _ in index.query_all(pl.dataset.points[17])}
        assert 17 not in found
