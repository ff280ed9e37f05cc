"""Tests for configuration, dataset files, instances, reports, and the CLI."""

import json
import math

import numpy as np
import pytest

from dpsearch import lsh, regression
from dpsearch.harness import config as C
from dpsearch.harness import datasets as D
from dpsearch.harness import instances as I
from dpsearch.harness import reports as REP
from dpsearch.harness.cli import main
from dpsearch.harness.experiments import run
from dpsearch.rng import generator


class TestConfig:
    def test_parse_full(self):
        text = """
        # attack experiment
        kind = attack
        seeds = 1, 2, 3
        trials = 500
        out = reports/attack.jsonl
        instance.n = 1024
        instance.d = 512
        instance.c = 2.0
        instance.r = 8
        instance.lam = 16
        constants.k = 96
        constants.l = 48
        """
        cfg = C.parse_config_text(text)
        assert cfg.kind == "attack"
        assert cfg.seeds == [1, 2, 3]
        assert cfg.trials == 500
        assert cfg.instance["n"] == 1024
        assert cfg.constants["l"] == 48
        assert cfg.out == "reports/attack.jsonl"

    def test_unknown_key_rejected_with_line(self):
        with pytest.raises(C.ConfigError, match="line 2"):
            C.parse_config_text("kind = synth\nbogus = 1\n")
        with pytest.raises(C.ConfigError, match="unknown instance key"):
            C.parse_config_text("kind = synth\ninstance.bogus = 1\n")
        with pytest.raises(C.ConfigError, match="unknown group"):
            C.parse_config_text("kind = synth\nwhat.n = 1\n")

    def test_missing_kind(self):
        with pytest.raises(C.ConfigError, match="missing"):
            C.parse_config_text("seeds = 1\n")

    def test_bad_line(self):
        with pytest.raises(C.ConfigError, match="expected"):
            C.parse_config_text("kind = synth\njust some words\n")

    def test_unknown_kind(self):
        with pytest.raises(C.ConfigError):
            C.parse_config_text("kind = wat\n")


class TestDatasetFiles:
    def test_hamming_binary_round_trip(self, tmp_path):
        pts = generator(1).integers(0, 2, size=(37, 19), dtype=np.uint8)
        ds = lsh.HammingDataset(pts)
        path = tmp_path / "data.bin"
        D.save_hamming(path, ds)
        back = D.load_hamming(path)
        assert np.array_equal(back.points, pts)

    def test_hamming_csv_round_trip(self, tmp_path):
        pts = generator(2).integers(0, 2, size=(10, 8), dtype=np.uint8)
        path = tmp_path / "data.csv"
        D.save_hamming(path, lsh.HammingDataset(pts))
        assert np.array_equal(D.load_hamming(path).points, pts)

    def test_l2_binary_round_trip(self, tmp_path):
        pts = generator(3).normal(size=(21, 5)).astype(np.float32).astype(np.float64)
        path = tmp_path / "data.bin"
        D.save_l2(path, lsh.EuclideanDataset(pts))
        back = D.load_l2(path)
        assert np.allclose(back.points, pts, atol=1e-7)

    def test_l2_csv_round_trip(self, tmp_path):
        pts = generator(4).normal(size=(6, 3))
        path = tmp_path / "data.csv"
        D.save_l2(path, lsh.EuclideanDataset(pts))
        assert np.allclose(D.load_l2(path).points, pts, atol=1e-12)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.bin"
        path.write_bytes(b"JUNKJUNKJUNK")
        with pytest.raises(ValueError):
            D.load_hamming(path)
        with pytest.raises(ValueError):
            D.load_l2(path)


class TestInstances:
    def test_planted_hamming_verified(self):
        pl = I.planted_hamming(800, 128, 2.0, 6, 40, seed=5)
        assert I.verify_planted(pl, 2.0, 6)

    def test_planted_l2_verified(self):
        pl = I.planted_l2(600, 32, 2.0, 1.0, 40, seed=6)
        assert I.verify_planted(pl, 2.0, 1.0)

    def test_kappa_instance_exact(self):
        problem, meta = I.kappa_instance(256, 8, 100.0, seed=7)
        sv = np.linalg.svd(problem.U, compute_uv=False)
        assert sv[0] / sv[-1] == pytest.approx(100.0, rel=1e-6)
        x = regression.solve_least_squares(problem.U, problem.b)
        assert np.allclose(x, meta["x_star"], atol=1e-8)
        cost = np.linalg.norm(problem.U @ x - problem.b)
        assert cost == pytest.approx(meta["opt_cost"], rel=1e-9)

    def test_radius_ladder_search(self):
        pts = generator(8).integers(0, 2, size=(64, 64), dtype=np.uint8)
        ds = lsh.HammingDataset(pts)
        ladder = I.radius_ladder(1.0, 5.0, 6)       # 1, 2.5, 6.25, ...
        level = I.radius_ladder_search(ds, pts[3], ladder)
        assert level == 0
        far = 1 - pts[3]
        assert I.radius_ladder_search(ds, far, [1.0, 2.0]) == -1
        # agreement with a linear scan
        rng = generator(9)
        for _ in range(20):
            q = rng.integers(0, 2, size=64, dtype=np.uint8)
            got = I.radius_ladder_search(ds, q, ladder)
            dists = lsh.hamming_distances(ds.packed, np.packbits(q))
            linear = next((i for i, rad in enumerate(ladder) if dists.min() <= rad), -1)
            assert got == linear

    def test_radius_ladder_growth_guard(self):
        with pytest.raises(ValueError):
            I.radius_ladder(1.0, 2.0, 4)

    def test_synth_files(self, tmp_path):
        meta = I.synth_instance(
            "planted-hamming", {"n": 64, "d": 32, "c": 2.0, "r": 2, "queries": 5},
            seed=10, out_dir=tmp_path,
        )
        assert (tmp_path / "planted_hamming_10.bin").exists()
        assert (tmp_path / "planted_hamming_10.meta.json").exists()
        back = D.load_hamming(tmp_path / "planted_hamming_10.bin")
        assert back.n == 64
        assert len(meta["planted_ids"]) == 5

    def test_synth_regression_sidecar(self, tmp_path):
        I.synth_instance("regression", {"n": 128, "d": 4, "kappa": 50.0}, seed=11,
                         out_dir=tmp_path)
        sidecar = json.loads((tmp_path / "regression_11.meta.json").read_text())
        assert sidecar["kappa"] == 50.0
        assert "x_star" in sidecar and "opt_cost" in sidecar
        data = np.load(tmp_path / "regression_11.npz")
        x = regression.solve_least_squares(data["U"], data["b"])
        assert np.allclose(x, sidecar["x_star"], atol=1e-8)

    def test_synth_isolated(self, tmp_path):
        meta = I.synth_instance("isolated", {"n": 32, "d": 128, "c": 2.0, "r": 4},
                                seed=12, out_dir=tmp_path)
        assert meta["isolated_id"] == 0


class TestReports:
    def test_write_read_and_determinism(self, tmp_path):
        cfg_text = "kind = dist-check\ntrials = 2000\nseeds = 5\n"

        def produce():
            cfg = C.parse_config_text(cfg_text)
            return run(cfg)

        rep1, rep2 = produce(), produce()
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        REP.write_report(rep1, p1)
        REP.write_report(rep2, p2)
        r1 = REP.strip_timings(REP.read_report(p1))
        r2 = REP.strip_timings(REP.read_report(p2))
        assert r1 == r2
        header = REP.read_report(p1)[0]
        assert header["config_echo"] == cfg_text

    def test_csv_export(self, tmp_path):
        rep = REP.Report(kind="synth", config_echo="")
        rep.add(seed=1, value=2.5)
        rep.add(seed=2, value=3.5, extra="x")
        path = REP.export_csv(rep, tmp_path / "out.csv")
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "seed,value,extra"
        assert len(lines) == 3


class TestCli:
    def test_dist_check_quick(self, tmp_path, capsys):
        out = tmp_path / "rep.jsonl"
        code = main(["dist-check", "--trials", "3000", "--seed", "3",
                     "--out", str(out)])
        assert code == 0                 # no --check: failures don't gate
        assert out.exists()
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert lines[0]["record"] == "header"
        assert any(l["record"] == "check" for l in lines)

    def test_check_gating_fails_on_tiny_trials(self, tmp_path):
        # TV thresholds are unreachable at 3000 trials, so --check must gate
        out = tmp_path / "rep.jsonl"
        code = main(["dist-check", "--trials", "3000", "--seed", "3",
                     "--out", str(out), "--check"])
        assert code == 1

    def test_synth_cli(self, tmp_path):
        cfg = tmp_path / "synth.conf"
        cfg.write_text(
            "kind = synth\nseeds = 4\ninstance.synth_kind = regression\n"
            "instance.n = 64\ninstance.d = 4\ninstance.kappa = 10\n"
            f"out = {tmp_path / 'synth_out'}\n"
        )
        code = main(["synth", "--config", str(cfg), "--check"])
        assert code == 0
        assert (tmp_path / "synth_out").exists()

    def test_kind_mismatch(self, tmp_path):
        cfg = tmp_path / "c.conf"
        cfg.write_text("kind = synth\n")
        assert main(["attack", "--config", str(cfg)]) == 2

    def test_csv_flag(self, tmp_path):
        out = tmp_path / "rep.jsonl"
        csv_path = tmp_path / "rep.csv"
        code = main(["dist-check", "--trials", "2000", "--seed", "1",
                     "--out", str(out), "--csv", str(csv_path)])
        assert code == 0
        assert csv_path.exists()

    def test_env_default_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DPSEARCH_OUT", str(tmp_path))
        code = main(["dist-check", "--trials", "2000", "--seed", "1"])
        assert code == 0
        assert (tmp_path / "dist-check.jsonl").exists()
