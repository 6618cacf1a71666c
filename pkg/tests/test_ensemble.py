"""Ensemble orchestration: seed hygiene, aggregation, order invariance."""

import math

import numpy as np
import pytest

from grwsim import (
    EmptyEnsembleError,
    ParameterError,
    aggregate,
    run_ensemble,
    wilson_interval,
)


def hand_wilson_half_width(phat: float, n: int, z: float = 1.959963984540054) -> float:
    # written out separately from the implementation, straight from the formula
    denom = 1.0 + z * z / n
    return z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom


class TestWilson:
    def test_frozen_half_width_ten_thousand(self):
        # by hand: n = 1e4, phat = 0.5 gives half-width ~ 0.0098
        low, high = wilson_interval(5000, 10000)
        half = (high - low) / 2.0
        assert half == pytest.approx(0.009798, abs=2e-6)
        assert half == pytest.approx(hand_wilson_half_width(0.5, 10000), abs=1e-12)

    def test_bounds_inside_unit_interval(self):
        for k, n in [(0, 10), (10, 10), (1, 2), (7, 30)]:
            low, high = wilson_interval(k, n)
            assert 0.0 <= low <= high <= 1.0

    def test_single_draw_interval_is_wide(self):
        low, high = wilson_interval(1, 1)
        assert high - low > 0.7

    def test_total_must_be_positive(self):
        with pytest.raises(ParameterError):
            wilson_interval(0, 0)


class TestAggregate:
    def test_identical_digests_zero_se(self):
        stats = aggregate([{"x": 2.5} for _ in range(20)])
        assert stats["x"]["mean"] == 2.5
        assert stats["x"]["se"] == 0.0

    def test_binary_keys_get_frequency_and_ci(self):
        digests = [{"hit": i % 2 == 0} for i in range(10000)]
        stats = aggregate(digests)
        assert stats["hit"]["frequency"] == 0.5
        low, high = stats["hit"]["ci95"]
        assert (high - low) / 2.0 == pytest.approx(0.009798, abs=2e-6)

    def test_empty_rejected(self):
        with pytest.raises(EmptyEnsembleError):
            aggregate([])

    def test_mixed_keys(self):
        stats = aggregate([{"v": float(i), "ok": True} for i in range(5)])
        assert stats["v"]["mean"] == 2.0
        assert stats["ok"]["frequency"] == 1.0
        assert stats["count"] == 5


class TestRunEnsemble:
    def test_single_trajectory_equals_its_digest(self):
        manifest = run_ensemble(lambda i, rng: {"v": 7.0}, 1, master_seed=0)
        assert manifest.statistics["v"]["mean"] == 7.0
        assert manifest.n_trajectories == 1

    def test_parallelism_does_not_change_results(self):
        def task(i, rng):
            return {"draw": float(rng.standard_normal()), "index": i}

        serial = run_ensemble(task, 64, master_seed=123, parallelism_hint=1)
        threaded = run_ensemble(task, 64, master_seed=123, parallelism_hint=8)
        assert serial.to_json() == threaded.to_json()

    def test_streams_are_distinct(self):
        manifest = run_ensemble(lambda i, rng: {"d": float(rng.random())},
                                32, master_seed=5)
        draws = [d["d"] for d in manifest.digests]
        assert len(set(draws)) == 32

    def test_same_master_seed_reproduces(self):
        task = lambda i, rng: {"d": float(rng.random())}
        a = run_ensemble(task, 16, master_seed=9)
        b = run_ensemble(task, 16, master_seed=9)
        assert a.to_json() == b.to_json()

    def test_failures_isolated_and_counted(self):
        def task(i, rng):
            if i == 3:
                raise ValueError("diverged")
            return {"v": 1.0}

        manifest = run_ensemble(task, 8, master_seed=0)
        assert len(manifest.digests) == 7
        assert len(manifest.failures) == 1
        assert manifest.failures[0][0] == 3
        assert "diverged" in manifest.failures[0][1]
        assert manifest.statistics["count"] == 7

    def test_all_failed_raises(self):
        def task(i, rng):
            raise RuntimeError("nope")

        with pytest.raises(EmptyEnsembleError):
            run_ensemble(task, 4, master_seed=0)

    def test_invalid_count(self):
        with pytest.raises(ParameterError):
            run_ensemble(lambda i, rng: {}, 0, master_seed=0)

    def test_born_frequency_ci_covers_half(self):
        def task(i, rng):
            return {"left": bool(rng.random() < 0.5)}

        manifest = run_ensemble(task, 10000, master_seed=77)
        low, high = manifest.statistics["left"]["ci95"]
        assert low <= 0.5 <= high

    def test_manifest_exports(self, tmp_path):
        manifest = run_ensemble(lambda i, rng: {"v": float(i), "ok": i % 2 == 0},
                                6, master_seed=1, parameter_hash="abc123")
        jpath = tmp_path / "manifest.json"
        cpath = tmp_path / "digests.csv"
        manifest.write_json(jpath)
        manifest.digests_to_csv(cpath)
        import json
        doc = json.loads(jpath.read_text())
        assert doc["parameter_hash"] == "abc123"
        assert doc["n_trajectories"] == 6
        lines = cpath.read_text().strip().splitlines()
        assert lines[0] == "index,v,ok"
        assert len(lines) == 7
