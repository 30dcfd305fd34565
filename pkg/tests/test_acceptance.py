"""End-to-end checks for the whole stack, each with a runtime budget.

Covers the gradient oracle, the protocol equivalences that determinism is
supposed to buy, the two benchmark behaviors (collaboration benefit and
forgetting mitigation), byte-level reproducibility of the CLI, and the
aggregation invariants.
"""

from __future__ import annotations

import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from silofed.cli import main
from silofed.config import load_config
from silofed.harness import ExperimentConfig, RunResult, TaskSpec, run_collaborative, run_experiment
from silofed.nn import Batch, HyperParams, ModelParams, ModelSpec, init_params, loss_and_grad
from silofed.protocol import RoundUpdate, aggregate

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

FD_STEP = 1e-5


def central_differences(params: ModelParams, batch: Batch) -> np.ndarray:
    """Finite-difference gradient of the batch loss, one coordinate at a time."""
    flat = params.flat.copy()
    fd = np.empty_like(flat)
    for j in range(flat.size):
        saved = flat[j]
        flat[j] = saved + FD_STEP
        plus, _ = loss_and_grad(ModelParams(params.spec, flat), batch)
        flat[j] = saved - FD_STEP
        minus, _ = loss_and_grad(ModelParams(params.spec, flat), batch)
        flat[j] = saved
        fd[j] = (plus - minus) / (2.0 * FD_STEP)
    return fd


class TestGradientOracle:
    def test_analytic_gradient_matches_central_differences(self):
        start = time.monotonic()
        rng = np.random.default_rng(20260815)
        worst = 0.0
        for hidden in ((32,), (64, 32)):
            for _ in range(25):
                d = int(rng.integers(2, 6))
                c = int(rng.integers(2, 5))
                activation = "relu" if rng.integers(2) else "tanh"
                spec = ModelSpec((d, *hidden, c), activation)
                seeded = init_params(spec, int(rng.integers(0, 2**32)))
                params = ModelParams(spec, seeded.flat + 0.1 * rng.standard_normal(spec.flat_size))
                n = int(rng.integers(1, 4))
                batch = Batch(rng.standard_normal((n, d)), rng.integers(0, c, size=n))
                _, grad = loss_and_grad(params, batch)
                fd = central_differences(params, batch)
                denom = np.maximum(np.maximum(np.abs(grad), np.abs(fd)), 1e-6)
                worst = max(worst, float(np.max(np.abs(grad - fd) / denom)))
        assert worst < 1e-4
        assert time.monotonic() - start < 10.0


def slot_trajectory(result: RunResult) -> list[bytes]:
    assert result.slot_params is not None
    return [p.flat.tobytes() for p in result.slot_params]


def small_rotated_config(**overrides) -> ExperimentConfig:
    fields = {
        "task": TaskSpec(kind="rotated", class_count=3, per_class=30, dim=2, spread=0.25),
        "hp": HyperParams(eta=0.2, tau=2, tau_prime=2, batch_size=4),
        "hidden": (8,),
        "total_slots": 12,
        "rounds_per_slot": 3,
    }
    fields.update(overrides)
    return ExperimentConfig(**fields)


class TestProtocolEquivalences:
    def test_all_strategies_collapse_under_full_connectivity(self):
        start = time.monotonic()
        config = small_rotated_config()
        for run_seed in (11, 22, 33):
            trajectories = [
                slot_trajectory(run_collaborative(config, strategy, run_seed, record_params=True))
                for strategy in ("ideal", "fedavg_dropout", "proxy")
            ]
            assert len(trajectories[0]) == 12
            assert trajectories[0] == trajectories[1] == trajectories[2]
        assert time.monotonic() - start < 60.0

    def test_full_coreset_proxy_matches_ideal_bitwise(self):
        start = time.monotonic()
        base = small_rotated_config(coreset_fraction=1.0, total_slots=8)
        with_drop = replace(base, drops=((1, 4),))
        ideal = run_collaborative(base, "ideal", 5, record_params=True)
        proxy = run_collaborative(with_drop, "proxy", 5, record_params=True)
        assert slot_trajectory(proxy) == slot_trajectory(ideal)
        assert time.monotonic() - start < 60.0


class TestCollaborationBenefit:
    def test_averaging_beats_isolated_training_on_rotated_clients(self):
        start = time.monotonic()
        config = load_config(str(CONFIG_DIR / "rotated_benefit.yaml"))
        metrics = run_experiment(config, strategies=("standalone", "ideal"))
        final = config.total_slots - 1
        means = {(m.strategy, m.client_id): m.acc_mean for m in metrics if m.slot == final}
        gaps = [means[("ideal", cid)] - means[("standalone", cid)] for cid in range(2)]
        assert max(gaps) >= 0.05
        assert min(gaps) >= -0.02
        assert time.monotonic() - start < 180.0


@pytest.fixture(scope="module")
def forgetting_run() -> tuple[dict[tuple[str, int, int], float], float, int]:
    """Shared strategy sweep on the split-class dropout scenario.

    Returns the (strategy, slot, client) -> mean accuracy table, the wall
    time the sweep took, and the slot count.
    """
    config = load_config(str(CONFIG_DIR / "split_forgetting.yaml"))
    start = time.monotonic()
    metrics = run_experiment(config, strategies=("ideal", "fedavg_dropout", "proxy"))
    elapsed = time.monotonic() - start
    table = {(m.strategy, m.slot, m.client_id): m.acc_mean for m in metrics}
    return table, elapsed, config.total_slots


class TestForgetting:
    def test_dropped_client_degrades_without_a_stand_in(self, forgetting_run):
        table, elapsed, total_slots = forgetting_run
        at_drop = table[("fedavg_dropout", 4, 0)]
        at_end = table[("fedavg_dropout", total_slots - 1, 0)]
        assert at_drop - at_end >= 0.20
        assert elapsed < 180.0

    def test_coreset_proxy_keeps_dropped_client_near_ideal(self, forgetting_run):
        table, elapsed, total_slots = forgetting_run
        final = total_slots - 1
        assert abs(table[("proxy", final, 0)] - table[("ideal", final, 0)]) <= 0.05
        assert elapsed < 180.0


class TestEndToEndDeterminism:
    def test_compare_command_is_byte_reproducible(self, tmp_path):
        start = time.monotonic()
        config = str(CONFIG_DIR / "smoke.yaml")
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(["compare", config, "--out", str(first)]) == 0
        assert main(["compare", config, "--out", str(second)]) == 0
        assert (first / "metrics.csv").read_bytes() == (second / "metrics.csv").read_bytes()
        assert time.monotonic() - start < 180.0


class TestAggregationProperties:
    def test_convexity_and_weight_scale_invariance(self):
        start = time.monotonic()
        spec = ModelSpec((3, 4, 3))
        rng = np.random.default_rng(8)
        for _ in range(1000):
            count = int(rng.integers(1, 7))
            flats = 10.0 * rng.standard_normal((count, spec.flat_size))
            weights = np.exp(rng.uniform(-7.0, 7.0, size=count))
            updates = [
                RoundUpdate(cid, ModelParams(spec, flats[cid]), float(weights[cid]), "client")
                for cid in range(count)
            ]
            combined = aggregate(updates)
            lo, hi = flats.min(axis=0), flats.max(axis=0)
            pad = 1e-12 * np.maximum(np.abs(lo), np.abs(hi))
            assert np.all(combined.flat >= lo - pad)
            assert np.all(combined.flat <= hi + pad)
            scale = float(np.exp(rng.uniform(-3.0, 3.0)))
            rescaled = aggregate(
                [replace(u, weight=u.weight * scale) for u in updates]
            )
            np.testing.assert_allclose(rescaled.flat, combined.flat, rtol=1e-12, atol=1e-12)
        assert time.monotonic() - start < 10.0
