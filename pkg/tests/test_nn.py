"""Network core: shapes, hand-checked values, gradients, and training behavior.

The one-layer oracles are worked out on paper: with zero parameters the
softmax is uniform, so the loss is ln(class_count) and the gradient of a
single (x=1, label=0) sample is [-0.5, 0.5, -0.5, 0.5] in flat order
(W00, W01, b0, b1). One SGD step at eta 0.1 therefore lands exactly on
[0.05, -0.05, 0.05, -0.05].
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from silofed.nn import (
    ACTIVATIONS,
    Batch,
    HyperParams,
    ModelParams,
    ModelSpec,
    evaluate,
    init_params,
    loss_and_grad,
    predict_proba,
    sgd_steps,
)


def zero_params(spec: ModelSpec) -> ModelParams:
    return ModelParams(spec, np.zeros(spec.flat_size))


class TestModelSpec:
    def test_flat_size_counts_weights_and_biases(self):
        # 2*3 + 3 + 3*2 + 2
        assert ModelSpec((2, 3, 2)).flat_size == 17
        assert ModelSpec((1, 2)).flat_size == 4

    def test_rejects_short_or_invalid_sizes(self):
        with pytest.raises(ValueError, match="at least an input and an output"):
            ModelSpec((3,))
        with pytest.raises(ValueError, match="widths must be >= 1"):
            ModelSpec((2, 0, 2))

    def test_rejects_unknown_activation(self):
        with pytest.raises(ValueError, match="activation"):
            ModelSpec((2, 2), activation="sigmoid")

    def test_dims(self):
        spec = ModelSpec((5, 8, 4))
        assert spec.input_dim == 5
        assert spec.output_dim == 4


class TestModelParams:
    def test_rejects_wrong_length(self, tiny_spec):
        with pytest.raises(ValueError, match="expected flat shape"):
            ModelParams(tiny_spec, np.zeros(tiny_spec.flat_size + 1))

    def test_rejects_non_finite(self, tiny_spec):
        flat = np.zeros(tiny_spec.flat_size)
        flat[3] = np.nan
        with pytest.raises(ValueError, match="finite"):
            ModelParams(tiny_spec, flat)

    def test_is_immutable(self, tiny_params):
        with pytest.raises(AttributeError):
            tiny_params.flat = np.zeros(1)
        with pytest.raises(ValueError):
            tiny_params.flat[0] = 1.0

    def test_does_not_alias_input(self, tiny_spec):
        flat = np.zeros(tiny_spec.flat_size)
        params = ModelParams(tiny_spec, flat)
        flat[0] = 99.0
        assert params.flat[0] == 0.0

    def test_equality_is_bitwise(self, tiny_spec):
        a = ModelParams(tiny_spec, np.zeros(tiny_spec.flat_size))
        b = ModelParams(tiny_spec, np.zeros(tiny_spec.flat_size))
        c = ModelParams(tiny_spec, np.full(tiny_spec.flat_size, 1e-300))
        assert a == b
        assert a != c

    def test_layers_views(self):
        spec = ModelSpec((2, 3, 2))
        flat = np.arange(17, dtype=np.float64)
        layers = ModelParams(spec, flat).layers()
        assert [w.shape for w, _ in layers] == [(2, 3), (3, 2)]
        np.testing.assert_array_equal(layers[0][0], [[0, 1, 2], [3, 4, 5]])
        np.testing.assert_array_equal(layers[0][1], [6, 7, 8])
        np.testing.assert_array_equal(layers[1][1], [15, 16])


class TestBatchValidation:
    def test_batch_shape_mismatch(self):
        with pytest.raises(ValueError, match="labels shape"):
            Batch(np.zeros((3, 2)), np.zeros(2, dtype=int))

    def test_empty_features_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            Batch(np.zeros((0, 2)), np.zeros(0, dtype=int))

    def test_label_out_of_range_names_row(self, tiny_params):
        batch = Batch(np.zeros((3, 2)), np.array([0, 7, 1]))
        with pytest.raises(ValueError, match=r"label 7 at row 1"):
            loss_and_grad(tiny_params, batch)

    def test_width_mismatch(self, tiny_params):
        batch = Batch(np.zeros((2, 5)), np.array([0, 1]))
        with pytest.raises(ValueError, match="feature width 5"):
            loss_and_grad(tiny_params, batch)

    def test_nan_features_rejected(self, tiny_params):
        batch = Batch(np.array([[np.nan, 0.0]]), np.array([0]))
        with pytest.raises(ValueError, match="NaN or Inf"):
            loss_and_grad(tiny_params, batch)


class TestHyperParams:
    def test_eta_zero_allowed(self):
        hp = HyperParams(eta=0.0, tau=1, tau_prime=1, batch_size=1)
        assert hp.eta == 0.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"eta": -0.1, "tau": 1, "tau_prime": 1, "batch_size": 1},
            {"eta": float("nan"), "tau": 1, "tau_prime": 1, "batch_size": 1},
            {"eta": 0.1, "tau": 0, "tau_prime": 1, "batch_size": 1},
            {"eta": 0.1, "tau": 1, "tau_prime": 0, "batch_size": 1},
            {"eta": 0.1, "tau": 1, "tau_prime": 1, "batch_size": 0},
        ],
    )
    def test_invalid_fields_rejected(self, kwargs):
        with pytest.raises(ValueError):
            HyperParams(**kwargs)


class TestInit:
    def test_biases_zero_and_weights_bounded(self):
        spec = ModelSpec((4, 8, 3))
        params = init_params(spec, seed=5)
        for (w, b), (n_in, n_out) in zip(params.layers(), [(4, 8), (8, 3)]):
            limit = np.sqrt(6.0 / (n_in + n_out))
            assert np.abs(w).max() <= limit
            np.testing.assert_array_equal(b, np.zeros(n_out))

    def test_seed_determinism(self, tiny_spec):
        assert init_params(tiny_spec, 3) == init_params(tiny_spec, 3)
        assert init_params(tiny_spec, 3) != init_params(tiny_spec, 4)


class TestHandOracles:
    """Single-layer cases small enough to verify with pencil and paper."""

    def test_uniform_softmax_loss_is_log_class_count(self):
        for c in (2, 3, 5):
            spec = ModelSpec((2, c))
            batch = Batch(np.array([[0.3, -0.7]]), np.array([c - 1]))
            loss, _ = loss_and_grad(zero_params(spec), batch)
            assert loss == pytest.approx(np.log(c), abs=1e-12)

    def test_single_sample_gradient(self):
        spec = ModelSpec((1, 2))
        batch = Batch(np.array([[1.0]]), np.array([0]))
        loss, grad = loss_and_grad(zero_params(spec), batch)
        assert loss == pytest.approx(np.log(2.0), abs=0.0)
        np.testing.assert_array_equal(grad, [-0.5, 0.5, -0.5, 0.5])

    def test_single_sgd_step_lands_exactly(self):
        spec = ModelSpec((1, 2))
        batch = Batch(np.array([[1.0]]), np.array([0]))
        hp = HyperParams(eta=0.1, tau=1, tau_prime=1, batch_size=1)
        # the only row is drawn whatever the seed says, so the step is exact
        stepped = sgd_steps(zero_params(spec), batch, hp, n_steps=1, seed=999)
        np.testing.assert_array_equal(stepped.flat, [0.05, -0.05, 0.05, -0.05])

    def test_probability_of_known_logits(self):
        spec = ModelSpec((1, 2))
        params = ModelParams(spec, np.array([1.0, -1.0, 0.0, 0.0]))
        proba = predict_proba(params, np.array([[1.0]]))
        expected = 1.0 / (1.0 + np.exp(-2.0))
        assert proba[0, 0] == pytest.approx(expected, rel=1e-15)


class TestGradientAgainstFiniteDifferences:
    def relative_errors(self, spec: ModelSpec, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        params = init_params(spec, seed)
        batch = Batch(
            rng.normal(size=(4, spec.input_dim)),
            rng.integers(0, spec.output_dim, size=4),
        )
        _, grad = loss_and_grad(params, batch)
        step = 1e-5
        errs = np.zeros(spec.flat_size)
        flat = params.flat.copy()
        for i in range(spec.flat_size):
            flat[i] += step
            up, _ = loss_and_grad(ModelParams(spec, flat), batch)
            flat[i] -= 2.0 * step
            down, _ = loss_and_grad(ModelParams(spec, flat), batch)
            flat[i] += step
            fd = (up - down) / (2.0 * step)
            denom = max(abs(grad[i]), abs(fd), 1e-6)
            errs[i] = abs(grad[i] - fd) / denom
        return errs

    @pytest.mark.parametrize("activation", ACTIVATIONS)
    def test_small_net_gradients(self, activation):
        spec = ModelSpec((3, 8, 3), activation)
        for seed in range(3):
            errs = self.relative_errors(spec, seed)
            assert errs.max() < 1e-4


class TestSgdBehavior:
    def test_eta_zero_is_identity(self, tiny_params, small_data):
        hp = HyperParams(eta=0.0, tau=3, tau_prime=1, batch_size=4)
        after = sgd_steps(tiny_params, small_data, hp, n_steps=10, seed=1)
        assert after == tiny_params

    def test_zero_steps_is_identity(self, tiny_params, small_data):
        hp = HyperParams(eta=0.5, tau=1, tau_prime=1, batch_size=4)
        assert sgd_steps(tiny_params, small_data, hp, 0, seed=1) == tiny_params

    def test_same_seed_same_result(self, tiny_params, small_data):
        hp = HyperParams(eta=0.2, tau=1, tau_prime=1, batch_size=4)
        a = sgd_steps(tiny_params, small_data, hp, 20, seed=9)
        b = sgd_steps(tiny_params, small_data, hp, 20, seed=9)
        assert a == b

    def test_different_seed_different_result(self, tiny_params, small_data):
        hp = HyperParams(eta=0.2, tau=1, tau_prime=1, batch_size=4)
        a = sgd_steps(tiny_params, small_data, hp, 20, seed=9)
        b = sgd_steps(tiny_params, small_data, hp, 20, seed=10)
        assert a != b

    def test_training_reduces_loss_across_seeds(self):
        spec = ModelSpec((2, 8, 3))
        hp = HyperParams(eta=0.2, tau=1, tau_prime=1, batch_size=8)
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            labels = np.repeat(np.arange(3), 20)
            centers = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
            batch = Batch(centers[labels] + 0.3 * rng.normal(size=(60, 2)), labels)
            params = init_params(spec, seed)
            before, _ = loss_and_grad(params, batch)
            after, _ = loss_and_grad(sgd_steps(params, batch, hp, 100, seed), batch)
            wins += after < before
        assert wins == 20


class TestEvaluate:
    def test_zero_params_predict_class_zero(self, small_data):
        spec = ModelSpec((2, 3))
        acc = evaluate(zero_params(spec), small_data)
        assert acc == pytest.approx(np.mean(small_data.labels == 0))

    def test_logit_ties_resolve_to_lowest_class(self):
        spec = ModelSpec((2, 2))
        # W projects x0 into logit 0 only: x0 = 0 ties the logits
        params = ModelParams(spec, np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]))
        batch = Batch(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 5.0]]), np.array([0, 1, 0]))
        assert evaluate(params, batch) == pytest.approx(1.0)

    def test_random_params_near_chance(self):
        spec = ModelSpec((2, 16, 3))
        rng = np.random.default_rng(0)
        labels = rng.integers(0, 3, size=900)
        batch = Batch(rng.normal(size=(900, 2)), labels)
        accs = [evaluate(init_params(spec, s), batch) for s in range(30)]
        assert abs(np.mean(accs) - 1.0 / 3.0) < 0.1


class TestNumericalStability:
    def test_extreme_logits_do_not_overflow(self):
        spec = ModelSpec((1, 2))
        params = ModelParams(spec, np.array([500.0, -500.0, 0.0, 0.0]))
        batch = Batch(np.array([[1.0]]), np.array([1]))
        with np.errstate(over="raise", invalid="raise"):
            loss, grad = loss_and_grad(params, batch)
            proba = predict_proba(params, batch.features)
        assert np.isfinite(loss) and loss == pytest.approx(1000.0, rel=1e-9)
        assert np.isfinite(grad).all()
        np.testing.assert_allclose(proba[0], [1.0, 0.0], atol=1e-300)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_predict_proba_rows_are_distributions(seed):
    spec = ModelSpec((3, 6, 4))
    rng = np.random.default_rng(seed)
    proba = predict_proba(init_params(spec, seed), rng.normal(size=(5, 3)))
    assert proba.shape == (5, 4)
    assert (proba >= 0.0).all()
    np.testing.assert_allclose(proba.sum(axis=1), np.ones(5), atol=1e-12)
