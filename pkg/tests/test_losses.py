import math

import numpy as np
import pytest

from attnvgg import losses as L


class TestCrossEntropy:
    def test_perfect_prediction_near_zero(self):
        value, _ = L.loss_ce(1.0, 1.0 - 1e-7)
        assert 0.0 <= value < 2e-7

    def test_half_prediction_positive_label(self):
        value, grad = L.loss_ce(1.0, 0.5)
        assert abs(value - math.log(2.0)) < 1e-12
        assert abs(grad - (-2.0)) < 1e-12

    def test_half_prediction_negative_label(self):
        value, grad = L.loss_ce(0.0, 0.5)
        assert abs(value - math.log(2.0)) < 1e-12
        assert abs(grad - 2.0) < 1e-12

    def test_clamp_keeps_value_finite(self):
        for yhat in (0.0, 1.0, -0.5, 1.5):
            value, grad = L.loss_ce(1.0, yhat)
            assert np.isfinite(value) and np.isfinite(grad)


class TestLogCosh:
    def test_zero_error(self):
        value, grad = L.loss_logcosh(1.0, 1.0)
        assert value == 0.0 and grad == 0.0

    def test_unit_error(self):
        value, grad = L.loss_logcosh(0.0, 1.0)
        assert abs(value - math.log(math.cosh(1.0))) < 1e-12
        assert abs(grad - math.tanh(1.0)) < 1e-12

    def test_large_error_uses_safe_identity(self):
        value, grad = L.loss_logcosh(0.0, 50.0)
        assert abs(value - math.log(math.cosh(50.0))) < 1e-9
        assert abs(value - (50.0 - math.log(2.0))) < 1e-9
        assert abs(grad - 1.0) < 1e-12

    def test_even_function_of_error(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            y = float(rng.integers(0, 2))
            yhat = float(rng.uniform(-1.0, 2.0))
            v1, _ = L.loss_logcosh(y, yhat)
            v2, _ = L.loss_logcosh(1.0 - y, 1.0 - yhat)
            assert abs(v1 - v2) < 1e-12


class TestEnsemble:
    def test_degenerate_weights_reduce_to_ce(self):
        config = L.LossConfig(kind="ce_logcosh", alpha=1.0, beta=0.0)
        for y in (0.0, 1.0):
            for yhat in (0.1, 0.5, 0.9):
                assert L.loss_ensemble(y, yhat, config) == L.loss_ce(y, yhat)

    def test_default_even_split_value(self):
        config = L.LossConfig(kind="ce_logcosh")
        assert (config.alpha, config.beta) == (0.5, 0.5)
        value, _ = L.loss_ensemble(1.0, 0.5, config)
        expected = 0.5 * math.log(2.0) + 0.5 * math.log(math.cosh(0.5))
        assert abs(value - expected) < 1e-12

    def test_linearity_over_random_inputs(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            y = float(rng.integers(0, 2))
            yhat = float(rng.uniform(0.01, 0.99))
            alpha, beta = rng.uniform(0.0, 2.0, 2)
            if alpha + beta <= 0:
                continue
            config = L.LossConfig(kind="ce_logcosh", alpha=alpha, beta=beta)
            v, g = L.loss_ensemble(y, yhat, config)
            ce_v, ce_g = L.loss_ce(y, yhat)
            lc_v, lc_g = L.loss_logcosh(y, yhat)
            assert abs(v - (alpha * ce_v + beta * lc_v)) < 1e-12
            assert abs(g - (alpha * ce_g + beta * lc_g)) < 1e-12

    def test_kind_dispatch(self):
        assert L.loss_ensemble(1.0, 0.3, L.LossConfig(kind="ce")) == L.loss_ce(1.0, 0.3)
        assert L.loss_ensemble(1.0, 0.3, L.LossConfig(kind="logcosh")) == L.loss_logcosh(1.0, 0.3)

    def test_invalid_configs_rejected(self):
        with pytest.raises(ValueError):
            L.LossConfig(kind="mse")
        with pytest.raises(ValueError):
            L.LossConfig(kind="ce_logcosh", alpha=0.0, beta=0.0)
        with pytest.raises(ValueError):
            L.LossConfig(alpha=-0.1)


class TestGradientsAndSigns:
    def test_finite_difference_gradients(self):
        # central differences away from the clamp boundary
        rng = np.random.default_rng(2)
        h = 1e-6
        config = L.LossConfig(kind="ce_logcosh", alpha=0.7, beta=0.3)
        for fn in (
            lambda y, p: L.loss_ce(y, p),
            lambda y, p: L.loss_logcosh(y, p),
            lambda y, p: L.loss_ensemble(y, p, config),
        ):
            for _ in range(50):
                y = float(rng.integers(0, 2))
                p = float(rng.uniform(0.05, 0.95))
                _, grad = fn(y, p)
                numeric = (fn(y, p + h)[0] - fn(y, p - h)[0]) / (2 * h)
                assert abs(grad - numeric) / max(1.0, abs(grad), abs(numeric)) < 1e-7

    def test_values_non_negative(self):
        rng = np.random.default_rng(3)
        config = L.LossConfig(kind="ce_logcosh")
        for _ in range(500):
            y = float(rng.integers(0, 2))
            p = float(rng.uniform(0.0, 1.0))
            assert L.loss_ce(y, p)[0] >= 0.0
            assert L.loss_logcosh(y, p)[0] >= 0.0
            assert L.loss_ensemble(y, p, config)[0] >= 0.0

    def test_zero_only_at_zero_error(self):
        assert L.loss_logcosh(1.0, 1.0)[0] == 0.0
        assert L.loss_logcosh(1.0, 0.9)[0] > 0.0


class TestBatchLoss:
    def test_constant_batch(self):
        config = L.LossConfig(kind="ce")
        single, _ = L.loss_ce(1.0, 0.7)
        mean, grads = L.batch_loss(np.ones(5), np.full(5, 0.7), config)
        assert abs(mean - single) < 1e-15
        assert grads.shape == (5,)

    def test_two_sample_mean(self):
        config = L.LossConfig(kind="logcosh")
        v1, _ = L.loss_logcosh(0.0, 0.2)
        v2, _ = L.loss_logcosh(1.0, 0.4)
        mean, _ = L.batch_loss(np.array([0.0, 1.0]), np.array([0.2, 0.4]), config)
        assert abs(mean - (v1 + v2) / 2.0) < 1e-15

    def test_grads_scaled_by_batch_size(self):
        config = L.LossConfig(kind="ce_logcosh")
        labels = np.array([1.0, 0.0, 1.0, 0.0])
        preds = np.array([0.6, 0.4, 0.2, 0.8])
        _, grads = L.batch_loss(labels, preds, config)
        for i in range(4):
            _, g = L.loss_ensemble(labels[i], preds[i], config)
            assert abs(grads[i] - g / 4.0) < 1e-15

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            L.batch_loss(np.array([]), np.array([]), L.LossConfig())
