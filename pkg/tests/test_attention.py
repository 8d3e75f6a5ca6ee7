import numpy as np
import pytest

from attnvgg import attention as A
from attnvgg.errors import ShapeError
from attnvgg.layers import Parameter, max_error
from attnvgg.verification import check_attention_gate


def make_params(f_x, f_g, f_int, seed=0, sigma=0.3):
    rng = np.random.default_rng(seed)
    return A.init_attention_params(f_x, f_g, f_int, rng, sigma=sigma)


class TestForward:
    def test_zero_psi_gives_half_gate(self):
        rng = np.random.default_rng(1)
        params = make_params(3, 3, 2, seed=1)
        params.psi.value[:] = 0.0
        params.b_psi.value[:] = 0.0
        x = rng.normal(size=(6, 6, 3))
        g = rng.normal(size=(3, 3, 3))
        out, _ = A.attention_forward(x, g, params)
        np.testing.assert_array_equal(out.alpha_coarse, np.full((3, 3, 1), 0.5))
        np.testing.assert_array_equal(out.alpha_fine, np.full((6, 6, 1), 0.5))
        np.testing.assert_array_equal(out.gated, 0.5 * x)

    def test_saturating_bias_passes_input_through(self):
        rng = np.random.default_rng(2)
        params = make_params(3, 3, 2, seed=2)
        params.psi.value[:] = 0.0
        params.b_psi.value[:] = 100.0
        x = rng.normal(size=(4, 4, 3))
        g = rng.normal(size=(2, 2, 3))
        out, _ = A.attention_forward(x, g, params)
        assert np.max(np.abs(out.alpha_fine - 1.0)) < 1e-12
        assert np.max(np.abs(out.gated - x)) < 1e-10 * np.max(np.abs(x))

    def test_full_scale_tap_shapes(self):
        rng = np.random.default_rng(3)
        params = make_params(512, 512, 256, seed=3, sigma=0.01)
        x = rng.normal(size=(16, 16, 512))
        g = rng.normal(size=(4, 4, 512))
        out, _ = A.attention_forward(x, g, params)
        assert out.alpha_coarse.shape == (4, 4, 1)
        assert out.alpha_fine.shape == (16, 16, 1)
        assert out.gated.shape == (16, 16, 512)

    def test_alpha_in_unit_interval_over_random_inputs(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            params = make_params(2, 3, 2, seed=seed, sigma=1.0)
            x = rng.normal(scale=3.0, size=(5, 5, 2))
            g = rng.normal(scale=3.0, size=(2, 2, 3))
            out, _ = A.attention_forward(x, g, params)
            assert out.alpha_fine.min() >= 0.0 and out.alpha_fine.max() <= 1.0
            assert out.alpha_coarse.min() >= 0.0 and out.alpha_coarse.max() <= 1.0

    def test_gate_only_attenuates(self):
        rng = np.random.default_rng(4)
        params = make_params(3, 3, 2, seed=4, sigma=1.0)
        x = rng.normal(size=(6, 6, 3))
        g = rng.normal(size=(3, 3, 3))
        out, _ = A.attention_forward(x, g, params)
        assert np.all(np.abs(out.gated) <= np.abs(x) + 1e-15)

    def test_gated_is_exact_broadcast_product(self):
        rng = np.random.default_rng(5)
        params = make_params(4, 2, 2, seed=5, sigma=0.7)
        x = rng.normal(size=(8, 6, 4))
        g = rng.normal(size=(4, 3, 2))
        out, _ = A.attention_forward(x, g, params)
        np.testing.assert_array_equal(out.gated, x * out.alpha_fine)

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        params = make_params(3, 3, 2, seed=6)
        x = rng.normal(size=(4, 4, 3))
        g = rng.normal(size=(2, 2, 3))
        out1, _ = A.attention_forward(x, g, params)
        out2, _ = A.attention_forward(x, g, params)
        np.testing.assert_array_equal(out1.gated, out2.gated)
        np.testing.assert_array_equal(out1.alpha_fine, out2.alpha_fine)

    def test_channel_mismatch_rejected(self):
        params = make_params(3, 3, 2)
        with pytest.raises(ShapeError):
            A.attention_forward(np.zeros((4, 4, 5)), np.zeros((2, 2, 3)), params)
        with pytest.raises(ShapeError):
            A.attention_forward(np.zeros((4, 4, 3)), np.zeros((2, 2, 5)), params)

    def test_input_grid_must_cover_gating_grid(self):
        params = make_params(3, 3, 2)
        with pytest.raises(ShapeError):
            A.attention_forward(np.zeros((2, 2, 3)), np.zeros((4, 4, 3)), params)


class TestBackward:
    def test_gradient_check_matches_finite_differences(self):
        assert max_error(check_attention_gate(seed=11)) < 1e-4

    def test_zero_upstream_gives_zero_grads(self):
        rng = np.random.default_rng(7)
        params = make_params(3, 3, 2, seed=7)
        x = rng.normal(size=(6, 6, 3))
        g = rng.normal(size=(3, 3, 3))
        out, cache = A.attention_forward(x, g, params)
        grads = A.attention_backward(cache, np.zeros_like(out.gated))
        for arr in (grads.d_x, grads.d_g, grads.d_w_x, grads.d_w_g, grads.d_b_g, grads.d_psi, grads.d_b_psi):
            np.testing.assert_array_equal(arr, np.zeros_like(arr))

    def test_cache_is_single_use(self):
        rng = np.random.default_rng(8)
        params = make_params(3, 3, 2, seed=8)
        out, cache = A.attention_forward(rng.normal(size=(4, 4, 3)), rng.normal(size=(2, 2, 3)), params)
        A.attention_backward(cache, np.zeros_like(out.gated))
        with pytest.raises(ValueError):
            A.attention_backward(cache, np.zeros_like(out.gated))

    def test_mismatched_gradient_shape_rejected(self):
        rng = np.random.default_rng(9)
        params = make_params(3, 3, 2, seed=9)
        _, cache = A.attention_forward(rng.normal(size=(4, 4, 3)), rng.normal(size=(2, 2, 3)), params)
        with pytest.raises(ShapeError):
            A.attention_backward(cache, np.zeros((4, 4, 5)))


class TestInit:
    def test_parameter_shapes(self):
        params = make_params(8, 16, 4)
        assert params.w_x.value.shape == (1, 1, 8, 4)
        assert params.w_g.value.shape == (1, 1, 16, 4)
        assert params.b_g.value.shape == (4,)
        assert params.psi.value.shape == (1, 1, 4, 1)
        assert params.b_psi.value.shape == (1,)
        assert (params.f_x, params.f_g, params.f_int) == (8, 16, 4)

    def test_biases_start_zero(self):
        params = make_params(3, 3, 2)
        np.testing.assert_array_equal(params.b_g.value, np.zeros(2))
        np.testing.assert_array_equal(params.b_psi.value, np.zeros(1))

    def test_intermediate_width_must_be_positive(self):
        with pytest.raises(ValueError):
            A.init_attention_params(4, 4, 0, np.random.default_rng(0))
