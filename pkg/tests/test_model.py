import time

import numpy as np
import pytest

from attnvgg import model as M
from attnvgg.errors import ShapeError, TrainingError, WeightFileError
from attnvgg.layers import max_error
from attnvgg.verification import check_model_end_to_end


class TestArchitecture:
    def test_vgg16_layer_enumeration(self):
        spec = M.vgg16_spec()
        table = M.layer_table(spec)
        assert len(table) == 18
        # index 13 is the third conv of block 4, index 18 the block-5 pool
        assert table[12].name == "block4_conv3"
        assert table[17].name == "block5_pool"
        assert spec.tap_x == 13 and spec.tap_g == 18

    def test_vgg16_tap_activation_shapes(self):
        spec = M.vgg16_spec()
        shapes = M.activation_shapes(spec)
        assert shapes[13] == (16, 16, 512)
        assert shapes[18] == (4, 4, 512)

    def test_vgg_tiny_taps(self):
        spec = M.vgg_tiny_spec()
        assert (spec.tap_x, spec.tap_g) == (3, 4)
        shapes = M.activation_shapes(spec)
        assert shapes[3] == (16, 16, 16)
        assert shapes[4] == (8, 8, 16)

    def test_vgg16_plan_is_locked(self):
        import dataclasses
        bad = dataclasses.replace(M.vgg16_spec(), tap_x=12)
        with pytest.raises(ValueError):
            M.build(bad, 0)

    def test_odd_input_rejected(self):
        with pytest.raises(ValueError):
            M.build(M.vgg_tiny_spec(input_hw=(30, 30)), 0)  # 30/2 = 15 is odd at pool 2


class TestBuild:
    def test_head_shapes_full_arch(self):
        net = M.build(M.vgg16_spec(attention=True), 0)
        assert net.params["head_fc1_w"].value.shape == (1024, 10)
        assert net.params["head_fc2_w"].value.shape == (10, 1)
        assert net.gate.f_int == 256

    def test_head_width_without_attention(self):
        net = M.build(M.vgg16_spec(attention=False), 0)
        assert net.params["head_fc1_w"].value.shape == (512, 10)
        assert net.gate is None
        assert not any(n.startswith("gate") for n in net.params)

    def test_same_seed_builds_identically(self):
        a = M.build(M.vgg_tiny_spec(), 123)
        b = M.build(M.vgg_tiny_spec(), 123)
        assert list(a.params) == list(b.params)
        for name in a.params:
            np.testing.assert_array_equal(a.params[name].value, b.params[name].value)

    def test_different_seed_differs(self):
        a = M.build(M.vgg_tiny_spec(), 1)
        b = M.build(M.vgg_tiny_spec(), 2)
        assert any(not np.array_equal(a.params[n].value, b.params[n].value) for n in a.params)

    def test_mean_one_compatibility_switch(self):
        net = M.build(M.vgg_tiny_spec(head_init_mean=1.0), 0)
        assert abs(net.params["head_fc1_w"].value.mean() - 1.0) < 0.05


class TestForward:
    def test_output_in_unit_interval(self):
        net = M.build(M.vgg_tiny_spec(), 0)
        for seed in range(100):
            rng = np.random.default_rng(seed)
            pred, _ = M.forward(net, rng.uniform(0.0, 1.0, net.spec.input_shape))
            assert 0.0 < pred < 1.0

    def test_eval_forward_keeps_no_cache(self):
        net = M.build(M.vgg_tiny_spec(), 0)
        _, cache = M.forward(net, np.zeros(net.spec.input_shape), training=False)
        assert cache is None

    def test_wrong_input_shape_names_input(self):
        net = M.build(M.vgg_tiny_spec(), 0)
        with pytest.raises(ShapeError, match="input"):
            M.forward(net, np.zeros((16, 16, 1)))

    def test_training_forward_needs_rng_or_mask(self):
        net = M.build(M.vgg_tiny_spec(), 0)
        with pytest.raises(ValueError):
            M.forward(net, np.zeros(net.spec.input_shape), training=True)

    def test_full_vgg16_forward_and_tap_grids(self):
        # one full-resolution pass: output in (0, 1), gate fed from the
        # 16 x 16 x 512 and 4 x 4 x 512 taps
        net = M.build(M.vgg16_spec(attention=True), 0)
        rng = np.random.default_rng(0)
        img = rng.uniform(0.0, 1.0, (128, 128, 3))
        pred, cache = M.forward(net, img, training=True, dropout_mask=np.ones(10, dtype=bool))
        assert 0.0 < pred < 1.0
        assert cache.gate_cache.coarse_hw == (4, 4)
        assert cache.gate_cache.gated_shape == (16, 16, 512)

    def test_tiny_forward_budget(self):
        net = M.build(M.vgg_tiny_spec(), 0)
        rng = np.random.default_rng(0)
        images = [rng.uniform(0.0, 1.0, net.spec.input_shape) for _ in range(20)]
        M.forward(net, images[0])  # warm up
        start = time.perf_counter()
        for img in images:
            M.forward(net, img)
        per_image = (time.perf_counter() - start) / len(images)
        assert per_image < 0.010, f"forward took {per_image * 1e3:.2f} ms per image"


class TestBackward:
    @pytest.mark.parametrize("attention", [True, False])
    def test_end_to_end_gradient_check(self, attention):
        assert max_error(check_model_end_to_end(attention, "ce_logcosh", seed=3)) < 1e-4

    def test_zero_upstream_zero_grads(self):
        net = M.build(M.vgg_tiny_spec(), 0)
        rng = np.random.default_rng(0)
        _, cache = M.forward(net, rng.uniform(size=net.spec.input_shape), training=True, rng=rng)
        net.zero_grads()
        M.backward(net, cache, 0.0)
        for p in net.params.values():
            np.testing.assert_array_equal(p.grad, np.zeros_like(p.grad))

    def test_frozen_mask_backward_is_deterministic(self):
        net = M.build(M.vgg_tiny_spec(), 0)
        rng = np.random.default_rng(0)
        img = rng.uniform(size=net.spec.input_shape)
        mask = np.ones(10, dtype=bool)
        grads = []
        for _ in range(2):
            _, cache = M.forward(net, img, training=True, dropout_mask=mask)
            net.zero_grads()
            M.backward(net, cache, 1.0)
            grads.append({n: p.grad.copy() for n, p in net.params.items()})
        for name in grads[0]:
            np.testing.assert_array_equal(grads[0][name], grads[1][name])

    def test_cache_is_single_use(self):
        net = M.build(M.vgg_tiny_spec(), 0)
        rng = np.random.default_rng(0)
        _, cache = M.forward(net, rng.uniform(size=net.spec.input_shape), training=True, rng=rng)
        M.backward(net, cache, 1.0)
        with pytest.raises(TrainingError):
            M.backward(net, cache, 1.0)

    def test_missing_cache_rejected(self):
        net = M.build(M.vgg_tiny_spec(), 0)
        with pytest.raises(TrainingError):
            M.backward(net, None, 1.0)


class TestWeightFiles:
    def test_file_round_trip_is_byte_identical(self, tmp_path):
        net = M.build(M.vgg_tiny_spec(), 5)
        first = tmp_path / "a.agw"
        second = tmp_path / "b.agw"
        M.save_weights(net, first)
        M.load_weights(net, first)
        M.save_weights(net, second)
        assert first.read_bytes() == second.read_bytes()

    def test_params_bit_exact_after_narrowing_load(self, tmp_path):
        net = M.build(M.vgg_tiny_spec(), 5)
        path = tmp_path / "w.agw"
        M.save_weights(net, path)
        M.load_weights(net, path)
        narrowed = net.param_values()
        M.save_weights(net, path)
        M.load_weights(net, path)
        for name, arr in net.param_values().items():
            np.testing.assert_array_equal(arr, narrowed[name])

    def test_fresh_save_load_is_f32_accurate(self, tmp_path):
        net = M.build(M.vgg_tiny_spec(), 5)
        original = net.param_values()
        path = tmp_path / "w.agw"
        M.save_weights(net, path)
        M.load_weights(net, path)
        for name, arr in net.param_values().items():
            np.testing.assert_allclose(arr, original[name], rtol=1e-6, atol=1e-30)

    def test_backbone_only_load_keeps_head_fresh(self, tmp_path):
        donor = M.build(M.vgg_tiny_spec(), 7)
        path = tmp_path / "backbone.agw"
        M.save_weights(donor, path, names=donor.backbone_param_names())
        receiver = M.build(M.vgg_tiny_spec(), 8)
        head_before = receiver.params["head_fc1_w"].value.copy()
        gate_before = receiver.params["gate_psi"].value.copy()
        loaded = M.load_weights(receiver, path)
        assert all(n.startswith("block") for n in loaded)
        np.testing.assert_array_equal(receiver.params["head_fc1_w"].value, head_before)
        np.testing.assert_array_equal(receiver.params["gate_psi"].value, gate_before)
        np.testing.assert_allclose(receiver.params["block1_conv1_w"].value,
                                   donor.params["block1_conv1_w"].value, rtol=1e-6)

    def test_shape_mismatch_names_tensor(self, tmp_path):
        path = tmp_path / "bad.agw"
        M.write_weight_file(path, {"block1_conv1_w": np.zeros((3, 3, 3, 64))})
        net = M.build(M.vgg_tiny_spec(), 0)  # expects 3 x 3 x 1 x 8
        with pytest.raises(WeightFileError, match="block1_conv1_w"):
            M.load_weights(net, path)

    def test_unknown_tensor_rejected(self, tmp_path):
        path = tmp_path / "bad.agw"
        M.write_weight_file(path, {"mystery": np.zeros(3)})
        with pytest.raises(WeightFileError, match="mystery"):
            M.load_weights(M.build(M.vgg_tiny_spec(), 0), path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.agw"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(WeightFileError, match="magic"):
            M.read_weight_file(path)

    def test_truncated_file(self, tmp_path):
        net = M.build(M.vgg_tiny_spec(), 0)
        path = tmp_path / "w.agw"
        M.save_weights(net, path)
        clipped = tmp_path / "clipped.agw"
        clipped.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(WeightFileError, match="truncated"):
            M.read_weight_file(clipped)

    def test_format_layout_is_exact(self, tmp_path):
        import struct

        path = tmp_path / "one.agw"
        M.write_weight_file(path, {"t": np.array([[1.0, 2.0], [3.0, 4.0]])})
        raw = path.read_bytes()
        assert raw[:4] == b"AGW1"
        assert struct.unpack("<I", raw[4:8]) == (1,)
        assert struct.unpack("<H", raw[8:10]) == (1,)
        assert raw[10:11] == b"t"
        assert raw[11] == 2
        assert struct.unpack("<II", raw[12:20]) == (2, 2)
        assert np.frombuffer(raw[20:], dtype="<f4").tolist() == [1.0, 2.0, 3.0, 4.0]
