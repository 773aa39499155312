import numpy as np
import pytest

from specstitch.errors import (
    ConfigMismatch,
    CorruptCheckpoint,
    DivergedLoss,
    ShapeMismatch,
)
from specstitch.model import (
    SegNet,
    SegNetConfig,
    TrainConfig,
    checkpoint_load,
    checkpoint_save,
    train,
)
from specstitch.model.layers import BatchNorm1d, Conv1d, NonLocalBlock

TINY = SegNetConfig(n_iq=32, C=2, widths=(2, 3, 4, 5, 6), use_nonlocal=True)


def fd_evaluation_point(batch=8, input_seed=4, scale=6.0, beta=4.0):
    """Network state where central differences at h=1e-3 are trustworthy:
    batch-norm shifts push activations away from ReLU/maxpool switch points
    and enlarged conv weights shrink the relative size of the probe step."""
    net = SegNet(TINY, seed=0, dtype=np.float64)
    for name, layer in net.named_layers():
        if isinstance(layer, BatchNorm1d):
            layer.beta[:] = beta
        if isinstance(layer, Conv1d) and name.split(".")[-1].startswith("conv"):
            layer.w *= scale
    rng = np.random.default_rng(input_seed)
    x = rng.normal(size=(batch, 2, 32))
    label = (rng.random((batch, 2, 32)) < 0.4).astype(np.uint8)
    return net, x, label


def toy_band_dataset(count, n_iq, C, seed, snr=30.0):
    """Learnable toy: class c occupies a fixed band with elevated magnitude."""
    rng = np.random.default_rng(seed)
    inputs = rng.normal(size=(count, 2, n_iq)).astype(np.float32)
    labels = np.zeros((count, C, n_iq), dtype=np.uint8)
    amp = np.sqrt(10 ** (snr / 10))
    width = n_iq // (2 * C)
    for k in range(count):
        c = int(rng.integers(0, C))
        start = c * 2 * width + width // 2
        inputs[k, :, start : start + width] *= amp
        labels[k, c, start : start + width] = 1
    return inputs, labels


class TestForward:
    def test_shape_and_range(self):
        net = SegNet(TINY, seed=1)
        rng = np.random.default_rng(0)
        out = net.forward(rng.normal(size=(2, 32)).astype(np.float32))
        assert out.shape == (2, 32)
        assert np.all((out > 0) & (out < 1))

    @pytest.mark.parametrize("n_iq", [32, 64, 160])
    def test_any_multiple_of_32(self, n_iq):
        cfg = SegNetConfig(n_iq=n_iq, C=3, widths=(2, 3, 4, 5, 6))
        net = SegNet(cfg, seed=0)
        out = net.forward(np.zeros((1, 2, n_iq), dtype=np.float32))
        assert out.shape == (1, 3, n_iq)

    def test_rejects_wrong_width(self):
        net = SegNet(TINY, seed=1)
        with pytest.raises(ShapeMismatch):
            net.forward(np.zeros((2, 64), dtype=np.float32))

    def test_eval_mode_bit_identical(self):
        net = SegNet(TINY, seed=2)
        x = np.random.default_rng(1).normal(size=(3, 2, 32)).astype(np.float32)
        a = net.forward(x, train=False)
        b = net.forward(x, train=False)
        np.testing.assert_array_equal(a, b)

    def test_batched_matches_single(self):
        net = SegNet(TINY, seed=3)
        x = np.random.default_rng(2).normal(size=(4, 2, 32)).astype(np.float32)
        batched = net.forward(x, train=False)
        for k in range(4):
            single = net.forward(x[k], train=False)
            np.testing.assert_allclose(batched[k], single, atol=1e-5)


class TestAttention:
    def test_rows_sum_to_one(self):
        net = SegNet(TINY, seed=4)
        x = np.random.default_rng(3).normal(size=(2, 2, 32)).astype(np.float32)
        net.forward(x, train=False)
        att = net.nonlocal_block.last_attention
        np.testing.assert_allclose(att.sum(axis=2), 1.0, atol=1e-6)

    def test_length_one_output_is_projected_v(self):
        rng = np.random.default_rng(5)
        block = NonLocalBlock(4, 2, rng, np.float64, residual=False)
        x = rng.normal(size=(1, 4, 1))
        out = block.forward(x)
        v = block.wv.forward(x)
        np.testing.assert_allclose(out, block.wo.forward(v), atol=1e-12)

    def test_length_one_gradient_skips_q_and_k(self):
        rng = np.random.default_rng(6)
        block = NonLocalBlock(4, 2, rng, np.float64, residual=True)
        x = rng.normal(size=(1, 4, 1))
        block.forward(x)
        block.backward(rng.normal(size=(1, 4, 1)))
        assert np.abs(block.wq.gw).max() == 0.0
        assert np.abs(block.wk.gw).max() == 0.0
        assert np.abs(block.wv.gw).max() > 0.0


class TestLoss:
    def test_perfect_prediction(self):
        net = SegNet(TINY, seed=0)
        label = np.random.default_rng(0).integers(0, 2, (2, 32)).astype(np.uint8)
        assert net.loss(label.astype(np.float64), label) < 1e-5

    def test_all_half_is_ln2(self):
        net = SegNet(TINY, seed=0)
        label = np.random.default_rng(1).integers(0, 2, (2, 32)).astype(np.uint8)
        pred = np.full((2, 32), 0.5)
        assert net.loss(pred, label) == pytest.approx(np.log(2), rel=1e-12)

    def test_matches_scalar_oracle(self):
        net = SegNet(TINY, seed=0)
        rng = np.random.default_rng(2)
        pred = rng.uniform(0.01, 0.99, (2, 32))
        label = rng.integers(0, 2, (2, 32)).astype(np.uint8)
        total = 0.0
        for i in range(2):
            for j in range(32):
                p = min(max(pred[i, j], 1e-7), 1 - 1e-7)
                l = float(label[i, j])
                total += -(l * np.log(p) + (1 - l) * np.log(1 - p))
        assert net.loss(pred, label) == pytest.approx(total / 64, abs=1e-6)

    def test_shape_mismatch(self):
        net = SegNet(TINY, seed=0)
        with pytest.raises(ShapeMismatch):
            net.loss(np.zeros((2, 32)), np.zeros((2, 16)))


class TestGradients:
    def test_finite_difference_subset(self):
        net, x, label = fd_evaluation_point()

        def loss_fn():
            return net.loss(net.forward(x, train=True, update_stats=False), label)

        probs = net.forward(x, train=True, update_stats=False)
        net.backward(net.loss_grad(probs, label))
        rng = np.random.default_rng(0)
        h = 1e-3
        for name, p, g in net.grads():
            flat_p = p.reshape(-1)
            flat_g = g.reshape(-1)
            picks = rng.choice(flat_p.size, size=min(6, flat_p.size), replace=False)
            for i in picks:
                orig = flat_p[i]
                flat_p[i] = orig + h
                lp = loss_fn()
                flat_p[i] = orig - h
                lm = loss_fn()
                flat_p[i] = orig
                fd = (lp - lm) / (2 * h)
                rel = abs(fd - flat_g[i]) / max(abs(fd), abs(flat_g[i]), 1e-8)
                assert rel < 1e-3, f"{name}[{i}]: fd={fd:.5e} analytic={flat_g[i]:.5e}"

    def test_zero_gradient_at_optimum(self):
        net = SegNet(TINY, seed=7, dtype=np.float64)
        x = np.random.default_rng(3).normal(size=(2, 2, 32))
        probs = net.forward(x, train=True, update_stats=False)
        net.backward(net.loss_grad(probs, probs))  # label equals prediction
        for _, _, g in net.grads():
            assert np.abs(g).max() < 1e-4


class TestTraining:
    def test_loss_decreases_on_toy(self):
        for seed in (0, 1, 2):
            inputs, labels = toy_band_dataset(50, 32, 2, seed=seed)
            cfg = SegNetConfig(n_iq=32, C=2, widths=(4, 8, 16, 24, 32))
            net = SegNet(cfg, seed=seed)
            result = train(net, inputs, labels,
                           TrainConfig(lr=0.05, batch_size=10, epochs=5, seed=seed))
            per_epoch = np.array(result.loss_trace).reshape(5, -1).mean(axis=1)
            drops = (np.diff(per_epoch) < 0).sum()
            assert drops >= 4, f"seed {seed}: epoch means {per_epoch}"

    def test_lr_zero_leaves_parameters(self):
        inputs, labels = toy_band_dataset(20, 32, 2, seed=5)
        net = SegNet(TINY, seed=9)
        before = {n: p.copy() for n, p, _ in net.grads()}
        train(net, inputs, labels, TrainConfig(lr=0.0, batch_size=10, epochs=2, seed=0))
        for n, p, _ in net.grads():
            np.testing.assert_array_equal(p, before[n])

    def test_same_seed_same_trace(self):
        inputs, labels = toy_band_dataset(30, 32, 2, seed=6)
        traces = []
        for _ in range(2):
            net = SegNet(TINY, seed=11)
            r = train(net, inputs, labels,
                      TrainConfig(lr=0.05, batch_size=10, epochs=2, seed=3))
            traces.append(r.loss_trace)
        assert traces[0] == traces[1]

    def test_nan_loss_raises(self):
        inputs, labels = toy_band_dataset(10, 32, 2, seed=7)
        net = SegNet(TINY, seed=1)
        net.head.w[0, 0, 0] = np.nan
        with pytest.raises(DivergedLoss):
            train(net, inputs, labels, TrainConfig(lr=0.1, batch_size=5, epochs=1, seed=0))


class TestCheckpoint:
    def test_round_trip_forward_identical(self, tmp_path):
        net = SegNet(TINY, seed=13)
        x = np.random.default_rng(4).normal(size=(1, 2, 32)).astype(np.float32)
        want = net.forward(x, train=False)
        path = tmp_path / "m.sgnt"
        checkpoint_save(net, path)
        back = checkpoint_load(path)
        np.testing.assert_array_equal(back.forward(x, train=False), want)

    def test_round_trip_bit_exact_tensors(self, tmp_path):
        net = SegNet(TINY, seed=14)
        path = tmp_path / "m.sgnt"
        checkpoint_save(net, path)
        back = checkpoint_load(path)
        for (na, a, _), (nb, b, _) in zip(net.named_tensors(), back.named_tensors()):
            assert na == nb
            np.testing.assert_array_equal(a, b)

    def test_wrong_n_iq_mismatch(self, tmp_path):
        net = SegNet(TINY, seed=15)
        path = tmp_path / "m.sgnt"
        checkpoint_save(net, path)
        other = SegNetConfig(n_iq=64, C=2, widths=(2, 3, 4, 5, 6))
        with pytest.raises(ConfigMismatch):
            checkpoint_load(path, expect=other)

    def test_corrupt_magic(self, tmp_path):
        path = tmp_path / "m.sgnt"
        net = SegNet(TINY, seed=16)
        checkpoint_save(net, path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"WHAT"
        path.write_bytes(bytes(blob))
        with pytest.raises(CorruptCheckpoint):
            checkpoint_load(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "m.sgnt"
        checkpoint_save(SegNet(TINY, seed=17), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-20])
        with pytest.raises(CorruptCheckpoint):
            checkpoint_load(path)


class TestParameterAccounting:
    def test_nonlocal_param_count_delta(self):
        with_nl = SegNet(TINY, seed=0).param_count()
        cfg_off = SegNetConfig(n_iq=32, C=2, widths=(2, 3, 4, 5, 6), use_nonlocal=False)
        without = SegNet(cfg_off, seed=0).param_count()
        c = TINY.widths[0]
        d = TINY.attention_dim
        expected = 2 * (c * d + d) + 2 * (c * c + c)  # q, k projections + v, o
        assert with_nl - without == expected
