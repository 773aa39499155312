import numpy as np
import pytest

from specstitch.errors import InvalidGeometry, ZeroFloor
from specstitch.model import SegNet, SegNetConfig
from specstitch.wideband import (
    NoiseReference,
    TilingPlan,
    estimate_noise_reference,
    infer_wideband,
    min_smoothed_power,
    normalize,
    plan_tiling,
)


def _noise_grid(n, power, seed, rate_scale=1.0):
    # frequency-domain view of white noise: per-bin power = n * power
    rng = np.random.default_rng(seed)
    scale = np.sqrt(n * power / 2) * rate_scale
    return (scale * rng.normal(size=(2, n))).astype(np.float64)


class TestNoiseReference:
    def test_identical_samples(self):
        grid = _noise_grid(256, 1.0, 1)
        ref = estimate_noise_reference(np.stack([grid, grid, grid]))
        assert ref.ref_floor == pytest.approx(min_smoothed_power(grid))

    def test_pure_noise_floor_bounds(self):
        n, p = 1024, 2.0
        grids = np.stack([_noise_grid(n, p, seed) for seed in range(50)])
        ref = estimate_noise_reference(grids)
        per_bin = n * p
        assert 0.5 * per_bin <= ref.ref_floor <= per_bin

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            estimate_noise_reference(np.zeros((0, 2, 64)))

    def test_nonpositive_floor_rejected(self):
        with pytest.raises(ValueError):
            NoiseReference(0.0)


class TestNormalize:
    def test_identity_when_floor_matches(self):
        grid = _noise_grid(256, 1.0, 2)
        ref = NoiseReference(min_smoothed_power(grid))
        out = normalize(grid, ref)
        np.testing.assert_allclose(out, grid, rtol=1e-6)

    def test_scale_invariance(self):
        grid = _noise_grid(256, 1.0, 3)
        ref = NoiseReference(123.4)
        a = normalize(grid, ref)
        b = normalize(grid * 10.0, ref)
        np.testing.assert_allclose(a, b, rtol=1e-5)

    def test_normalized_floor_hits_reference(self):
        grid = _noise_grid(256, 3.0, 4)
        ref = NoiseReference(50.0)
        out = normalize(grid, ref)
        assert min_smoothed_power(out) == pytest.approx(50.0, rel=1e-5)

    def test_zero_input(self):
        with pytest.raises(ZeroFloor):
            normalize(np.zeros((2, 64)), NoiseReference(1.0))


class TestPlanTiling:
    def test_single_window(self):
        plan = plan_tiling(25e6, 25e6, 1024)
        assert plan.n_iq_tilde == 1024
        assert plan.window_starts == (0,)

    def test_four_b(self):
        plan = plan_tiling(100e6, 25e6, 1024, overlap_fraction=0.5)
        assert plan.n_iq_tilde == 4096
        assert plan.window_starts == (0, 512, 1024, 1536, 2048, 2560, 3072)

    def test_invalid_geometry(self):
        with pytest.raises(InvalidGeometry):
            plan_tiling(10e6, 25e6, 1024)
        with pytest.raises(InvalidGeometry):
            plan_tiling(25e6 * 1.01, 25e6, 1024)
        with pytest.raises(InvalidGeometry):
            plan_tiling(50e6, 25e6, 1024, overlap_fraction=1.0)

    @pytest.mark.parametrize("mult,n_iq,overlap", [
        (2, 64, 0.0), (3, 64, 0.25), (4, 128, 0.5), (5, 32, 0.75), (7, 64, 0.9),
    ])
    def test_full_coverage(self, mult, n_iq, overlap):
        plan = plan_tiling(mult * 1e6, 1e6, n_iq, overlap)
        covered = np.zeros(plan.n_iq_tilde, dtype=int)
        for s in plan.window_starts:
            covered[s : s + n_iq] += 1
        assert (covered >= 1).all()
        assert plan.window_starts[-1] + n_iq == plan.n_iq_tilde


@pytest.fixture(scope="module")
def net():
    return SegNet(SegNetConfig(n_iq=64, C=2, widths=(2, 3, 4, 5, 6)), seed=21)


class TestInferWideband:
    def test_degenerate_tiling_bit_identical(self, net):
        plan = plan_tiling(1e6, 1e6, 64)
        wide = _noise_grid(64, 1.0, 5).astype(np.float32)
        ref = NoiseReference(40.0)
        occ = infer_wideband(net, wide, plan, ref, threshold=0.5)
        direct = net.forward(normalize(wide, ref), train=False)
        np.testing.assert_array_equal(occ.probs, direct.astype(np.float32))
        np.testing.assert_array_equal(occ.binary, (direct >= 0.5).astype(np.uint8))

    def test_fully_overlapping_windows_average_to_single(self, net):
        wide = _noise_grid(64, 1.0, 6).astype(np.float32)
        ref = NoiseReference(40.0)
        dup = TilingPlan(1e6, 1e6, 64, 64, (0, 0), 0.99)
        single = TilingPlan(1e6, 1e6, 64, 64, (0,), 0.0)
        a = infer_wideband(net, wide, dup, ref)
        b = infer_wideband(net, wide, single, ref)
        np.testing.assert_array_equal(a.probs, b.probs)

    def test_window_order_independence(self, net):
        wide = _noise_grid(192, 1.0, 7).astype(np.float32)
        ref = NoiseReference(40.0)
        fwd = TilingPlan(3e6, 1e6, 64, 192, (0, 32, 64, 96, 128), 0.5)
        rev = TilingPlan(3e6, 1e6, 64, 192, (128, 96, 64, 32, 0), 0.5)
        a = infer_wideband(net, wide, fwd, ref)
        b = infer_wideband(net, wide, rev, ref)
        np.testing.assert_allclose(a.probs, b.probs, atol=1e-6)

    def test_worker_count_equivalence(self, net):
        wide = _noise_grid(256, 1.0, 8).astype(np.float32)
        ref = NoiseReference(40.0)
        plan = plan_tiling(4e6, 1e6, 64, 0.5)
        a = infer_wideband(net, wide, plan, ref, workers=1)
        b = infer_wideband(net, wide, plan, ref, workers=4)
        np.testing.assert_array_equal(a.probs, b.probs)

    def test_amplitude_invariance(self, net):
        wide = _noise_grid(256, 1.0, 9).astype(np.float64)
        ref = NoiseReference(40.0)
        plan = plan_tiling(4e6, 1e6, 64, 0.5)
        base = infer_wideband(net, wide, plan, ref)
        for alpha in (0.1, 10.0):
            scaled = infer_wideband(net, wide * alpha, plan, ref)
            assert np.abs(scaled.probs - base.probs).max() < 1e-4

    def test_shape_guard(self, net):
        plan = plan_tiling(2e6, 1e6, 64)
        with pytest.raises(InvalidGeometry):
            infer_wideband(net, np.zeros((2, 64)), plan, NoiseReference(1.0))
