import numpy as np
import pytest

from specstitch.bank import (
    BankEntry,
    SignalBank,
    bank_load,
    bank_save,
    crop_silence,
    cut_fragments,
    make_entry,
)
from specstitch.dsp import FilterSpec, IqBuffer
from specstitch.errors import AllSilence, CorruptBank, MissingClass
from specstitch.generator import GeneratorConfig, generate_sample


def _burst_buffer(pre=1000, burst=3000, post=500, rate=1e6, seed=0):
    rng = np.random.default_rng(seed)
    sig = rng.normal(size=burst) + 1j * rng.normal(size=burst)
    samples = np.concatenate(
        [np.zeros(pre, complex), sig, np.zeros(post, complex)]
    )
    return IqBuffer(samples, rate), pre, burst


class TestCropSilence:
    def test_recovers_burst_span(self):
        buf, pre, burst = _burst_buffer()
        cropped = crop_silence(buf, 0.02)
        # the whole burst survives and the span grows by at most the
        # smoothing window on each side
        assert cropped.energy == pytest.approx(buf.energy, rel=1e-12)
        assert burst <= len(cropped) <= burst + 2 * 65

    def test_identity_when_all_loud(self):
        rng = np.random.default_rng(1)
        buf = IqBuffer(1.0 + rng.normal(size=2048) * 0.01 + 0j, 1.0)
        cropped = crop_silence(buf, 0.02)
        np.testing.assert_array_equal(cropped.samples, buf.samples)

    def test_all_zero_raises(self):
        with pytest.raises(AllSilence):
            crop_silence(IqBuffer(np.zeros(256, complex), 1.0), 0.02)

    def test_threshold_bounds(self):
        buf, _, _ = _burst_buffer()
        with pytest.raises(ValueError):
            crop_silence(buf, 1.5)


class TestMakeEntry:
    def test_full_band_keeps_all_bins(self):
        rng = np.random.default_rng(2)
        buf = IqBuffer(rng.normal(size=256) + 1j * rng.normal(size=256), 256.0)
        entry = make_entry(buf, 1, FilterSpec(-128.0, 127.0))
        assert entry.n_bins == 256

    def test_tone_energy_preserved(self):
        # tone at +50 cycles per 1024 samples, inside the kept band
        n = 1024
        rate = float(n)
        t = np.arange(n)
        tone = np.exp(2j * np.pi * 50 * t / n)
        buf = IqBuffer(tone, rate)
        entry = make_entry(buf, 1, FilterSpec(-100.0, 100.0))
        kept_energy = np.sum(np.abs(entry.pruned_bins.astype(np.complex128)) ** 2)
        assert kept_energy == pytest.approx(n * buf.energy, rel=1e-5)

    def test_half_band_length(self):
        rng = np.random.default_rng(3)
        buf = IqBuffer(rng.normal(size=512) + 1j * rng.normal(size=512), 512.0)
        entry = make_entry(buf, 2, FilterSpec(-128.0, 127.0))
        assert entry.n_bins == 256
        assert entry.bandwidth_hz == pytest.approx(256.0)

    def test_zero_padding_to_fixed_fft(self):
        rng = np.random.default_rng(4)
        buf = IqBuffer(rng.normal(size=200) + 1j * rng.normal(size=200), 256.0)
        entry = make_entry(buf, 1, FilterSpec(-128.0, 127.0), n_fft=256)
        assert entry.n_bins == 256
        assert entry.source_bin_width_hz == pytest.approx(1.0)


class TestCutFragments:
    def test_lengths_pad_to_same_fft(self):
        rng = np.random.default_rng(5)
        buf = IqBuffer(rng.normal(size=4096) + 1j * rng.normal(size=4096), 1.0)
        frags = cut_fragments(buf, 256, np.random.default_rng(0))
        assert 2 <= len(frags) <= 4
        for f in frags:
            assert 129 <= len(f) <= 256


def _toy_bank(classes=(1, 2, 3), bin_width=1.0, n_bins=16, seed=0):
    rng = np.random.default_rng(seed)
    bank = SignalBank(class_count=len(classes), bin_width_hz=bin_width)
    for cid in classes:
        for _ in range(2):
            bins = (rng.normal(size=n_bins) + 1j * rng.normal(size=n_bins)).astype(np.complex64)
            bank.add(BankEntry(cid, bins, n_bins * bin_width, bin_width))
    return bank


class TestBankIo:
    def test_round_trip_bit_exact(self, tmp_path):
        bank = _toy_bank()
        path = tmp_path / "bank.sbnk"
        bank_save(bank, path)
        back = bank_load(path)
        assert back.class_count == bank.class_count
        assert back.bin_width_hz == bank.bin_width_hz
        assert back.entry_count() == bank.entry_count()
        for cid in bank.entries:
            for a, b in zip(bank.entries[cid], back.entries[cid]):
                np.testing.assert_array_equal(a.pruned_bins, b.pruned_bins)
                assert a.bandwidth_hz == b.bandwidth_hz

    def test_double_round_trip_identical_bytes(self, tmp_path):
        bank = _toy_bank(seed=7)
        p1, p2 = tmp_path / "a.sbnk", tmp_path / "b.sbnk"
        bank_save(bank, p1)
        bank_save(bank_load(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "bank.sbnk"
        bank_save(_toy_bank(), path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 7])
        with pytest.raises(CorruptBank):
            bank_load(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bank.sbnk"
        path.write_bytes(b"NOPE" + b"\x00" * 30)
        with pytest.raises(CorruptBank):
            bank_load(path)

    def test_missing_class_surfaces_in_generation(self, tmp_path):
        bank = _toy_bank(classes=(1, 2), bin_width=1.0, n_bins=16)
        bank.class_count = 3  # declared 3 classes, entries only for 2
        path = tmp_path / "partial.sbnk"
        bank_save(bank, path)
        loaded = bank_load(path)
        cfg = GeneratorConfig(C=3, B_hz=64.0, n_s=1, p_e=0.0, p_c=0.5,
                              n_iq=64, noise_power=1.0, master_seed=1)
        with pytest.raises(MissingClass):
            for k in range(50):  # class 3 is drawn eventually
                generate_sample(cfg, loaded, k)


class TestEntryInvariants:
    def test_rejects_zero_energy(self):
        with pytest.raises(ValueError):
            BankEntry(1, np.zeros(8, np.complex64), 8.0, 1.0)

    def test_bank_rejects_mismatched_bin_width(self):
        bank = SignalBank(class_count=1, bin_width_hz=1.0)
        entry = BankEntry(1, np.ones(8, np.complex64), 16.0, 2.0)
        with pytest.raises(ValueError):
            bank.add(entry)
