"""Stitched wideband sample generation.

A sample is one n_iq-point spectral frame over the observable band
[-B/2, B/2]. Signals are drawn from the bank, frequency-placed on the bin
grid, additively combined with background noise, and labeled geometrically:
label bit (c, j) is set exactly when sub-band j intersects the placed band
[f_m - b_m/2, f_m + b_m/2]. Sub-band j spans
[(j - n_iq/2) * F, (j - n_iq/2 + 1) * F) with F = B / n_iq.

Every sample is a pure function of (config, bank, index): sample k is
seeded by mix64(master_seed, k), so regeneration is byte-identical for any
worker count.
"""

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bank import SignalBank
from .dsp import fft_forward, round_half_up
from .errors import MissingClass
from .waveforms import synthesize_noise

STCH_MAGIC = b"STCH"
STCH_VERSION = 1

_M64 = (1 << 64) - 1
_NOISE_TAG = 0x9E3779B97F4A7C15


def mix64(a: int, b: int) -> int:
    """Fixed 64-bit mixing hash (splitmix64 finalizer over a + golden*(b+1))."""
    z = (a + 0x9E3779B97F4A7C15 * (b + 1)) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class GeneratorConfig:
    C: int
    B_hz: float
    n_s: int
    p_e: float
    p_c: float
    n_iq: int
    noise_power: float
    master_seed: int
    snr_range_db: tuple = (5.0, 25.0)

    def __post_init__(self):
        problems = []
        if self.C < 1:
            problems.append("C must be >= 1")
        if not self.B_hz > 0:
            problems.append("B_hz must be positive")
        if self.n_s < 1:
            problems.append("n_s must be >= 1")
        if not 0.0 <= self.p_e <= 1.0:
            problems.append("p_e must lie in [0, 1]")
        if not 0.0 <= self.p_c <= 1.0:
            problems.append("p_c must lie in [0, 1]")
        if self.n_iq < 32 or self.n_iq & (self.n_iq - 1) or self.n_iq % 32:
            problems.append("n_iq must be a power of two divisible by 32")
        if not self.noise_power > 0:
            problems.append("noise_power must be positive")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def F_hz(self):
        """Bin resolution B / n_iq."""
        return self.B_hz / self.n_iq


@dataclass(frozen=True)
class PlacedSignal:
    class_id: int
    bandwidth_hz: float
    center_hz: float
    bank_entry_index: int


@dataclass
class StitchedSample:
    input: np.ndarray  # (2, n_iq) float32, real row then imaginary row
    label: np.ndarray  # (C, n_iq) uint8
    provenance: list
    seed: int


def draw_signal_count(cfg: GeneratorConfig, rng) -> int:
    """0 with probability p_e, else uniform on {1, ..., n_s}."""
    if rng.random() < cfg.p_e:
        return 0
    return int(rng.integers(1, cfg.n_s + 1))


def draw_center_freq(cfg: GeneratorConfig, b_m_hz: float, rng) -> float:
    """0 Hz with probability p_c, else uniform on
    (-B/2 - b_m/2, B/2 + b_m/2) so the band always reaches the window."""
    if rng.random() < cfg.p_c:
        return 0.0
    half = cfg.B_hz / 2 + b_m_hz / 2
    return float(rng.uniform(-half, half))


def covered_columns(n_iq: int, f_hz: float, center_hz: float, bandwidth_hz: float):
    """Inclusive column range (j0, j1) of sub-bands intersecting the band
    with positive measure, clipped to the window; None when disjoint."""
    half = n_iq // 2
    lo = half + (center_hz - bandwidth_hz / 2) / f_hz
    hi = half + (center_hz + bandwidth_hz / 2) / f_hz
    j0 = int(np.floor(lo))
    j1 = int(np.ceil(hi)) - 1
    j0 = max(j0, 0)
    j1 = min(j1, n_iq - 1)
    if j0 > j1:
        return None
    return j0, j1


def _placed_bin_start(n_iq: int, k: int, n_bins: int) -> int:
    # entry bins land centered on quantized center bin k (window-relative)
    return k + n_iq // 2 - n_bins // 2


def generate_sample(cfg: GeneratorConfig, bank: SignalBank, index: int) -> StitchedSample:
    """Deterministic stitched sample for the given index."""
    seed = mix64(cfg.master_seed, index)
    rng = np.random.default_rng(seed)
    n = cfg.n_iq
    f_hz = cfg.F_hz
    acc = np.zeros(n, dtype=np.complex128)
    label = np.zeros((cfg.C, n), dtype=np.uint8)
    placed = []

    m = draw_signal_count(cfg, rng)
    for _ in range(m):
        class_id = int(rng.integers(1, cfg.C + 1))
        pool = bank.entries.get(class_id, ())
        if not len(pool):
            raise MissingClass(f"bank has no entries for class {class_id}")
        entry_idx = int(rng.integers(0, len(pool)))
        entry = pool[entry_idx]
        b_m = entry.bandwidth_hz
        while True:
            f_m = draw_center_freq(cfg, b_m, rng)
            k = round_half_up(f_m / f_hz)
            start = _placed_bin_start(n, k, entry.n_bins)
            if start < n and start + entry.n_bins > 0:
                break  # at least one energy bin lands in the window
        snr_db = float(rng.uniform(*cfg.snr_range_db))
        target = 10.0 ** (snr_db / 10.0) * n * cfg.noise_power
        mean_bin_power = float(np.mean(np.abs(entry.pruned_bins.astype(np.complex128)) ** 2))
        scale = np.sqrt(target / mean_bin_power)
        src_lo = max(0, -start)
        src_hi = min(entry.n_bins, n - start)
        acc[start + src_lo : start + src_hi] += (
            scale * entry.pruned_bins[src_lo:src_hi].astype(np.complex128)
        )
        cols = covered_columns(n, f_hz, f_m, b_m)
        if cols is not None:
            label[class_id - 1, cols[0] : cols[1] + 1] = 1
        placed.append(PlacedSignal(class_id, b_m, f_m, entry_idx))

    noise = synthesize_noise(n, cfg.noise_power, mix64(seed, _NOISE_TAG), cfg.B_hz)
    acc += fft_forward(noise).bins

    grid = np.empty((2, n), dtype=np.float32)
    grid[0] = acc.real
    grid[1] = acc.imag
    return StitchedSample(grid, label, placed, seed)


# ---------------------------------------------------------------------------
# STCH dataset file


@dataclass
class StitchedDataset:
    C: int
    n_iq: int
    B_hz: float
    seeds: np.ndarray  # (count,) uint64
    inputs: np.ndarray  # (count, 2, n_iq) float32
    labels: np.ndarray  # (count, C, n_iq) uint8

    def __len__(self):
        return self.seeds.size


_WORKER_CFG = None
_WORKER_BANK = None


def _worker_init(cfg, bank):
    global _WORKER_CFG, _WORKER_BANK
    _WORKER_CFG = cfg
    _WORKER_BANK = bank


def _worker_gen(index):
    s = generate_sample(_WORKER_CFG, _WORKER_BANK, index)
    return index, s.seed, s.input, s.label


def generate_samples(cfg: GeneratorConfig, bank: SignalBank, count: int, workers: int = 1):
    """All samples in index order; parallel generation never changes bytes."""
    _check_bank(cfg, bank)
    seeds = np.zeros(count, dtype=np.uint64)
    inputs = np.zeros((count, 2, cfg.n_iq), dtype=np.float32)
    labels = np.zeros((count, cfg.C, cfg.n_iq), dtype=np.uint8)
    if workers <= 1:
        for k in range(count):
            s = generate_sample(cfg, bank, k)
            seeds[k], inputs[k], labels[k] = s.seed, s.input, s.label
    else:
        chunk = max(1, count // (workers * 4))
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_worker_init, initargs=(cfg, bank)
        ) as pool:
            for k, seed, grid, lab in pool.map(_worker_gen, range(count), chunksize=chunk):
                seeds[k], inputs[k], labels[k] = seed, grid, lab
    return StitchedDataset(cfg.C, cfg.n_iq, cfg.B_hz, seeds, inputs, labels)


def _check_bank(cfg, bank):
    missing = [c for c in range(1, cfg.C + 1) if not bank.entries.get(c)]
    if missing:
        raise MissingClass(f"bank has no entries for classes {missing}")
    if abs(bank.bin_width_hz - cfg.F_hz) > 1e-6 * cfg.F_hz:
        raise ValueError(
            f"bank bin width {bank.bin_width_hz} Hz does not match generator "
            f"resolution {cfg.F_hz} Hz; rebuild the bank with fft_len = n_iq"
        )


def generate_dataset(cfg: GeneratorConfig, bank: SignalBank, count: int, path, workers: int = 1):
    """Generate `count` samples and write one STCH file."""
    ds = generate_samples(cfg, bank, count, workers)
    save_dataset(ds, path)
    return ds


def save_dataset(ds: StitchedDataset, path):
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHHIdQ", STCH_MAGIC, STCH_VERSION, ds.C, ds.n_iq,
                             ds.B_hz, len(ds)))
        for k in range(len(ds)):
            fh.write(struct.pack("<Q", int(ds.seeds[k])))
            fh.write(ds.inputs[k].astype("<f4").tobytes())
            fh.write(np.packbits(ds.labels[k].reshape(-1)).tobytes())


def load_dataset(path) -> StitchedDataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    head = struct.calcsize("<4sHHIdQ")
    if len(blob) < head:
        raise ValueError(f"{path}: shorter than STCH header")
    magic, version, c, n_iq, b_hz, count = struct.unpack("<4sHHIdQ", blob[:head])
    if magic != STCH_MAGIC or version != STCH_VERSION:
        raise ValueError(f"{path}: bad magic/version {magic!r} v{version}")
    label_bytes = (c * n_iq + 7) // 8
    rec = 8 + 2 * n_iq * 4 + label_bytes
    if len(blob) != head + count * rec:
        raise ValueError(f"{path}: expected {head + count * rec} bytes, got {len(blob)}")
    seeds = np.zeros(count, dtype=np.uint64)
    inputs = np.zeros((count, 2, n_iq), dtype=np.float32)
    labels = np.zeros((count, c, n_iq), dtype=np.uint8)
    off = head
    for k in range(count):
        (seeds[k],) = struct.unpack("<Q", blob[off : off + 8])
        off += 8
        inputs[k] = np.frombuffer(blob[off : off + 8 * n_iq], dtype="<f4").reshape(2, n_iq)
        off += 8 * n_iq
        bits = np.unpackbits(np.frombuffer(blob[off : off + label_bytes], dtype=np.uint8))
        labels[k] = bits[: c * n_iq].reshape(c, n_iq)
        off += label_bytes
    return StitchedDataset(c, n_iq, b_hz, seeds, inputs, labels)
