"""Seed dataset of pruned frequency-domain signal fragments.

Pipeline per capture: crop silence, bandpass (ideal frequency mask), FFT
zero-padded to the next power of two, then prune to the bins inside the
band of interest. Fragments are stored in the frequency domain because the
stitcher places them spectrally; bins are kept as complex64 so persisted
entries round-trip bit-exactly.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .dsp import (
    FilterSpec,
    IqBuffer,
    band_bin_slice,
    bandpass,
    fft_forward,
    smoothed_power_values,
)
from .errors import AllSilence, CorruptBank

BANK_MAGIC = b"SBNK"
BANK_VERSION = 1

SILENCE_THRESHOLD = 0.02  # -17 dB relative to peak smoothed power
SILENCE_WINDOW = 64


def crop_silence(x: IqBuffer, threshold_rel: float = SILENCE_THRESHOLD) -> IqBuffer:
    """Contiguous span from first to last sample whose smoothed instantaneous
    power exceeds threshold_rel * peak smoothed power (window 64 samples)."""
    if not 0.0 < threshold_rel < 1.0:
        raise ValueError("threshold_rel must lie in (0, 1)")
    window = min(SILENCE_WINDOW + 1, len(x) if len(x) % 2 == 1 else len(x) - 1)
    window = max(1, window)
    p = smoothed_power_values(np.abs(x.samples) ** 2, window)
    peak = p.max()
    if peak <= 0.0:
        raise AllSilence("buffer has no energy")
    above = np.nonzero(p > threshold_rel * peak)[0]
    if above.size == 0:
        raise AllSilence("no sample exceeds the crop threshold")
    return IqBuffer(x.samples[above[0] : above[-1] + 1], x.sample_rate_hz)


@dataclass
class BankEntry:
    """One pruned fragment: contiguous signal-band bins plus metadata."""

    class_id: int
    pruned_bins: np.ndarray  # complex64, contiguous signal-band bins
    bandwidth_hz: float
    source_bin_width_hz: float

    def __post_init__(self):
        self.pruned_bins = np.asarray(self.pruned_bins, dtype=np.complex64)
        if self.pruned_bins.size < 1:
            raise ValueError("entry needs at least one bin")
        if not np.any(self.pruned_bins):
            raise ValueError("entry has zero energy")

    @property
    def n_bins(self):
        return self.pruned_bins.size


@dataclass
class SignalBank:
    """Entries grouped by class id; uniform bin width across entries."""

    class_count: int
    bin_width_hz: float
    entries: dict = field(default_factory=dict)  # class_id -> list[BankEntry]

    def add(self, entry: BankEntry):
        if abs(entry.source_bin_width_hz - self.bin_width_hz) > 1e-6 * self.bin_width_hz:
            raise ValueError(
                f"entry bin width {entry.source_bin_width_hz} does not match "
                f"bank bin width {self.bin_width_hz}"
            )
        self.entries.setdefault(entry.class_id, []).append(entry)

    def entry_count(self):
        return sum(len(v) for v in self.entries.values())


def _next_pow2(n):
    p = 1
    while p < n:
        p <<= 1
    return p


def make_entry(x: IqBuffer, class_id: int, band: FilterSpec, n_fft: int = 0) -> BankEntry:
    """Bandpass (frequency-domain mask), FFT zero-padded to the next power of
    two (or to n_fft when given), keep only the bins inside the band."""
    n_fft = max(n_fft, _next_pow2(len(x)))
    padded = np.zeros(n_fft, dtype=np.complex128)
    padded[: len(x)] = x.samples
    spec = bandpass(fft_forward(IqBuffer(padded, x.sample_rate_hz)), band)
    keep = band_bin_slice(n_fft, spec.bin_width_hz, band)
    bins = spec.bins[keep]
    return BankEntry(
        class_id=class_id,
        pruned_bins=bins.astype(np.complex64),
        bandwidth_hz=bins.size * spec.bin_width_hz,
        source_bin_width_hz=spec.bin_width_hz,
    )


def cut_fragments(x: IqBuffer, fft_len: int, rng, min_fragments=2, max_fragments=4):
    """Cut a cropped capture into 2..4 fragments with lengths in
    (fft_len/2, fft_len], so each pads to the same FFT size."""
    lo = fft_len // 2 + 1
    out = []
    n_target = int(rng.integers(min_fragments, max_fragments + 1))
    pos = 0
    for _ in range(n_target):
        length = int(rng.integers(lo, fft_len + 1))
        if pos + lo > len(x):
            break
        frag = x.samples[pos : pos + min(length, len(x) - pos)]
        if frag.size >= lo:
            out.append(IqBuffer(frag, x.sample_rate_hz))
        pos += length
    if not out:
        # capture shorter than half the FFT; keep it whole
        out.append(x)
    return out


def bank_save(bank: SignalBank, path):
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHHdI", BANK_MAGIC, BANK_VERSION, bank.class_count,
                             bank.bin_width_hz, bank.entry_count()))
        for class_id in sorted(bank.entries):
            for e in bank.entries[class_id]:
                fh.write(struct.pack("<HId", e.class_id, e.n_bins, e.bandwidth_hz))
                inter = np.empty(2 * e.n_bins, dtype="<f4")
                inter[0::2] = e.pruned_bins.real
                inter[1::2] = e.pruned_bins.imag
                fh.write(inter.tobytes())


def bank_load(path) -> SignalBank:
    with open(path, "rb") as fh:
        blob = fh.read()
    head = struct.calcsize("<4sHHdI")
    if len(blob) < head:
        raise CorruptBank("file shorter than header")
    magic, version, class_count, bin_width, n_entries = struct.unpack("<4sHHdI", blob[:head])
    if magic != BANK_MAGIC:
        raise CorruptBank(f"bad magic {magic!r}")
    if version != BANK_VERSION:
        raise CorruptBank(f"unsupported version {version}")
    bank = SignalBank(class_count=class_count, bin_width_hz=bin_width)
    off = head
    ehead = struct.calcsize("<HId")
    for _ in range(n_entries):
        if off + ehead > len(blob):
            raise CorruptBank("truncated entry header")
        class_id, n_bins, bandwidth = struct.unpack("<HId", blob[off : off + ehead])
        off += ehead
        nbytes = 8 * n_bins
        if off + nbytes > len(blob):
            raise CorruptBank("truncated entry payload")
        inter = np.frombuffer(blob[off : off + nbytes], dtype="<f4")
        off += nbytes
        bins = (inter[0::2] + 1j * inter[1::2]).astype(np.complex64)
        bank.add(BankEntry(class_id, bins, bandwidth, bin_width))
    if off != len(blob):
        raise CorruptBank(f"{len(blob) - off} trailing bytes")
    return bank
