"""Complex-sample containers and spectral primitives.

Transform convention used throughout: unnormalized forward DFT
X_k = sum_j x_j exp(-2*pi*i*j*k/n), reordered so DC sits at index n//2
(bin index 0 is -B/2, the last bin just below +B/2); the inverse applies
the 1/n factor. Bin j carries frequency (j - n//2) * bin_width_hz.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import accel
from .errors import InvalidBand, InvalidWindow, NonPowerOfTwoLength


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


def round_half_up(x):
    """round() with ties away from -inf, so bin offsets are well defined."""
    return int(np.floor(x + 0.5))


@dataclass
class IqBuffer:
    """A finite run of complex baseband samples at a fixed sample rate."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("IqBuffer needs a nonempty 1D sample vector")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        if not np.all(np.isfinite(self.samples.view(np.float64))):
            raise ValueError("IqBuffer samples must be finite")

    def __len__(self):
        return self.samples.size

    @property
    def energy(self):
        return float(np.sum(np.abs(self.samples) ** 2))


@dataclass
class Spectrum:
    """DC-centered complex bins with uniform width."""

    bins: np.ndarray
    bin_width_hz: float

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.complex128)
        if self.bins.ndim != 1 or self.bins.size < 1:
            raise ValueError("Spectrum needs a nonempty 1D bin vector")
        if not self.bin_width_hz > 0:
            raise ValueError("bin_width_hz must be positive")

    def __len__(self):
        return self.bins.size

    @property
    def span_hz(self):
        return self.bin_width_hz * self.bins.size

    @property
    def bin_freqs_hz(self):
        n = self.bins.size
        return (np.arange(n) - n // 2) * self.bin_width_hz

    @property
    def energy(self):
        return float(np.sum(np.abs(self.bins) ** 2))


@dataclass(frozen=True)
class FilterSpec:
    """Brick-wall passband edges relative to DC."""

    low_hz: float
    high_hz: float


def fft_forward(x: IqBuffer) -> Spectrum:
    """Unnormalized forward DFT, DC-centered. Length must be a power of two."""
    n = len(x)
    if not _is_pow2(n):
        raise NonPowerOfTwoLength(f"fft_forward needs a power-of-two length, got {n}")
    raw = accel.fft_radix2(x.samples)
    return Spectrum(np.roll(raw, n // 2), x.sample_rate_hz / n)


def fft_inverse(s: Spectrum) -> IqBuffer:
    """Inverse of fft_forward; applies the 1/n normalization."""
    n = len(s)
    if not _is_pow2(n):
        raise NonPowerOfTwoLength(f"fft_inverse needs a power-of-two length, got {n}")
    raw = np.roll(s.bins, -(n // 2))
    time = np.conj(accel.fft_radix2(np.conj(raw))) / n
    return IqBuffer(time, s.bin_width_hz * n)


def freq_shift(s: Spectrum, shift_hz: float) -> Spectrum:
    """Move every bin by round(shift_hz / bin_width) positions, zero-filling
    the vacated edge. Bins shifted past the window are discarded."""
    n = len(s)
    k = round_half_up(shift_hz / s.bin_width_hz)
    out = np.zeros(n, dtype=np.complex128)
    if abs(k) < n:
        if k >= 0:
            out[k:] = s.bins[: n - k]
        else:
            out[: n + k] = s.bins[-k:]
    return Spectrum(out, s.bin_width_hz)


def bandpass(s: Spectrum, f: FilterSpec) -> Spectrum:
    """Keep bins whose center frequency lies in [low_hz, high_hz]; zero the rest."""
    if not f.low_hz < f.high_hz:
        raise InvalidBand(f"passband edges inverted: low={f.low_hz}, high={f.high_hz}")
    freqs = s.bin_freqs_hz
    mask = (freqs >= f.low_hz) & (freqs <= f.high_hz)
    return Spectrum(np.where(mask, s.bins, 0.0), s.bin_width_hz)


def band_bin_slice(n: int, bin_width_hz: float, f: FilterSpec) -> slice:
    """Contiguous index range of bins whose center frequency is inside the band."""
    if not f.low_hz < f.high_hz:
        raise InvalidBand(f"passband edges inverted: low={f.low_hz}, high={f.high_hz}")
    freqs = (np.arange(n) - n // 2) * bin_width_hz
    inside = np.nonzero((freqs >= f.low_hz) & (freqs <= f.high_hz))[0]
    if inside.size == 0:
        return slice(0, 0)
    return slice(int(inside[0]), int(inside[-1]) + 1)


def smoothed_power(s: Spectrum, window_bins: int) -> np.ndarray:
    """Moving average of |X_k|^2 with a symmetric window that shrinks at the
    edges; output length equals the bin count."""
    n = len(s)
    if window_bins % 2 == 0 or window_bins < 1 or window_bins > n:
        raise InvalidWindow(f"window_bins must be odd and <= {n}, got {window_bins}")
    p = np.abs(s.bins) ** 2
    return smoothed_power_values(p, window_bins)


def smoothed_power_values(p: np.ndarray, window_bins: int) -> np.ndarray:
    """Edge-shrinking moving average of an arbitrary power vector."""
    n = p.size
    half = window_bins // 2
    csum = np.concatenate(([0.0], np.cumsum(p, dtype=np.float64)))
    idx = np.arange(n)
    lo = np.maximum(0, idx - half)
    hi = np.minimum(n, idx + half + 1)
    return (csum[hi] - csum[lo]) / (hi - lo)


# ---------------------------------------------------------------------------
# IQF32 file format: interleaved little-endian float32 (I then Q per sample)
# plus a JSON sidecar "<path>.json" with sample_rate_hz, center_freq_hz,
# class and sample_count.


def write_iqf32(path, x: IqBuffer, class_name: str, center_freq_hz: float = 0.0):
    inter = np.empty(2 * len(x), dtype="<f4")
    inter[0::2] = x.samples.real.astype(np.float32)
    inter[1::2] = x.samples.imag.astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(inter.tobytes())
    meta = {
        "sample_rate_hz": float(x.sample_rate_hz),
        "center_freq_hz": float(center_freq_hz),
        "class": class_name,
        "sample_count": int(len(x)),
    }
    with open(f"{path}.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def read_iqf32(path):
    with open(f"{path}.json") as fh:
        meta = json.load(fh)
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != 2 * meta["sample_count"]:
        raise ValueError(f"{path}: sample_count {meta['sample_count']} does not match payload")
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    return IqBuffer(samples, meta["sample_rate_hz"]), meta
