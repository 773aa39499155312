"""Synthetic stand-ins for the five protocol classes.

Each family is built to have a spectrally distinct footprint inside its
nominal band: flat OFDM (WiFi), OFDM with zeroed subcarrier runs (LTE),
Gaussian-filtered binary FSK (BLE), linear up-chirps (LoRa), and
direct-sequence half-sine OQPSK chips (ZigBee). Everything is deterministic
given the seed. None of this is standards conformant; the point is five
learnable, mutually distinguishable shapes.
"""

from dataclasses import dataclass

import numpy as np

from .dsp import IqBuffer, Spectrum, fft_inverse
from .errors import UnknownClass


@dataclass(frozen=True)
class ProtocolClass:
    """A protocol label with its desk-scale nominal bandwidth."""

    id: int
    name: str
    nominal_bandwidth_hz: float


# id 0 is reserved for empty spectrum and never synthesized. Bandwidths are
# desk-scale stand-ins spaced so every class is separable at coarse bin
# resolution; real-world values differ.
DEFAULT_CLASSES = (
    ProtocolClass(1, "WiFi", 4.0e6),
    ProtocolClass(2, "LTE", 3.0e6),
    ProtocolClass(3, "BLE", 1.0e6),
    ProtocolClass(4, "LoRa", 1.8e6),
    ProtocolClass(5, "ZigBee", 2.6e6),
)

WIDEBAND_CLASS_NAMES = ("WiFi", "LTE")  # largest nominal bandwidths


@dataclass(frozen=True)
class SynthParams:
    cls: ProtocolClass
    duration_samples: int
    sample_rate_hz: float
    snr_db: float = 30.0
    seed: int = 0
    lte_hole_fraction: float = 0.25

    def __post_init__(self):
        if self.duration_samples < 64:
            raise ValueError("duration_samples must be >= 64")


_OFDM_SYMBOL_LEN = 256


def _qpsk(rng, size):
    return np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, size)))


def _ofdm(p: SynthParams, rng, hole_fraction=0.0):
    """Random-QPSK OFDM confined to the nominal band, one rectangular symbol
    per _OFDM_SYMBOL_LEN samples; optional zeroed subcarrier runs."""
    fs = p.sample_rate_hz
    spacing = fs / _OFDM_SYMBOL_LEN
    half = int(np.floor(p.cls.nominal_bandwidth_hz / 2 / spacing))
    sub_idx = np.arange(-half, half + 1) + _OFDM_SYMBOL_LEN // 2
    active = np.ones(sub_idx.size, dtype=bool)
    if hole_fraction > 0.0:
        # zero whole runs of interior subcarriers; edge runs stay on so the
        # occupied band still spans the nominal width
        run = 4
        n_runs = (sub_idx.size - 2 * run) // run
        n_off = min(n_runs, int(round(hole_fraction * sub_idx.size / run)))
        off_runs = rng.choice(n_runs, size=n_off, replace=False)
        for r in off_runs:
            start = run + r * run
            active[start : start + run] = False
    n_sym = int(np.ceil(p.duration_samples / _OFDM_SYMBOL_LEN))
    out = np.empty(n_sym * _OFDM_SYMBOL_LEN, dtype=np.complex128)
    for s in range(n_sym):
        bins = np.zeros(_OFDM_SYMBOL_LEN, dtype=np.complex128)
        bins[sub_idx[active]] = _qpsk(rng, int(active.sum()))
        sym = fft_inverse(Spectrum(bins, spacing)).samples
        out[s * _OFDM_SYMBOL_LEN : (s + 1) * _OFDM_SYMBOL_LEN] = sym
    return out[: p.duration_samples]


def _gfsk(p: SynthParams, rng):
    """Gaussian-shaped binary FSK with widely separated tone lobes."""
    fs = p.sample_rate_hz
    bw = p.cls.nominal_bandwidth_hz
    sym_rate = bw / 2.5
    deviation = bw / 4  # two lobes near +-bw/4
    sps = max(2, int(round(fs / sym_rate)))
    n_sym = int(np.ceil(p.duration_samples / sps)) + 4
    nrz = 2.0 * rng.integers(0, 2, n_sym) - 1.0
    train = np.repeat(nrz, sps)
    # BT = 0.5 Gaussian pulse over the symbol train
    bt = 0.5
    sigma = np.sqrt(np.log(2)) / (2 * np.pi * bt) * sps
    half_len = int(np.ceil(4 * sigma))
    t = np.arange(-half_len, half_len + 1)
    g = np.exp(-0.5 * (t / sigma) ** 2)
    g /= g.sum()
    shaped = np.convolve(train, g, mode="same")
    phase = np.cumsum(2 * np.pi * deviation * shaped / fs)
    return np.exp(1j * phase)[: p.duration_samples]


def _chirps(p: SynthParams, rng):
    """Coherently repeated linear up-chirps sweeping the nominal band. The
    repetition makes a line spectrum (comb across the band), which keeps the
    class separable from smooth single-lobe shapes."""
    fs = p.sample_rate_hz
    bw = p.cls.nominal_bandwidth_hz
    chirp_len = max(64, int(round(12 * fs / bw)))
    n_chirp = int(np.ceil(p.duration_samples / chirp_len)) + 1
    frac = np.tile(np.arange(chirp_len) / chirp_len, n_chirp)
    inst_freq = -bw / 2 + bw * frac
    phase = np.cumsum(2 * np.pi * inst_freq / fs) + 2 * np.pi * rng.random()
    return np.exp(1j * phase)[: p.duration_samples]


def _dsss_oqpsk(p: SynthParams, rng):
    """Pseudo-noise QPSK chips with half-sine pulses and offset quadrature."""
    fs = p.sample_rate_hz
    cr = p.cls.nominal_bandwidth_hz / 2  # chip rate
    sps = max(2, int(round(fs / cr)))
    n_chip = int(np.ceil(p.duration_samples / sps)) + 2
    chips_i = 2.0 * rng.integers(0, 2, n_chip) - 1.0
    chips_q = 2.0 * rng.integers(0, 2, n_chip) - 1.0
    pulse = np.sin(np.pi * np.arange(sps) / sps)
    i_arm = np.repeat(chips_i, sps) * np.tile(pulse, n_chip)
    q_arm = np.repeat(chips_q, sps) * np.tile(pulse, n_chip)
    sig = i_arm.astype(np.complex128)
    sig[sps // 2 :] += 1j * q_arm[: -(sps // 2)]
    return sig[: p.duration_samples]


_FAMILIES = {
    "WiFi": lambda p, rng: _ofdm(p, rng),
    "LTE": lambda p, rng: _ofdm(p, rng, hole_fraction=p.lte_hole_fraction),
    "BLE": _gfsk,
    "LoRa": _chirps,
    "ZigBee": _dsss_oqpsk,
}


def synthesize(p: SynthParams) -> IqBuffer:
    """Deterministic waveform for the class, unit mean power, plus circular
    AWGN at snr_db below the signal."""
    if p.cls.name not in _FAMILIES:
        raise UnknownClass(f"no synthesizer for class {p.cls.name!r}")
    rng = np.random.default_rng(p.seed)
    sig = _FAMILIES[p.cls.name](p, rng)
    sig = sig / np.sqrt(np.mean(np.abs(sig) ** 2))
    noise_power = 10.0 ** (-p.snr_db / 10.0)
    scale = np.sqrt(noise_power / 2)
    noise = scale * rng.standard_normal(len(sig)) + 1j * scale * rng.standard_normal(len(sig))
    return IqBuffer(sig + noise, p.sample_rate_hz)


def synthesize_noise(
    duration_samples: int, power: float, seed: int, sample_rate_hz: float = 1.0
) -> IqBuffer:
    """Circularly-symmetric Gaussian noise with per-sample expected power."""
    if not power > 0:
        raise ValueError("noise power must be positive")
    rng = np.random.default_rng(seed)
    scale = np.sqrt(power / 2)
    re = rng.standard_normal(duration_samples)
    im = rng.standard_normal(duration_samples)
    return IqBuffer(scale * (re + 1j * im), sample_rate_hz)
