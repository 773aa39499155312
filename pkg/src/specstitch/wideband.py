"""Production inference: noise-floor normalization and overlapping-window
tiling for captures wider than the training bandwidth.

A capture of bandwidth B~ >= B is represented as a 2 x n_tilde grid with
n_tilde = (B~/B) * n_iq. It is sliced into n_iq-wide windows, each window
is normalized and classified independently, and per-bin probabilities are
averaged over every window that covers the bin.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dsp import smoothed_power_values
from .errors import InvalidGeometry, ZeroFloor

NOISE_SMOOTH_WINDOW = 31  # bins


@dataclass(frozen=True)
class NoiseReference:
    """Training-set average of per-sample minimum smoothed spectral power."""

    ref_floor: float

    def __post_init__(self):
        if not self.ref_floor > 0:
            raise ValueError("ref_floor must be positive")


def min_smoothed_power(grid) -> float:
    """Minimum of the smoothed |X|^2 profile of a 2 x n real/imag grid."""
    g = np.asarray(grid, dtype=np.float64)
    power = g[0] ** 2 + g[1] ** 2
    window = min(NOISE_SMOOTH_WINDOW, power.size if power.size % 2 else power.size - 1)
    return float(smoothed_power_values(power, max(1, window)).min())


def estimate_noise_reference(inputs) -> NoiseReference:
    """Average the per-sample minima of smoothed spectral power (window 31)."""
    inputs = np.asarray(inputs)
    if inputs.ndim != 3 or inputs.shape[0] == 0:
        raise ValueError("need a nonempty (count, 2, n_iq) array")
    minima = [min_smoothed_power(grid) for grid in inputs]
    return NoiseReference(float(np.mean(minima)))


def normalize(grid, ref: NoiseReference):
    """Scale so the input's minimum smoothed power lands on the reference
    floor: grid * sqrt(ref_floor / floor(grid))."""
    floor = min_smoothed_power(grid)
    if floor == 0.0:
        raise ZeroFloor("input has an all-zero smoothed power floor")
    return np.asarray(grid) * np.sqrt(ref.ref_floor / floor)


@dataclass(frozen=True)
class TilingPlan:
    b_tilde_hz: float
    b_hz: float
    n_iq: int
    n_iq_tilde: int
    window_starts: tuple
    overlap_fraction: float


def plan_tiling(b_tilde_hz, b_hz, n_iq, overlap_fraction=0.5) -> TilingPlan:
    """Window starts covering every bin: stride round(n_iq*(1-overlap)),
    first window at 0, last window end-aligned."""
    if b_tilde_hz < b_hz or b_hz <= 0:
        raise InvalidGeometry(f"need B~ >= B > 0, got B~={b_tilde_hz}, B={b_hz}")
    if not 0.0 <= overlap_fraction < 1.0:
        raise InvalidGeometry(f"overlap_fraction must lie in [0, 1), got {overlap_fraction}")
    exact = b_tilde_hz / b_hz * n_iq
    n_tilde = int(round(exact))
    if abs(exact - n_tilde) > 1e-9 * max(1.0, n_tilde):
        raise InvalidGeometry(
            f"B~/B * n_iq = {exact} is not an integer; pick B~ on the bin grid"
        )
    stride = max(1, round(n_iq * (1.0 - overlap_fraction)))
    starts = list(range(0, n_tilde - n_iq + 1, stride))
    if starts[-1] != n_tilde - n_iq:
        starts.append(n_tilde - n_iq)
    return TilingPlan(b_tilde_hz, b_hz, n_iq, n_tilde, tuple(starts), overlap_fraction)


@dataclass
class OccupancyMap:
    probs: np.ndarray  # (C, n_iq_tilde) float32
    binary: np.ndarray  # (C, n_iq_tilde) uint8
    bin_width_hz: float
    threshold: float


def infer_wideband(net, wide, plan: TilingPlan, ref: NoiseReference,
                   threshold: float = 0.5, workers: int = 1) -> OccupancyMap:
    """Slice, normalize and classify every window, then average per bin over
    the windows covering it. Results do not depend on worker scheduling:
    window outputs are reduced in window order."""
    wide = np.asarray(wide)
    if wide.shape != (2, plan.n_iq_tilde):
        raise InvalidGeometry(f"wide input {wide.shape} vs plan (2, {plan.n_iq_tilde})")

    def one(start):
        window = normalize(wide[:, start : start + plan.n_iq], ref)
        return net.forward(window, train=False)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(one, plan.window_starts))
    else:
        outputs = [one(s) for s in plan.window_starts]

    sums = np.zeros((outputs[0].shape[0], plan.n_iq_tilde), dtype=np.float64)
    counts = np.zeros(plan.n_iq_tilde, dtype=np.float64)
    for start, probs in zip(plan.window_starts, outputs):
        sums[:, start : start + plan.n_iq] += probs
        counts[start : start + plan.n_iq] += 1.0
    avg = (sums / counts).astype(np.float32)
    binary = (avg >= threshold).astype(np.uint8)
    return OccupancyMap(avg, binary, plan.b_hz / plan.n_iq, threshold)


def occupancy_to_csv(occ: OccupancyMap, path, class_names=None):
    c, n = occ.probs.shape
    names = class_names or [f"class{i}" for i in range(1, c + 1)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["bin_index", "freq_hz"]
            + [f"prob_{n_}" for n_ in names]
            + [f"busy_{n_}" for n_ in names]
        )
        freqs = (np.arange(n) - n // 2) * occ.bin_width_hz
        for j in range(n):
            writer.writerow(
                [j, f"{freqs[j]:.3f}"]
                + [f"{occ.probs[i, j]:.6f}" for i in range(c)]
                + [int(occ.binary[i, j]) for i in range(c)]
            )


def render_spectrum_map(frames_binary, path, class_names=None):
    """Stack per-frame occupancy rows over time into a class-colored image,
    one row per frame, frequency on the horizontal axis."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.colors import ListedColormap

    frames = np.asarray(frames_binary)
    if frames.ndim == 2:
        frames = frames[None]
    t, c, n = frames.shape
    class_map = np.zeros((t, n), dtype=np.int32)
    for i in range(c):  # higher class ids win the display on overlap
        class_map[frames[:, i, :] > 0] = i + 1
    names = class_names or [f"class{i}" for i in range(1, c + 1)]
    base = plt.get_cmap("tab10")
    colors = [(0, 0, 0, 1)] + [base(i % 10) for i in range(c)]
    fig, ax = plt.subplots(figsize=(8, max(2, t * 0.05 + 1)))
    im = ax.imshow(class_map, aspect="auto", cmap=ListedColormap(colors),
                   vmin=-0.5, vmax=c + 0.5, interpolation="nearest")
    cbar = fig.colorbar(im, ax=ax, ticks=range(c + 1))
    cbar.ax.set_yticklabels(["empty"] + list(names))
    ax.set_xlabel("frequency bin")
    ax.set_ylabel("frame")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
