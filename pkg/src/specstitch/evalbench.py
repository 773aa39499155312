"""Quantitative evaluation: IoU, box-oracle hole analysis, non-local
ablation, and inference-latency scaling."""

import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import ShapeMismatch
from .model import SegNet, TrainConfig, train
from .wideband import NoiseReference, infer_wideband, plan_tiling


@dataclass
class IoUReport:
    per_class: dict  # class_id -> IoU over pooled bins (classes seen anywhere)
    mean_iou: float  # mean over classes present in ground truth
    sample_count: int


class IoUAccumulator:
    """Pools intersection/union bin counts per class across frames."""

    def __init__(self, class_count):
        self.inter = np.zeros(class_count, dtype=np.int64)
        self.union = np.zeros(class_count, dtype=np.int64)
        self.truth_bins = np.zeros(class_count, dtype=np.int64)
        self.count = 0

    def feed(self, pred, truth):
        pred = np.asarray(pred, dtype=bool)
        truth = np.asarray(truth, dtype=bool)
        if pred.shape != truth.shape:
            raise ShapeMismatch(f"pred {pred.shape} vs truth {truth.shape}")
        if pred.ndim == 2:
            pred, truth = pred[None], truth[None]
        self.inter += (pred & truth).sum(axis=(0, 2))
        self.union += (pred | truth).sum(axis=(0, 2))
        self.truth_bins += truth.sum(axis=(0, 2))
        self.count += pred.shape[0]

    def report(self) -> IoUReport:
        per_class = {}
        in_mean = []
        for i in range(self.inter.size):
            if self.union[i] == 0:
                continue  # class absent from both pred and truth: excluded
            value = self.inter[i] / self.union[i]
            per_class[i + 1] = float(value)
            if self.truth_bins[i] > 0:
                in_mean.append(value)
        mean = float(np.mean(in_mean)) if in_mean else 0.0
        return IoUReport(per_class, mean, self.count)


def iou(pred, truth) -> IoUReport:
    """Per-class intersection-over-union of binary C x n grids (or batches)."""
    pred = np.asarray(pred)
    acc = IoUAccumulator(pred.shape[-2])
    acc.feed(pred, truth)
    return acc.report()


def evaluate_model(net: SegNet, inputs, labels, threshold=0.5, batch=64) -> IoUReport:
    """Eval-mode IoU of thresholded predictions over a held-out set."""
    acc = IoUAccumulator(labels.shape[1])
    for start in range(0, inputs.shape[0], batch):
        probs = net.forward(inputs[start : start + batch], train=False)
        acc.feed(probs >= threshold, labels[start : start + batch])
    return acc.report()


# ---------------------------------------------------------------------------
# Box-oracle hole analysis


@dataclass
class BoxCompareReport:
    segmentation_occupancy_error: float  # ideal segmentation = truth: 0.0
    box_occupancy_error: float  # gap bins swallowed by boxes / total bins
    frame_count: int


def box_oracle_compare(frames) -> BoxCompareReport:
    """For each frame and class row, the box oracle fills the tightest bin
    interval covering all labeled bins (a perfect detector's output, one
    signal per class row assumed); its error is the fraction of bins it
    marks occupied beyond the truth."""
    total_bins = 0
    box_excess = 0
    seg_excess = 0
    count = 0
    for frame in frames:
        frame = np.asarray(frame, dtype=bool)
        c, n = frame.shape
        total_bins += n
        count += 1
        for i in range(c):
            cols = np.nonzero(frame[i])[0]
            if cols.size == 0:
                continue
            box = cols[-1] - cols[0] + 1
            box_excess += box - cols.size
            seg_excess += 0  # ideal segmentation output is the truth itself
    if count == 0:
        raise ValueError("empty frame stream")
    return BoxCompareReport(seg_excess / total_bins, box_excess / total_bins, count)


def lte_hole_frames(count, n_bins, class_count, class_row, band_bins, run_bins,
                    hole_fraction, seed):
    """Ground-truth stream for the hole analysis: one signal per frame whose
    in-band occupancy drops whole interior subcarrier runs, mirroring the
    underutilized-OFDM synthesis. Edge runs stay on, so the box oracle always
    spans the full band and its expected excess is hole_fraction * band/n."""
    rng = np.random.default_rng(seed)
    n_runs = band_bins // run_bins
    n_off = int(round(hole_fraction * n_runs))
    if n_off > n_runs - 2:
        raise ValueError("hole_fraction too large for the run layout")
    frames = np.zeros((count, class_count, n_bins), dtype=np.uint8)
    for t in range(count):
        start = int(rng.integers(0, n_bins - band_bins + 1))
        mask = np.ones(band_bins, dtype=np.uint8)
        off = rng.choice(np.arange(1, n_runs - 1), size=n_off, replace=False)
        for r in off:
            mask[r * run_bins : (r + 1) * run_bins] = 0
        frames[t, class_row - 1, start : start + band_bins] = mask
    return frames


# ---------------------------------------------------------------------------
# Non-local ablation


@dataclass
class AblationRow:
    seed: int
    use_nonlocal: bool
    report: IoUReport
    param_count: int


@dataclass
class AblationReport:
    rows: list
    wideband_class_ids: tuple
    deltas: list  # per-seed wideband-class IoU delta (with - without)

    @property
    def mean_delta(self):
        return float(np.mean(self.deltas))

    @property
    def std_delta(self):
        return float(np.std(self.deltas))


def _wideband_mean(report: IoUReport, ids):
    vals = [report.per_class.get(i, 0.0) for i in ids]
    return float(np.mean(vals))


def ablation_run(train_inputs, train_labels, test_inputs, test_labels,
                 seeds, base_cfg, hyper: TrainConfig, wideband_class_ids=(1, 2),
                 threshold=0.5) -> AblationReport:
    """Train matched pairs differing only in use_nonlocal and report the
    wideband-class IoU delta per seed."""
    if len(seeds) < 3:
        raise ValueError("ablation needs at least 3 seeds")
    rows = []
    deltas = []
    for seed in seeds:
        pair = {}
        for use_nl in (True, False):
            cfg = replace(base_cfg, use_nonlocal=use_nl)
            net = SegNet(cfg, seed=seed)
            train(net, train_inputs, train_labels, replace(hyper, seed=seed))
            report = evaluate_model(net, test_inputs, test_labels, threshold)
            rows.append(AblationRow(seed, use_nl, report, net.param_count()))
            pair[use_nl] = report
        deltas.append(
            _wideband_mean(pair[True], wideband_class_ids)
            - _wideband_mean(pair[False], wideband_class_ids)
        )
    return AblationReport(rows, tuple(wideband_class_ids), deltas)


# ---------------------------------------------------------------------------
# Latency benchmark


@dataclass
class LatencyRow:
    bandwidth_multiple: float
    n_windows: int
    mean_s: float
    std_s: float


@dataclass
class LatencyReport:
    rows: list
    runs: int

    def ratio(self, multiple):
        base = next(r for r in self.rows if r.bandwidth_multiple == 1)
        other = next(r for r in self.rows if r.bandwidth_multiple == multiple)
        return other.mean_s / base.mean_s


def latency_bench(net: SegNet, bandwidth_multiples, runs, b_hz=25e6,
                  overlap=0.5, warmup=10, seed=0, workers: int = 1) -> LatencyReport:
    """Wall-clock infer_wideband timing per bandwidth multiple; serial by
    default so scaling reflects the window count."""
    if runs < 100:
        raise ValueError("latency_bench needs runs >= 100")
    rng = np.random.default_rng(seed)
    ref = NoiseReference(1.0)
    rows = []
    for mult in bandwidth_multiples:
        plan = plan_tiling(mult * b_hz, b_hz, net.cfg.n_iq, overlap)
        wide = rng.normal(size=(2, plan.n_iq_tilde)).astype(np.float32)
        for _ in range(warmup):
            infer_wideband(net, wide, plan, ref, workers=workers)
        samples = np.empty(runs)
        for r in range(runs):
            t0 = time.perf_counter()
            infer_wideband(net, wide, plan, ref, workers=workers)
            samples[r] = time.perf_counter() - t0
        rows.append(LatencyRow(mult, len(plan.window_starts),
                               float(samples.mean()), float(samples.std())))
    return LatencyReport(rows, runs)
