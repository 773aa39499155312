"""End-to-end pipeline steps shared by the CLI and the acceptance suite.

Every artifact is a pure function of the run configuration: all seeds
derive from the master seed through mix64 with fixed tags.
"""

import json
import logging
from pathlib import Path

import numpy as np

from .bank import SignalBank, crop_silence, cut_fragments, make_entry
from .config import RunConfig
from .dsp import FilterSpec, read_iqf32, write_iqf32
from .generator import generate_samples, mix64, save_dataset
from .model import SegNet, checkpoint_save, train
from .waveforms import SynthParams, synthesize
from .wideband import estimate_noise_reference

log = logging.getLogger(__name__)

_TAG_SYNTH = 0x53594E54  # capture seeds
_TAG_FRAG = 0x46524147  # fragment cutting
_TAG_TEST = 0x54455354  # held-out dataset master seed


def capture_seed(master_seed, class_id, index):
    return mix64(mix64(master_seed, _TAG_SYNTH), (class_id << 32) | index)


def synth_captures(cfg: RunConfig, iq_dir):
    """Write captures_per_class IQF32 files per class, silence-padded so the
    bank pipeline has something to crop."""
    iq_dir = Path(iq_dir)
    iq_dir.mkdir(parents=True, exist_ok=True)
    syn = cfg.raw["synth"]
    paths = []
    for cls in cfg.classes:
        for k in range(syn["captures_per_class"]):
            seed = capture_seed(cfg.seed, cls.id, k)
            buf = synthesize(
                SynthParams(
                    cls=cls,
                    duration_samples=syn["duration_samples"],
                    sample_rate_hz=syn["sample_rate_hz"],
                    snr_db=syn["snr_db"],
                    seed=seed,
                )
            )
            pad = np.zeros(syn["duration_samples"] // 8, dtype=np.complex128)
            padded = np.concatenate([pad, buf.samples, pad])
            out = iq_dir / f"{cls.name.lower()}_{k:03d}.iqf32"
            write_iqf32(out, type(buf)(padded, buf.sample_rate_hz), cls.name)
            paths.append(out)
    return paths


def bank_from_captures(cfg: RunConfig, captures) -> SignalBank:
    """captures: iterable of (IqBuffer, class_id). Crops, cuts fragments and
    prunes each to its class band at the configured FFT size."""
    fft_len = cfg.raw["bank"]["fft_len"]
    threshold = cfg.raw["bank"]["silence_threshold"]
    by_id = {c.id: c for c in cfg.classes}
    bank = SignalBank(class_count=len(cfg.classes), bin_width_hz=cfg.b_hz / fft_len)
    rng = np.random.default_rng(mix64(cfg.seed, _TAG_FRAG))
    for buf, class_id in captures:
        cls = by_id[class_id]
        band = FilterSpec(-cls.nominal_bandwidth_hz / 2, cls.nominal_bandwidth_hz / 2)
        cropped = crop_silence(buf, threshold)
        for frag in cut_fragments(cropped, fft_len, rng):
            bank.add(make_entry(frag, class_id, band, n_fft=fft_len))
    return bank


def bank_from_iq_dir(cfg: RunConfig, iq_dir) -> SignalBank:
    name_to_id = {c.name: c.id for c in cfg.classes}
    captures = []
    for path in sorted(Path(iq_dir).glob("*.iqf32")):
        buf, meta = read_iqf32(path)
        if meta["class"] not in name_to_id:
            raise ValueError(f"{path}: unknown class {meta['class']!r}")
        captures.append((buf, name_to_id[meta["class"]]))
    if not captures:
        raise FileNotFoundError(f"no .iqf32 captures in {iq_dir}")
    return bank_from_captures(cfg, captures)


def synth_bank(cfg: RunConfig) -> SignalBank:
    """Bank straight from synthesis, no files in between."""
    syn = cfg.raw["synth"]
    captures = []
    for cls in cfg.classes:
        for k in range(syn["captures_per_class"]):
            buf = synthesize(
                SynthParams(
                    cls=cls,
                    duration_samples=syn["duration_samples"],
                    sample_rate_hz=syn["sample_rate_hz"],
                    snr_db=syn["snr_db"],
                    seed=capture_seed(cfg.seed, cls.id, k),
                )
            )
            captures.append((buf, cls.id))
    return bank_from_captures(cfg, captures)


def generate_train_test(cfg: RunConfig, bank, workers=1, train_path=None, test_path=None):
    g = cfg.raw["generator"]
    ds_train = generate_samples(cfg.generator_config(), bank, g["train_count"], workers)
    test_cfg = cfg.generator_config(master_seed=mix64(cfg.seed, _TAG_TEST))
    ds_test = generate_samples(test_cfg, bank, g["test_count"], workers)
    if train_path:
        save_dataset(ds_train, train_path)
    if test_path:
        save_dataset(ds_test, test_path)
    return ds_train, ds_test


def train_model(cfg: RunConfig, ds_train, seed=None, use_nonlocal=None):
    net_cfg = cfg.segnet_config()
    if use_nonlocal is not None:
        from dataclasses import replace

        net_cfg = replace(net_cfg, use_nonlocal=use_nonlocal)
    train_seed = cfg.seed if seed is None else seed
    net = SegNet(net_cfg, seed=train_seed)
    result = train(net, ds_train.inputs, ds_train.labels, cfg.train_config(train_seed))
    ref = estimate_noise_reference(ds_train.inputs)
    return net, result, ref


def save_training_artifacts(out_dir, net, result, ref):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / "model.sgnt"
    checkpoint_save(net, ckpt)
    with open(out_dir / "loss_trace.csv", "w") as fh:
        fh.write("batch,loss\n")
        for i, v in enumerate(result.loss_trace):
            fh.write(f"{i},{v:.8f}\n")
    with open(out_dir / "noise_ref.json", "w") as fh:
        json.dump({"ref_floor": ref.ref_floor}, fh)
        fh.write("\n")
    log.info("saved %s (%d params), final loss %.5f", ckpt, net.param_count(),
             result.final_loss)
    return ckpt
