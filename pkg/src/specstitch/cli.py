"""Command-line front end: synth -> bank -> generate -> train -> infer ->
eval -> bench. STITCH_LOG controls log verbosity."""

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .bank import bank_load, bank_save
from .config import load_config
from .dsp import IqBuffer, fft_forward, read_iqf32
from .errors import ConfigError, StitchError
from .evalbench import evaluate_model, latency_bench
from .generator import load_dataset
from .model import checkpoint_load
from .pipeline import (
    bank_from_iq_dir,
    generate_train_test,
    save_training_artifacts,
    synth_captures,
    train_model,
)
from .wideband import (
    NoiseReference,
    infer_wideband,
    occupancy_to_csv,
    plan_tiling,
    render_spectrum_map,
)

log = logging.getLogger("specstitch")


def _setup_logging():
    level = os.environ.get("STITCH_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser():
    p = argparse.ArgumentParser(prog="specstitch", description=__doc__)
    p.add_argument("--config", type=Path, default=None, help="JSON run configuration")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="parallel workers for generation/inference")
    p.add_argument("--out", type=Path, default=Path("runs"), help="artifact directory")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", help="write per-class IQF32 captures")
    sub.add_parser("bank", help="build the signal bank from captures")
    sub.add_parser("generate", help="stitch train/test datasets")
    sub.add_parser("train", help="train the segmentation network")
    infer = sub.add_parser("infer", help="classify a wide IQF32 capture")
    infer.add_argument("--input", type=Path, required=True, help="IQF32 capture path")
    sub.add_parser("eval", help="IoU report on the held-out dataset")
    sub.add_parser("bench", help="inference latency scaling")
    return p


def cmd_synth(args, cfg):
    paths = synth_captures(cfg, args.out / "iq")
    log.info("wrote %d captures under %s", len(paths), args.out / "iq")
    return 0


def cmd_bank(args, cfg):
    bank = bank_from_iq_dir(cfg, args.out / "iq")
    args.out.mkdir(parents=True, exist_ok=True)
    bank_save(bank, args.out / "bank.sbnk")
    log.info("bank: %d entries across %d classes -> %s", bank.entry_count(),
             bank.class_count, args.out / "bank.sbnk")
    return 0


def cmd_generate(args, cfg):
    bank_path = args.out / "bank.sbnk"
    if not bank_path.exists():
        raise FileNotFoundError(f"bank not found: {bank_path} (run 'specstitch bank')")
    bank = bank_load(bank_path)
    ds_train, ds_test = generate_train_test(
        cfg, bank, workers=args.workers,
        train_path=args.out / "train.stch", test_path=args.out / "test.stch",
    )
    log.info("generated %d train / %d test samples", len(ds_train), len(ds_test))
    return 0


def cmd_train(args, cfg):
    ds_path = args.out / "train.stch"
    if not ds_path.exists():
        raise FileNotFoundError(f"dataset not found: {ds_path} (run 'specstitch generate')")
    ds_train = load_dataset(ds_path)
    net, result, ref = train_model(cfg, ds_train)
    save_training_artifacts(args.out, net, result, ref)
    return 0


def _load_model_and_ref(args):
    ckpt = args.out / "model.sgnt"
    if not ckpt.exists():
        raise FileNotFoundError(f"checkpoint not found: {ckpt} (run 'specstitch train')")
    net = checkpoint_load(ckpt)
    ref_path = args.out / "noise_ref.json"
    if not ref_path.exists():
        raise FileNotFoundError(f"noise reference not found: {ref_path}")
    with open(ref_path) as fh:
        ref = NoiseReference(json.load(fh)["ref_floor"])
    return net, ref


def cmd_infer(args, cfg):
    net, ref = _load_model_and_ref(args)
    if not args.input.exists():
        raise FileNotFoundError(f"capture not found: {args.input}")
    capture, meta = read_iqf32(args.input)
    plan = plan_tiling(meta["sample_rate_hz"], cfg.b_hz, net.cfg.n_iq,
                       cfg.raw["tiling"]["overlap_fraction"])
    n_tilde = plan.n_iq_tilde
    if n_tilde & (n_tilde - 1):
        raise StitchError(
            f"capture rate implies {n_tilde} bins per frame, which is not a power "
            "of two; choose a rate that is a power-of-two multiple of B"
        )
    n_frames = len(capture) // n_tilde
    if n_frames == 0:
        raise StitchError(f"capture shorter than one frame ({n_tilde} samples)")
    names = [c.name for c in cfg.classes]
    threshold = cfg.raw["tiling"]["threshold"]
    frames = []
    args.out.mkdir(parents=True, exist_ok=True)
    for t in range(n_frames):
        spec = fft_forward(
            IqBuffer(capture.samples[t * n_tilde : (t + 1) * n_tilde], meta["sample_rate_hz"])
        )
        wide = np.stack([spec.bins.real, spec.bins.imag]).astype(np.float32)
        occ = infer_wideband(net, wide, plan, ref, threshold, workers=args.workers)
        occupancy_to_csv(occ, args.out / f"occupancy_f{t:03d}.csv", names)
        frames.append(occ.binary)
    render_spectrum_map(np.stack(frames), args.out / "spectrum_map.png", names)
    log.info("classified %d frames of %d bins -> %s", n_frames, n_tilde,
             args.out / "spectrum_map.png")
    return 0


def cmd_eval(args, cfg):
    net, _ = _load_model_and_ref(args)
    ds_path = args.out / "test.stch"
    if not ds_path.exists():
        raise FileNotFoundError(f"dataset not found: {ds_path} (run 'specstitch generate')")
    ds = load_dataset(ds_path)
    report = evaluate_model(net, ds.inputs, ds.labels, cfg.raw["tiling"]["threshold"])
    names = {c.id: c.name for c in cfg.classes}
    out = args.out / "iou_report.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class_id", "name", "iou"])
        for cid, value in sorted(report.per_class.items()):
            writer.writerow([cid, names.get(cid, "?"), f"{value:.6f}"])
            print(f"  {names.get(cid, '?'):>8s}: IoU {value:.4f}")
        writer.writerow(["", "mean", f"{report.mean_iou:.6f}"])
    print(f"  mean IoU {report.mean_iou:.4f} over {report.sample_count} samples -> {out}")
    return 0


def cmd_bench(args, cfg):
    net, _ = _load_model_and_ref(args)
    bench = cfg.raw["bench"]
    report = latency_bench(net, bench["bandwidth_multiples"], bench["runs"],
                           b_hz=cfg.b_hz, overlap=cfg.raw["tiling"]["overlap_fraction"],
                           workers=args.workers if args.workers > 1 else 1)
    out = args.out / "latency.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bandwidth_multiple", "windows", "mean_s", "std_s"])
        for row in report.rows:
            writer.writerow([row.bandwidth_multiple, row.n_windows,
                             f"{row.mean_s:.6f}", f"{row.std_s:.6f}"])
            print(f"  B~ = {row.bandwidth_multiple}B: {row.n_windows} windows, "
                  f"{1e3 * row.mean_s:.2f} +- {1e3 * row.std_s:.2f} ms")
    print(f"  -> {out}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "bank": cmd_bank,
    "generate": cmd_generate,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
        log.info("resolved config:\n%s", cfg.to_json())
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error [not found]: {exc}", file=sys.stderr)
        return 3
    except StitchError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
