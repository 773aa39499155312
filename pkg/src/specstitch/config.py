"""Run configuration: JSON sections merged over desk-scale defaults.

Validation is all-at-once: every violated constraint is listed in the
ConfigError message.
"""

import copy
import json
from dataclasses import dataclass

from .errors import ConfigError
from .generator import GeneratorConfig
from .model import SegNetConfig, TrainConfig
from .waveforms import DEFAULT_CLASSES, ProtocolClass

DEFAULT_CONFIG = {
    "seed": 20240801,
    "classes": [
        {"id": c.id, "name": c.name, "bandwidth_hz": c.nominal_bandwidth_hz}
        for c in DEFAULT_CLASSES
    ],
    "synth": {
        "sample_rate_hz": 25e6,
        "duration_samples": 8192,
        "captures_per_class": 6,
        "snr_db": 30.0,
    },
    "bank": {"fft_len": 256, "silence_threshold": 0.02},
    "generator": {
        "n_s": 2,
        "p_e": 0.05,
        "p_c": 0.5,
        "n_iq": 256,
        "noise_power": 1.0,
        "train_count": 2000,
        "test_count": 500,
        "snr_range_db": [5.0, 25.0],
    },
    "model": {
        "widths": [8, 16, 32, 64, 128],
        "nonlocal_dim": 0,
        "use_nonlocal": True,
        "nonlocal_residual": True,
    },
    "train": {"lr": 0.12, "batch_size": 16, "epochs": 6},
    "tiling": {"overlap_fraction": 0.5, "threshold": 0.5},
    "bench": {"bandwidth_multiples": [1, 2, 4], "runs": 100},
}


@dataclass
class RunConfig:
    raw: dict

    @property
    def seed(self):
        return self.raw["seed"]

    @property
    def classes(self):
        return tuple(
            ProtocolClass(c["id"], c["name"], c["bandwidth_hz"]) for c in self.raw["classes"]
        )

    @property
    def b_hz(self):
        return self.raw["synth"]["sample_rate_hz"]

    def generator_config(self, master_seed=None):
        g = self.raw["generator"]
        return GeneratorConfig(
            C=len(self.raw["classes"]),
            B_hz=self.b_hz,
            n_s=g["n_s"],
            p_e=g["p_e"],
            p_c=g["p_c"],
            n_iq=g["n_iq"],
            noise_power=g["noise_power"],
            master_seed=self.seed if master_seed is None else master_seed,
            snr_range_db=tuple(g["snr_range_db"]),
        )

    def segnet_config(self):
        m = self.raw["model"]
        return SegNetConfig(
            n_iq=self.raw["generator"]["n_iq"],
            C=len(self.raw["classes"]),
            widths=tuple(m["widths"]),
            nonlocal_dim=m["nonlocal_dim"],
            use_nonlocal=m["use_nonlocal"],
            nonlocal_residual=m["nonlocal_residual"],
        )

    def train_config(self, seed=None):
        t = self.raw["train"]
        return TrainConfig(
            lr=t["lr"],
            batch_size=t["batch_size"],
            epochs=t["epochs"],
            seed=self.seed if seed is None else seed,
        )

    def to_json(self):
        return json.dumps(self.raw, indent=2, sort_keys=True)


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path}{key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, f"{path}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _validate(cfg):
    problems = []

    def check(ok, msg):
        if not ok:
            problems.append(msg)

    check(isinstance(cfg["seed"], int) and 0 <= cfg["seed"] < 2**64,
          "seed must be an integer in [0, 2^64)")

    classes = cfg["classes"]
    check(len(classes) >= 1, "at least one protocol class is required")
    ids = [c.get("id") for c in classes]
    check(ids == list(range(1, len(classes) + 1)),
          "class ids must be contiguous starting at 1 (0 is the empty class)")
    names = [c.get("name") for c in classes]
    check(len(set(names)) == len(names), "class names must be unique")
    b = cfg["synth"]["sample_rate_hz"]
    check(b > 0, "synth.sample_rate_hz must be positive")
    for c in classes:
        check(0 < c.get("bandwidth_hz", 0) <= b,
              f"class {c.get('name')}: bandwidth_hz must lie in (0, B]")

    syn = cfg["synth"]
    check(syn["duration_samples"] >= 2 * cfg["bank"]["fft_len"],
          "synth.duration_samples must be >= 2 * bank.fft_len to cut fragments")
    check(syn["captures_per_class"] >= 1, "synth.captures_per_class must be >= 1")

    check(0 < cfg["bank"]["silence_threshold"] < 1,
          "bank.silence_threshold must lie in (0, 1)")

    g = cfg["generator"]
    n_iq = g["n_iq"]
    check(n_iq >= 32 and n_iq % 32 == 0 and (n_iq & (n_iq - 1)) == 0,
          "generator.n_iq must be a power of two divisible by 32")
    check(cfg["bank"]["fft_len"] == n_iq,
          "bank.fft_len must equal generator.n_iq so bin widths match")
    check(g["n_s"] >= 1, "generator.n_s must be >= 1")
    check(0 <= g["p_e"] <= 1, "generator.p_e must lie in [0, 1]")
    check(0 <= g["p_c"] <= 1, "generator.p_c must lie in [0, 1]")
    check(g["noise_power"] > 0, "generator.noise_power must be positive")
    check(g["train_count"] >= 1, "generator.train_count must be >= 1")
    check(g["test_count"] >= 1, "generator.test_count must be >= 1")
    snr = g["snr_range_db"]
    check(len(snr) == 2 and snr[0] <= snr[1], "generator.snr_range_db must be [lo, hi]")

    m = cfg["model"]
    widths = m["widths"]
    check(len(widths) == 5 and all(b > a for a, b in zip(widths, widths[1:])),
          "model.widths must be 5 strictly increasing channel counts")
    check(m["nonlocal_dim"] >= 0, "model.nonlocal_dim must be >= 0 (0 = widths[0]/2)")

    t = cfg["train"]
    check(t["lr"] >= 0, "train.lr must be >= 0")
    check(t["batch_size"] >= 1, "train.batch_size must be >= 1")
    check(t["epochs"] >= 1, "train.epochs must be >= 1")

    til = cfg["tiling"]
    check(0 <= til["overlap_fraction"] < 1, "tiling.overlap_fraction must lie in [0, 1)")
    check(0 < til["threshold"] < 1, "tiling.threshold must lie in (0, 1)")

    bench = cfg["bench"]
    check(bench["runs"] >= 100, "bench.runs must be >= 100")
    check(all(x >= 1 for x in bench["bandwidth_multiples"]),
          "bench.bandwidth_multiples must be >= 1")

    if problems:
        raise ConfigError("invalid configuration:\n  - " + "\n  - ".join(problems))


def load_config(path=None, seed_override=None) -> RunConfig:
    """Merge the JSON file (if any) over the defaults and validate."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        cfg = _merge(cfg, user)
    if seed_override is not None:
        cfg["seed"] = seed_override
    _validate(cfg)
    return RunConfig(cfg)
