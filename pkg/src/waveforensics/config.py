"""Run configuration: one JSON file drives a whole train/eval/compare run.

The file mirrors the per-module config dataclasses.  A single master ``seed``
fans out to the stochastic stages so that one integer pins the entire run:
synthesis uses ``seed``, splitting ``seed + 1``, weight init ``seed + 2``,
and training (shuffling/augmentation) ``seed + 3``.
"""

import copy
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .classifier import ModelConfig, TrainConfig
from .datasets import AugmentConfig, SplitSpec, SynthConfig
from .errors import ConfigError

SEED_OFFSET_SYNTH = 0
SEED_OFFSET_SPLIT = 1
SEED_OFFSET_MODEL = 2
SEED_OFFSET_TRAIN = 3

_DEFAULTS = {
    "seed": 0,
    "side": 64,
    "domain": "haar",
    "out_dir": "run_out",
    "data_dir": None,
    "n_per_class": 500,
    "augment": True,
    "synth": {
        "blur_sigma": 6.0,
        "noise_sigma": 0.04,
        "artifact_gain": 0.04,
    },
    "split": {
        "train_frac": 0.6,
        "val_frac": 0.2,
        "test_frac": 0.2,
    },
    "model": {
        "channels_per_block": [8, 16, 32],
        "kernel_size": 3,
        "dense_hidden": 0,
    },
    "train": {
        "learning_rate": 1e-4,
        "batch_size": 32,
        "max_epochs": 30,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "early_stop_patience": 10,
        "plateau_patience": 5,
        "plateau_factor": 0.5,
        "min_lr": 1e-6,
        "min_improvement": 1e-4,
    },
    "augment_params": {
        "rotation_deg": 15.0,
        "shift_frac": 0.1,
        "zoom_frac": 0.1,
        "hflip_prob": 0.5,
    },
}


@dataclass(frozen=True)
class RunConfig:
    seed: int
    side: int
    domain: str
    out_dir: str
    data_dir: Optional[str]
    n_per_class: int
    augment: bool
    synth: SynthConfig
    split: SplitSpec
    model: ModelConfig
    train: TrainConfig
    augment_params: AugmentConfig = field(default_factory=AugmentConfig)

    def validate(self) -> "RunConfig":
        if self.side < 2 or self.side % 2 != 0:
            raise ConfigError(f"side must be an even integer >= 2, got {self.side}")
        if self.domain not in ("spatial", "haar", "db2"):
            raise ConfigError(
                f"domain must be one of spatial, haar, db2; got {self.domain!r}"
            )
        if self.n_per_class < 1:
            raise ConfigError("n_per_class must be positive")
        if self.data_dir is not None and not os.path.isdir(self.data_dir):
            raise ConfigError(f"data_dir does not exist: {self.data_dir}")
        self.synth.validate()
        self.split.validate()
        self.model.validate()
        self.augment_params.validate()
        return self


def default_config_dict() -> dict:
    return copy.deepcopy(_DEFAULTS)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def build_run_config(raw: Optional[dict] = None, *, seed: Optional[int] = None,
                     out_dir: Optional[str] = None,
                     domain: Optional[str] = None) -> RunConfig:
    """Assemble a RunConfig from a (partial) dict plus flag overrides."""
    merged = _merge(_DEFAULTS, raw or {})
    if seed is not None:
        merged["seed"] = seed
    if out_dir is not None:
        merged["out_dir"] = out_dir
    if domain is not None:
        merged["domain"] = domain

    master = int(merged["seed"])
    side = int(merged["side"])
    cfg = RunConfig(
        seed=master,
        side=side,
        domain=str(merged["domain"]),
        out_dir=str(merged["out_dir"]),
        data_dir=merged["data_dir"],
        n_per_class=int(merged["n_per_class"]),
        augment=bool(merged["augment"]),
        synth=SynthConfig(
            side=side,
            blur_sigma=float(merged["synth"]["blur_sigma"]),
            noise_sigma=float(merged["synth"]["noise_sigma"]),
            artifact_gain=float(merged["synth"]["artifact_gain"]),
        ),
        split=SplitSpec(
            train_frac=float(merged["split"]["train_frac"]),
            val_frac=float(merged["split"]["val_frac"]),
            test_frac=float(merged["split"]["test_frac"]),
            seed=master + SEED_OFFSET_SPLIT,
        ),
        model=ModelConfig(
            input_side=side,
            channels_per_block=tuple(int(c) for c in merged["model"]["channels_per_block"]),
            kernel_size=int(merged["model"]["kernel_size"]),
            dense_hidden=int(merged["model"]["dense_hidden"]),
            seed=master + SEED_OFFSET_MODEL,
        ),
        train=TrainConfig(
            learning_rate=float(merged["train"]["learning_rate"]),
            batch_size=int(merged["train"]["batch_size"]),
            max_epochs=int(merged["train"]["max_epochs"]),
            beta1=float(merged["train"]["beta1"]),
            beta2=float(merged["train"]["beta2"]),
            eps=float(merged["train"]["eps"]),
            early_stop_patience=int(merged["train"]["early_stop_patience"]),
            plateau_patience=int(merged["train"]["plateau_patience"]),
            plateau_factor=float(merged["train"]["plateau_factor"]),
            min_lr=float(merged["train"]["min_lr"]),
            min_improvement=float(merged["train"]["min_improvement"]),
            seed=master + SEED_OFFSET_TRAIN,
        ),
        augment_params=AugmentConfig(
            rotation_deg=float(merged["augment_params"]["rotation_deg"]),
            shift_frac=float(merged["augment_params"]["shift_frac"]),
            zoom_frac=float(merged["augment_params"]["zoom_frac"]),
            hflip_prob=float(merged["augment_params"]["hflip_prob"]),
        ),
    )
    return cfg.validate()


def load_config(path: Optional[str], *, seed: Optional[int] = None,
                out_dir: Optional[str] = None,
                domain: Optional[str] = None) -> RunConfig:
    raw = None
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must contain a JSON object")
    return build_run_config(raw, seed=seed, out_dir=out_dir, domain=domain)


def print_config_text() -> str:
    """The full default config as pretty JSON, ready to save and edit."""
    return json.dumps(_DEFAULTS, indent=2) + "\n"
