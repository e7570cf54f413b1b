"""Experiment configuration: YAML parsing, strict validation, defaults and
content hashing.

Configs are nested key-value trees with one required ``stage`` discriminator
(pretrain | finetune). Unknown keys are rejected with their dotted path so a
finetune field in a pretrain config fails loudly. Relative dataset paths are
resolved against the config file's directory. The config hash is computed
over the canonicalized raw tree (after any CLI seed override) and is embedded
in every artifact a run produces.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

PRETRAIN_SETTINGS = ("classification", "full_seg", "scribble_seg")


def config_hash(tree: dict) -> str:
    canonical = json.dumps(tree, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


class _Block:
    """Helper that pops typed values out of a dict and rejects leftovers."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
        self.data = dict(data)
        self.path = path

    def _fullpath(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def get(self, key: str, types, default=..., choices=None):
        if key in self.data:
            value = self.data.pop(key)
        elif default is ...:
            raise ConfigError(f"missing required key {self._fullpath(key)!r}")
        else:
            value = default
        if value is None and default is None:
            return None
        if types is float and isinstance(value, int):
            value = float(value)
        if not isinstance(value, types) or isinstance(value, bool) and types is int:
            raise ConfigError(
                f"{self._fullpath(key)!r}: expected {getattr(types, '__name__', types)}, "
                f"got {type(value).__name__} ({value!r})"
            )
        if choices is not None and value not in choices:
            raise ConfigError(f"{self._fullpath(key)!r}: must be one of {choices}, got {value!r}")
        return value

    def sub(self, key: str, default=...) -> "_Block":
        value = self.get(key, dict, default=default)
        return _Block(value or {}, self._fullpath(key))

    def finish(self, stage: str) -> None:
        if self.data:
            key = sorted(self.data)[0]
            raise ConfigError(
                f"unknown key {self._fullpath(key)!r} for stage {stage!r}"
            )


@dataclass
class ModelBlock:
    preset: str = "tiny"
    seg_output_stride: int | None = None
    head_dilations: tuple[int, ...] = (2,)


@dataclass
class SGDBlock:
    lr: float = 2.5e-4
    momentum: float = 0.9
    weight_decay: float = 5e-4
    poly_power: float = 0.9


@dataclass
class AdamBlock:
    lr: float = 1e-4
    decay_factor: float = 0.94
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class PretrainConfig:
    setting: str
    manifest: Path
    model: ModelBlock
    optimizer: SGDBlock
    max_iter: int = 40000
    batch_size: int = 8
    crop_size: int = 321
    scale_range: tuple[float, float] = (0.5, 1.5)
    hflip_prob: float = 0.5
    loss_mode: str = "labeled"
    master_seed: int = 0
    log_every: int = 50
    hash: str = ""

    stage = "pretrain"


@dataclass
class FinetuneConfig:
    dataset: str
    train_manifest: Path
    model: ModelBlock
    optimizer: AdamBlock
    test_manifest: Path | None = None
    cv_folds: int | None = None
    n_c: int | None = None
    r_percent: float | None = None
    epochs: int = 100
    batch_size: int = 32
    n_seeds: int = 10
    freeze_backbone: bool = False
    master_seed: int = 0
    hash: str = ""

    stage = "finetune"


def _model_block(b: _Block, stage: str) -> ModelBlock:
    m = ModelBlock(
        preset=b.get("preset", str, default="tiny"),
        seg_output_stride=b.get("seg_output_stride", int, default=None),
        head_dilations=tuple(b.get("head_dilations", list, default=[2])),
    )
    b.finish(stage)
    return m


def _resolve(path_str: str, base: Path) -> Path:
    p = Path(path_str)
    return p if p.is_absolute() else (base / p)


def _build_pretrain(tree: dict, base: Path) -> PretrainConfig:
    b = _Block(tree, "")
    b.get("stage", str)
    data = b.sub("data")
    cfg = PretrainConfig(
        setting=b.get("setting", str, choices=PRETRAIN_SETTINGS),
        manifest=_resolve(data.get("manifest", str), base),
        crop_size=data.get("crop_size", int, default=321),
        scale_range=tuple(data.get("scale_range", list, default=[0.5, 1.5])),
        hflip_prob=data.get("hflip_prob", float, default=0.5),
        model=_model_block(b.sub("model", default=None), "pretrain"),
        optimizer=SGDBlock(),
        max_iter=b.get("max_iter", int, default=40000),
        batch_size=b.get("batch_size", int, default=8),
        loss_mode=b.get("loss_mode", str, default="labeled", choices=("labeled", "paper")),
        master_seed=b.get("master_seed", int, default=0),
        log_every=b.get("log_every", int, default=50),
    )
    data.finish("pretrain")
    opt = b.sub("optimizer", default=None)
    cfg.optimizer = SGDBlock(
        lr=opt.get("lr", float, default=2.5e-4),
        momentum=opt.get("momentum", float, default=0.9),
        weight_decay=opt.get("weight_decay", float, default=5e-4),
        poly_power=opt.get("poly_power", float, default=0.9),
    )
    opt.finish("pretrain")
    b.finish("pretrain")
    if len(cfg.scale_range) != 2 or not (0 < cfg.scale_range[0] <= cfg.scale_range[1]):
        raise ConfigError(f"'data.scale_range': invalid range {cfg.scale_range}")
    return cfg


def _build_finetune(tree: dict, base: Path) -> FinetuneConfig:
    b = _Block(tree, "")
    b.get("stage", str)
    data = b.sub("data")
    test_manifest = data.get("test_manifest", str, default=None)
    cfg = FinetuneConfig(
        dataset=b.get("dataset", str),
        train_manifest=_resolve(data.get("train_manifest", str), base),
        test_manifest=_resolve(test_manifest, base) if test_manifest else None,
        cv_folds=data.get("cv_folds", int, default=None),
        model=_model_block(b.sub("model", default=None), "finetune"),
        optimizer=AdamBlock(),
        n_c=b.get("n_c", int, default=None),
        r_percent=b.get("r_percent", float, default=None),
        epochs=b.get("epochs", int, default=100),
        batch_size=b.get("batch_size", int, default=32),
        n_seeds=b.get("n_seeds", int, default=10),
        freeze_backbone=b.get("freeze_backbone", bool, default=False),
        master_seed=b.get("master_seed", int, default=0),
    )
    data.finish("finetune")
    opt = b.sub("optimizer", default=None)
    cfg.optimizer = AdamBlock(
        lr=opt.get("lr", float, default=1e-4),
        decay_factor=opt.get("decay_factor", float, default=0.94),
        beta1=opt.get("beta1", float, default=0.9),
        beta2=opt.get("beta2", float, default=0.999),
        eps=opt.get("eps", float, default=1e-8),
    )
    opt.finish("finetune")
    b.finish("finetune")
    if cfg.test_manifest is None and cfg.cv_folds is None:
        raise ConfigError("finetune config needs 'data.test_manifest' or 'data.cv_folds'")
    if cfg.test_manifest is not None and cfg.cv_folds is not None:
        raise ConfigError("'data.test_manifest' and 'data.cv_folds' are mutually exclusive")
    return cfg


def build_config(tree: dict, base: Path = Path(), seed_override: int | None = None):
    if not isinstance(tree, dict):
        raise ConfigError("config root must be a mapping")
    tree = dict(tree)
    if seed_override is not None:
        tree["master_seed"] = int(seed_override)
    stage = tree.get("stage")
    if stage == "pretrain":
        cfg = _build_pretrain(tree, base)
    elif stage == "finetune":
        cfg = _build_finetune(tree, base)
    else:
        raise ConfigError(f"'stage': must be 'pretrain' or 'finetune', got {stage!r}")
    cfg.hash = config_hash(tree)
    return cfg


def parse_config(path: str | Path, seed_override: int | None = None):
    """Load, validate and default-fill a config file."""
    path = Path(path)
    try:
        tree = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: not a well-formed config file: {e}") from e
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: config root must be a mapping")
    return build_config(tree, base=path.parent, seed_override=seed_override)
