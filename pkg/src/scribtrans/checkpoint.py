"""Checkpoints: named parameter tensors plus plain-text metadata.

The on-disk container is a zip archive holding one ``.npy`` entry per tensor
and a ``meta.json``. Entries are stored uncompressed with a fixed timestamp
and sorted names, so saving the same checkpoint twice produces byte-identical
files and tensors round-trip bit-exactly.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .errors import ContractError, TransferError
from .models import SETTINGS, ModelConfig, build_model

FORMAT_VERSION = 1
_EPOCH_TIME = (1980, 1, 1, 0, 0, 0)

BACKBONE_PREFIX = "backbone."
HEAD_PREFIX = "head."


@dataclass
class CheckpointMeta:
    setting: str
    iteration: int
    master_seed: int
    config_hash: str
    preset: str
    num_classes: int
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.setting not in SETTINGS:
            raise ContractError(f"setting must be one of {SETTINGS}, got {self.setting!r}")


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    meta: CheckpointMeta

    def backbone_params(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.params.items() if k.startswith(BACKBONE_PREFIX)}

    def head_params(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.params.items() if k.startswith(HEAD_PREFIX)}


def checkpoint_from_model(model: nn.Module, meta: CheckpointMeta) -> Checkpoint:
    meta.validate()
    params = {k: v.detach().cpu().numpy().copy() for k, v in model.state_dict().items()}
    for name in params:
        if not (name.startswith(BACKBONE_PREFIX) or name.startswith(HEAD_PREFIX)):
            raise ContractError(f"parameter {name!r} is outside the backbone/head namespaces")
    return Checkpoint(params=params, meta=meta)


def load_checkpoint_into_model(model: nn.Module, ckpt: Checkpoint) -> nn.Module:
    state = {k: torch.from_numpy(np.copy(v)) for k, v in ckpt.params.items()}
    model.load_state_dict(state, strict=True)
    return model


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> Path:
    ckpt.meta.validate()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta_dict = {"format_version": FORMAT_VERSION, **asdict(ckpt.meta)}
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo("meta.json", date_time=_EPOCH_TIME)
        zf.writestr(info, json.dumps(meta_dict, sort_keys=True, indent=1))
        for name in sorted(ckpt.params):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(ckpt.params[name]))
            info = zipfile.ZipInfo(f"params/{name}.npy", date_time=_EPOCH_TIME)
            zf.writestr(info, buf.getvalue())
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    with zipfile.ZipFile(path) as zf:
        meta_dict = json.loads(zf.read("meta.json"))
        version = meta_dict.pop("format_version", None)
        if version != FORMAT_VERSION:
            raise ContractError(f"{path}: unsupported checkpoint format version {version}")
        params = {}
        for entry in zf.namelist():
            if entry.startswith("params/") and entry.endswith(".npy"):
                name = entry[len("params/") : -len(".npy")]
                params[name] = np.lib.format.read_array(io.BytesIO(zf.read(entry)))
    return Checkpoint(params=params, meta=CheckpointMeta(**meta_dict))


def transfer_backbone_weights(
    source: Checkpoint | None, target_config: ModelConfig, seed: int
) -> nn.Module:
    """Build a model for target_config, then overwrite its backbone tensors
    with the source checkpoint's. The head keeps its fresh seeded init. With
    source=None this is the random-initialization baseline."""
    model = build_model(target_config, seed)
    if source is None:
        return model
    if source.meta.preset != target_config.backbone_preset:
        raise TransferError(
            f"preset mismatch: source {source.meta.preset!r} vs target {target_config.backbone_preset!r}"
        )

    target_state = model.state_dict()
    target_bb = {k: tuple(v.shape) for k, v in target_state.items() if k.startswith(BACKBONE_PREFIX)}
    source_bb = {k: tuple(v.shape) for k, v in source.backbone_params().items()}
    missing = sorted(set(target_bb) - set(source_bb))
    unexpected = sorted(set(source_bb) - set(target_bb))
    mismatched = sorted(k for k in set(target_bb) & set(source_bb) if target_bb[k] != source_bb[k])
    if missing or unexpected or mismatched:
        raise TransferError(
            "backbone transfer failed: "
            f"missing={missing} unexpected={unexpected} shape_mismatch={mismatched}"
        )

    for k in target_bb:
        target_state[k] = torch.from_numpy(np.copy(source.params[k]))
    model.load_state_dict(target_state, strict=True)
    return model
