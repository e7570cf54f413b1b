"""Training loops: source-domain pre-training, target-domain fine-tuning and
the multi-seed battery.

All randomness (batch composition, augmentation, subsampling, shuffling,
initialization) derives from the config's master seed through named
sub-streams, so reruns in deterministic mode are bit-identical and battery
members are independent of execution order.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .augment import augment_pair
from .checkpoint import (
    Checkpoint,
    CheckpointMeta,
    checkpoint_from_model,
    save_checkpoint,
    transfer_backbone_weights,
)
from .config import FinetuneConfig, PretrainConfig
from .errors import ConfigError, ContractError
from .losses import bce_multilabel, masked_seg_loss_batch, softmax_ce_pixel
from .manifest import DatasetManifest, load_manifest
from .masks import IGNORE, LabelMask, derive_multilabel_target, load_indexed_mask
from .metrics import accuracy
from .models import ModelConfig, build_model
from .optim import AdamState, SGDMomentumState, adam_update, gradients_of, sgd_update
from .results import RunResult, save_run_result
from .sampling import kfold_splits, subsample_per_class
from .schedules import exp_lr, poly_lr
from .seeds import derive_seed, derived_rng

log = logging.getLogger(__name__)


def enable_determinism() -> None:
    """Single-threaded deterministic execution."""
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True)


@dataclass
class Sample:
    id: str
    image: np.ndarray  # (H, W, 3) float32 in [0, 1]
    mask: LabelMask | None = None
    label: int | None = None


def load_samples(manifest: DatasetManifest) -> list[Sample]:
    from PIL import Image

    samples = []
    for record in manifest.records:
        img = Image.open(manifest.image_path(record)).convert("RGB")
        image = np.asarray(img, dtype=np.float32) / 255.0
        mask = load_indexed_mask(manifest.mask_path(record), manifest) if record.mask else None
        samples.append(Sample(id=record.id, image=image, mask=mask, label=record.label))
    return samples


class MetricsLog:
    """Line-delimited metrics: {"step", "split", "metric", "value"}."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.rows: list[dict] = []
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def log(self, step: int, split: str, metric: str, value: float) -> None:
        row = {"step": int(step), "split": split, "metric": metric, "value": float(value)}
        self.rows.append(row)
        if self.path:
            with open(self.path, "a") as f:
                f.write(json.dumps(row, sort_keys=True) + "\n")


def _to_batch(images: list[np.ndarray]) -> torch.Tensor:
    x = torch.from_numpy(np.stack(images))  # (B, H, W, 3)
    return x.permute(0, 3, 1, 2).contiguous()


def _batch_pixel_accuracy(logits_bkhw: torch.Tensor, masks: torch.Tensor) -> float:
    preds = logits_bkhw.argmax(dim=1)
    valid = masks != IGNORE
    n = int(valid.sum())
    if n == 0:
        return 0.0
    return float((preds[valid] == masks[valid]).sum()) / n


def run_pretraining(config: PretrainConfig, out_dir: str | Path | None = None,
                    deterministic: bool = True) -> Checkpoint:
    """Pre-train on the source domain per the configured setting and return
    (and optionally save) the resulting checkpoint."""
    if deterministic:
        enable_determinism()
    manifest = load_manifest(config.manifest)
    samples = load_samples(manifest)
    if not samples:
        raise ContractError("pre-training manifest has no records")
    for s in samples:
        if s.mask is None:
            raise ConfigError(f"pre-training sample {s.id!r} has no mask")

    k = manifest.num_classes
    is_seg = config.setting in ("full_seg", "scribble_seg")
    model_config = ModelConfig(
        backbone_preset=config.model.preset,
        num_classes=k,
        head="segmentation" if is_seg else "classification",
        seg_output_stride=config.model.seg_output_stride,
        head_dilations=tuple(config.model.head_dilations),
    )
    model = build_model(model_config, derive_seed(config.master_seed, "init"))
    model.train()

    params = dict(model.named_parameters())
    opt_state = SGDMomentumState(
        momentum=config.optimizer.momentum, weight_decay=config.optimizer.weight_decay
    )

    out_dir = Path(out_dir) if out_dir else None
    metrics = MetricsLog(out_dir / "logs" / "pretrain_metrics.jsonl" if out_dir else None)

    n = len(samples)
    for it in range(config.max_iter):
        batch_rng = derived_rng(config.master_seed, "batch", it)
        idx = batch_rng.choice(n, size=min(config.batch_size, n), replace=n < config.batch_size)
        images, masks, targets = [], [], []
        for i in idx:
            s = samples[int(i)]
            aug_rng = derived_rng(config.master_seed, "aug", it, s.id)
            img, msk = augment_pair(
                s.image, s.mask, aug_rng,
                crop_size=config.crop_size,
                scale_range=config.scale_range,
                hflip_prob=config.hflip_prob,
            )
            images.append(img)
            masks.append(msk.data)
            if not is_seg:
                lab = msk.data[msk.data != IGNORE]
                t = np.zeros(k, dtype=np.float32)
                if lab.size:
                    t[np.unique(lab)] = 1.0
                t[0] = 0.0  # background carries no presence signal
                targets.append(t)

        x = _to_batch(images)
        mask_t = torch.from_numpy(np.stack(masks))
        lr = poly_lr(it, config.max_iter, config.optimizer.lr, config.optimizer.poly_power)

        if is_seg:
            logits = model(x)  # (B, K, H, W)
            loss_value = masked_seg_loss_batch(
                logits.permute(0, 2, 3, 1), mask_t, mode=config.loss_mode
            ).value
        else:
            logits = model(x)  # (B, K)
            loss_value = bce_multilabel(logits, torch.from_numpy(np.stack(targets))).mean()

        model.zero_grad(set_to_none=True)
        loss_value.backward()
        sgd_update(params, gradients_of(params), opt_state, lr)

        if it % config.log_every == 0 or it == config.max_iter - 1:
            metrics.log(it, "train", "loss", float(loss_value.detach()))
            metrics.log(it, "train", "lr", lr)
            if is_seg:
                metrics.log(it, "train", "pixel_accuracy", _batch_pixel_accuracy(logits.detach(), mask_t))

    meta = CheckpointMeta(
        setting=config.setting,
        iteration=config.max_iter,
        master_seed=config.master_seed,
        config_hash=config.hash,
        preset=config.model.preset,
        num_classes=k,
        extra={
            "head": model_config.head,
            "seg_output_stride": model_config.seg_output_stride,
            "head_dilations": list(model_config.head_dilations),
        },
    )
    ckpt = checkpoint_from_model(model, meta)
    if out_dir:
        save_checkpoint(ckpt, out_dir / "checkpoints" / f"{config.setting}_final.ckpt")
    return ckpt


def _evaluate_classifier(model, samples: list[Sample], batch_size: int) -> float:
    model.eval()
    preds, labels = [], []
    with torch.no_grad():
        for start in range(0, len(samples), batch_size):
            chunk = samples[start : start + batch_size]
            logits = model(_to_batch([s.image for s in chunk]))
            preds.extend(logits.argmax(dim=1).tolist())
            labels.extend(s.label for s in chunk)
    model.train()
    return accuracy(preds, labels)


def _records_subset(manifest: DatasetManifest, ids: list[str]) -> DatasetManifest:
    wanted = set(ids)
    from dataclasses import replace

    return replace(manifest, records=[r for r in manifest.records if r.id in wanted])


def run_finetuning(
    config: FinetuneConfig,
    init: Checkpoint | None,
    seed: int | None = None,
    split: tuple[list[str], list[str]] | None = None,
    metrics: MetricsLog | None = None,
    deterministic: bool = True,
) -> RunResult:
    """Fine-tune a classifier on the target domain from a pre-trained
    checkpoint (or from scratch) and evaluate test accuracy each epoch."""
    if deterministic:
        enable_determinism()
    seed = config.master_seed if seed is None else seed
    setting = init.meta.setting if init is not None else "random"
    metrics = metrics or MetricsLog(None)

    train_manifest = load_manifest(config.train_manifest)
    if split is not None:
        train_ids, test_ids = split
        test_manifest = _records_subset(train_manifest, test_ids)
        train_manifest = _records_subset(train_manifest, train_ids)
    else:
        if config.test_manifest is None:
            raise ConfigError("finetune run needs a test manifest or an explicit split")
        test_manifest = load_manifest(config.test_manifest)

    if config.n_c is not None:
        train_manifest = subsample_per_class(train_manifest, config.n_c, derive_seed(seed, "subsample"))

    train = load_samples(train_manifest)
    test = load_samples(test_manifest)
    for s in train + test:
        if s.label is None:
            raise ConfigError(f"fine-tuning sample {s.id!r} has no class label")

    model_config = ModelConfig(
        backbone_preset=config.model.preset,
        num_classes=train_manifest.num_classes,
        head="classification",
    )
    model = transfer_backbone_weights(init, model_config, derive_seed(seed, "init"))
    model.train()

    params = dict(model.named_parameters())
    if config.freeze_backbone:
        params = {k: v for k, v in params.items() if not k.startswith("backbone.")}
    opt_state = AdamState(
        beta1=config.optimizer.beta1, beta2=config.optimizer.beta2, eps=config.optimizer.eps
    )

    n = len(train)
    trace: list[tuple[int, float, float]] = []
    for epoch in range(config.epochs):
        lr = exp_lr(epoch, config.optimizer.lr, config.optimizer.decay_factor)
        order = derived_rng(seed, "shuffle", epoch).permutation(n)
        total_loss, seen = 0.0, 0
        for start in range(0, n, config.batch_size):
            chunk = [train[int(i)] for i in order[start : start + config.batch_size]]
            x = _to_batch([s.image for s in chunk])
            y = torch.as_tensor([s.label for s in chunk], dtype=torch.long)
            loss = softmax_ce_pixel(model(x), y).mean()
            model.zero_grad(set_to_none=True)
            loss.backward()
            adam_update(params, gradients_of(params), opt_state, lr)
            total_loss += float(loss.detach()) * len(chunk)
            seen += len(chunk)
        train_loss = total_loss / max(seen, 1)
        test_acc = _evaluate_classifier(model, test, config.batch_size)
        trace.append((epoch, train_loss, test_acc))
        metrics.log(epoch, "train", "loss", train_loss)
        metrics.log(epoch, "test", "accuracy", test_acc)

    final_acc = trace[-1][2] if trace else _evaluate_classifier(model, test, config.batch_size)
    return RunResult(
        seed=seed,
        setting=setting,
        n_c=config.n_c if config.n_c is not None else 0,
        final_test_accuracy=final_acc,
        trace=trace,
        dataset=config.dataset,
        r_percent=config.r_percent,
    )


def _mean_trace(traces: list[list[tuple[int, float, float]]]) -> list[tuple[int, float, float]]:
    if not traces or not traces[0]:
        return []
    arr = np.asarray(traces, dtype=np.float64)  # (folds, epochs, 3)
    mean = arr.mean(axis=0)
    return [(int(e), float(l), float(a)) for e, l, a in mean]


def run_seed_battery(
    config: FinetuneConfig,
    init_source: Checkpoint | None,
    n_seeds: int | None = None,
    out_dir: str | Path | None = None,
    deterministic: bool = True,
) -> list[RunResult]:
    """Repeat fine-tuning with seeds derived from the master seed. For
    cross-validation datasets each seed trains every fold and reports the
    across-fold mean. Results are written to disk as they complete, so a
    failing member leaves the earlier ones behind."""
    n_seeds = config.n_seeds if n_seeds is None else n_seeds
    if n_seeds < 1:
        raise ContractError(f"n_seeds must be >= 1, got {n_seeds}")
    setting = init_source.meta.setting if init_source is not None else "random"
    out_dir = Path(out_dir) if out_dir else None

    folds = None
    if config.cv_folds is not None:
        manifest = load_manifest(config.train_manifest)
        folds = kfold_splits(manifest, config.cv_folds, derive_seed(config.master_seed, "cv-folds"))

    results = []
    for i in range(n_seeds):
        seed = derive_seed(config.master_seed, "battery", i)
        if folds is None:
            rr = run_finetuning(config, init_source, seed=seed, deterministic=deterministic)
        else:
            fold_results = [
                run_finetuning(
                    config, init_source,
                    seed=derive_seed(seed, "fold", f),
                    split=folds.train_test_ids(f),
                    deterministic=deterministic,
                )
                for f in range(folds.k)
            ]
            rr = RunResult(
                seed=seed,
                setting=setting,
                n_c=fold_results[0].n_c,
                final_test_accuracy=float(np.mean([r.final_test_accuracy for r in fold_results])),
                trace=_mean_trace([r.trace for r in fold_results]),
                dataset=config.dataset,
                r_percent=config.r_percent,
            )
        results.append(rr)
        if out_dir:
            name = f"{setting}_nc{rr.n_c}_seed{i:02d}.json"
            save_run_result(rr, out_dir / "results" / name)
    return results
