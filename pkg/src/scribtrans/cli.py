"""Command-line interface.

Subcommands: synth-data, make-scribbles, pretrain, finetune, evaluate,
report, and reproduce (the whole desk-scale pipeline from an empty
directory). Run artifacts land under --out; training outputs are nested in
a directory named by the config hash so reruns with changed configs never
collide.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import torch
import yaml

from . import report as report_mod
from .checkpoint import load_checkpoint, load_checkpoint_into_model
from .config import parse_config
from .errors import ScribtransError
from .manifest import DatasetManifest, ManifestRecord, load_manifest, save_manifest
from .masks import SCRIBBLE, LabelMask, load_indexed_mask, save_indexed_mask
from .metrics import pixel_accuracy
from .models import ModelConfig, build_model
from .results import load_run_result
from .scribbles import ScribbleParams, synthesize_scribbles
from .seeds import derive_seed
from .synthetic import SyntheticSpec, generate_synthetic_dataset
from .train import load_samples, run_pretraining, run_seed_battery

# desk-scale profile: small enough for a laptop CPU, big enough that
# pre-training on domain A measurably helps on domain B
PROFILES = {
    "desk": {
        "image_size": 64,
        "classes_a": 4,
        "n_a": 48,
        "classes_b": 2,
        "n_b_train": 40,
        "n_b_test": 80,
        "stroke_width": 2,
        "coverage": 0.05,
        "min_region_area": 12,
        "pretrain_iters": 600,
        "pretrain_lr": 0.05,
        "pretrain_batch": 8,
        "seg_output_stride": 4,
        "epochs": 30,
        "finetune_lr": 3e-4,
        "finetune_batch": 8,
        "n_c": 8,
        "n_seeds": 5,
    },
    "mini": {
        "image_size": 48,
        "classes_a": 3,
        "n_a": 10,
        "classes_b": 2,
        "n_b_train": 8,
        "n_b_test": 8,
        "stroke_width": 2,
        "coverage": 0.08,
        "min_region_area": 8,
        "pretrain_iters": 6,
        "pretrain_lr": 0.05,
        "pretrain_batch": 4,
        "seg_output_stride": 4,
        "epochs": 2,
        "finetune_lr": 3e-4,
        "finetune_batch": 4,
        "n_c": 3,
        "n_seeds": 2,
    },
}


def _bool_flag(value: str) -> bool:
    if value.lower() in ("true", "1", "yes"):
        return True
    if value.lower() in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {value!r}")


def cmd_synth_data(args) -> int:
    out = Path(args.out)
    a = generate_synthetic_dataset(
        SyntheticSpec("A", "seg", n=args.n_a, image_size=args.image_size,
                      num_classes=args.classes_a, seed=derive_seed(args.seed, "synth", "a")),
        out / "domain_a",
    )
    b_train = generate_synthetic_dataset(
        SyntheticSpec("B", "cls", n=args.n_b_train, image_size=args.image_size,
                      num_classes=args.classes_b, seed=derive_seed(args.seed, "synth", "b-train")),
        out / "domain_b_train",
    )
    b_test = generate_synthetic_dataset(
        SyntheticSpec("B", "cls", n=args.n_b_test, image_size=args.image_size,
                      num_classes=args.classes_b, seed=derive_seed(args.seed, "synth", "b-test")),
        out / "domain_b_test",
    )
    for m, name in ((a, "domain_a"), (b_train, "domain_b_train"), (b_test, "domain_b_test")):
        print(f"{name}: {len(m.records)} records -> {out / name / 'manifest.jsonl'}")
    return 0


def cmd_make_scribbles(args) -> int:
    src = load_manifest(args.manifest)
    out = Path(args.out)
    records = []
    for record in src.records:
        dense = load_indexed_mask(src.mask_path(record), src)
        params = ScribbleParams(
            stroke_width=args.stroke_width,
            coverage_budget=args.coverage,
            min_region_area=args.min_region_area,
            seed=derive_seed(args.seed, "scribble", record.id),
        )
        scribble = synthesize_scribbles(dense, params)
        save_indexed_mask(scribble, out / "masks" / f"{record.id}.png", src.ignore_value_on_disk)
        image_rel = os.path.relpath(src.image_path(record), out)
        records.append(ManifestRecord(id=record.id, image=image_rel, mask=f"masks/{record.id}.png"))
    manifest = DatasetManifest(
        records=records,
        class_names=src.class_names,
        ignore_value_on_disk=src.ignore_value_on_disk,
        root=out,
        extra={
            "mask_kind": SCRIBBLE,
            "derived_from": str(Path(args.manifest).resolve()),
            "stroke_width": args.stroke_width,
            "coverage_budget": args.coverage,
            "min_region_area": args.min_region_area,
            "seed": args.seed,
        },
    )
    save_manifest(manifest, out / "manifest.jsonl")
    print(f"scribbles: {len(records)} masks -> {out / 'manifest.jsonl'}")
    return 0


def cmd_pretrain(args) -> int:
    config = parse_config(args.config, seed_override=args.seed)
    run_dir = Path(args.out) / config.hash
    ckpt = run_pretraining(config, out_dir=run_dir, deterministic=args.deterministic)
    path = run_dir / "checkpoints" / f"{config.setting}_final.ckpt"
    print(f"checkpoint: {path} (config {config.hash}, seed {ckpt.meta.master_seed})")
    return 0


def cmd_finetune(args) -> int:
    config = parse_config(args.config, seed_override=args.seed)
    init = None if args.init in (None, "none") else load_checkpoint(args.init)
    run_dir = Path(args.out) / config.hash
    results = run_seed_battery(config, init, out_dir=run_dir, deterministic=args.deterministic)
    setting = init.meta.setting if init else "random"
    accs = [r.final_test_accuracy for r in results]
    print(
        f"finetune[{setting}]: {len(results)} runs, mean acc {float(np.mean(accs)):.4f} "
        f"-> {run_dir / 'results'}"
    )
    return 0


def _model_from_checkpoint(ckpt) -> torch.nn.Module:
    extra = ckpt.meta.extra
    config = ModelConfig(
        backbone_preset=ckpt.meta.preset,
        num_classes=ckpt.meta.num_classes,
        head=extra.get("head", "classification"),
        seg_output_stride=extra.get("seg_output_stride"),
        head_dilations=tuple(extra.get("head_dilations", (2,))),
    )
    model = build_model(config, seed=0)
    load_checkpoint_into_model(model, ckpt)
    model.eval()
    return model


def cmd_evaluate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.manifest)
    model = _model_from_checkpoint(ckpt)
    samples = load_samples(manifest)
    head = ckpt.meta.extra.get("head", "classification")
    with torch.no_grad():
        if head == "segmentation":
            scores = []
            for s in samples:
                x = torch.from_numpy(s.image).permute(2, 0, 1).unsqueeze(0)
                pred = model(x).argmax(dim=1)[0].numpy()
                scores.append(pixel_accuracy(LabelMask(pred, manifest.num_classes), s.mask))
            out = {"metric": "mean_pixel_accuracy", "value": float(np.mean(scores)), "n": len(scores)}
        else:
            preds, labels = [], []
            for s in samples:
                x = torch.from_numpy(s.image).permute(2, 0, 1).unsqueeze(0)
                preds.append(int(model(x).argmax(dim=1)))
                labels.append(s.label)
            correct = sum(p == l for p, l in zip(preds, labels))
            out = {"metric": "accuracy", "value": correct / len(preds), "n": len(preds)}
    out["checkpoint"] = str(args.checkpoint)
    out["setting"] = ckpt.meta.setting
    print(json.dumps(out, sort_keys=True))
    return 0


def _aggregate_results_dir(results_dir: Path) -> list[report_mod.AggregateRow]:
    files = sorted(results_dir.rglob("*.json"))
    if not files:
        raise ScribtransError(f"no result files under {results_dir}")
    groups: dict[tuple, list] = {}
    for f in files:
        rr = load_run_result(f)
        groups.setdefault((rr.dataset, rr.n_c, rr.setting), []).append(rr)
    return [report_mod.aggregate_mean_std(rs) for _, rs in sorted(groups.items())]


def cmd_report(args) -> int:
    rows = _aggregate_results_dir(Path(args.results))
    document = report_mod.emit_results_table(rows, format=args.format)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(document)
        print(f"report: {args.out}")
    else:
        print(document, end="" if document.endswith("\n") else "\n")
    return 0


def _write_yaml(tree: dict, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(tree, sort_keys=True))
    return path


def reproduce_config_trees(profile: dict, seed: int) -> tuple[dict, dict]:
    """The pretrain/finetune config trees used by `reproduce` (relative
    paths resolve against the config directory out/configs)."""
    pretrain = {
        "stage": "pretrain",
        "setting": "full_seg",
        "data": {
            "manifest": "../data/domain_a/manifest.jsonl",
            "crop_size": profile["image_size"],
        },
        "model": {"preset": "tiny", "seg_output_stride": profile["seg_output_stride"]},
        "optimizer": {"lr": profile["pretrain_lr"]},
        "max_iter": profile["pretrain_iters"],
        "batch_size": profile["pretrain_batch"],
        "master_seed": seed,
        "log_every": 50,
    }
    finetune = {
        "stage": "finetune",
        "dataset": "domain-b-desk",
        "data": {
            "train_manifest": "../data/domain_b_train/manifest.jsonl",
            "test_manifest": "../data/domain_b_test/manifest.jsonl",
        },
        "model": {"preset": "tiny"},
        "optimizer": {"lr": profile["finetune_lr"]},
        "epochs": profile["epochs"],
        "batch_size": profile["finetune_batch"],
        "n_c": profile["n_c"],
        "r_percent": round(100.0 * profile["n_c"] * profile["classes_b"] / profile["n_b_train"], 2),
        "n_seeds": profile["n_seeds"],
        "master_seed": seed,
    }
    return pretrain, finetune


def cmd_reproduce(args) -> int:
    profile = dict(PROFILES[args.profile])
    if args.n_seeds is not None:
        profile["n_seeds"] = args.n_seeds
    if args.pretrain_iters is not None:
        profile["pretrain_iters"] = args.pretrain_iters
    if args.epochs is not None:
        profile["epochs"] = args.epochs
    out = Path(args.out)
    seed = args.seed

    synth_args = argparse.Namespace(
        out=out / "data", seed=seed, image_size=profile["image_size"],
        n_a=profile["n_a"], classes_a=profile["classes_a"], classes_b=profile["classes_b"],
        n_b_train=profile["n_b_train"], n_b_test=profile["n_b_test"],
    )
    cmd_synth_data(synth_args)

    scrib_args = argparse.Namespace(
        manifest=out / "data" / "domain_a" / "manifest.jsonl",
        out=out / "data" / "domain_a_scribbles",
        seed=seed, stroke_width=profile["stroke_width"],
        coverage=profile["coverage"], min_region_area=profile["min_region_area"],
    )
    cmd_make_scribbles(scrib_args)

    pretrain_tree, finetune_tree = reproduce_config_trees(profile, seed)
    checkpoints = {}
    for setting in ("classification", "full_seg", "scribble_seg"):
        tree = json.loads(json.dumps(pretrain_tree))
        tree["setting"] = setting
        if setting == "scribble_seg":
            tree["data"]["manifest"] = "../data/domain_a_scribbles/manifest.jsonl"
        cfg_path = _write_yaml(tree, out / "configs" / f"pretrain_{setting}.yaml")
        config = parse_config(cfg_path)
        run_dir = out / "runs" / config.hash
        run_pretraining(config, out_dir=run_dir, deterministic=args.deterministic)
        checkpoints[setting] = run_dir / "checkpoints" / f"{setting}_final.ckpt"
        print(f"pretrained[{setting}] -> {checkpoints[setting]}")

    cfg_path = _write_yaml(finetune_tree, out / "configs" / "finetune.yaml")
    config = parse_config(cfg_path)
    for setting in ("random", "classification", "full_seg", "scribble_seg"):
        init = None if setting == "random" else load_checkpoint(checkpoints[setting])
        run_dir = out / "runs" / config.hash
        results = run_seed_battery(config, init, out_dir=run_dir, deterministic=args.deterministic)
        accs = [r.final_test_accuracy for r in results]
        print(f"finetuned[{setting}]: mean acc {float(np.mean(accs)):.4f}")

    rows = _aggregate_results_dir(out / "runs" / config.hash / "results")
    for fmt, name in (("markdown", "results.md"), ("csv", "results.csv"), ("json", "results.json")):
        document = report_mod.emit_results_table(rows, format=fmt)
        (out / "report").mkdir(parents=True, exist_ok=True)
        (out / "report" / name).write_text(document)
    print((out / "report" / "results.md").read_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scribtrans",
        description="Scribble/full-mask/class-label pre-training and cross-domain transfer harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate the synthetic source/target datasets")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image-size", dest="image_size", type=int, default=64)
    p.add_argument("--n-a", dest="n_a", type=int, default=48)
    p.add_argument("--classes-a", dest="classes_a", type=int, default=4)
    p.add_argument("--n-b-train", dest="n_b_train", type=int, default=40)
    p.add_argument("--n-b-test", dest="n_b_test", type=int, default=80)
    p.add_argument("--classes-b", dest="classes_b", type=int, default=2)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("make-scribbles", help="derive scribble masks from a dense-mask manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stroke-width", dest="stroke_width", type=int, default=2)
    p.add_argument("--coverage", type=float, default=0.05)
    p.add_argument("--min-region-area", dest="min_region_area", type=int, default=16)
    p.set_defaults(func=cmd_make_scribbles)

    p = sub.add_parser("pretrain", help="pre-train on the source domain")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--deterministic", type=_bool_flag, default=True)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="run the fine-tuning seed battery")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--init", default="none", help="'none' or a checkpoint path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--deterministic", type=_bool_flag, default=True)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate run results into the results table")
    p.add_argument("--results", required=True, help="directory of RunResult json files")
    p.add_argument("--format", choices=report_mod.FORMATS, default="markdown")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("reproduce", help="full desk-scale pipeline from an empty directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    p.add_argument("--n-seeds", dest="n_seeds", type=int, default=None)
    p.add_argument("--pretrain-iters", dest="pretrain_iters", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--deterministic", type=_bool_flag, default=True)
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScribtransError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
