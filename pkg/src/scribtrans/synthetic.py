"""Synthetic desk-scale datasets.

Domain A: textured geometric shapes (stripes / dots / checker fills) on a
smooth-noise background, with exact dense masks. Domain B: scattered
blob-like cells on a tissue-toned background, labeled per image by the blob
texture family. Both domains draw from the same texture families and noise
statistics but differ completely in layout, so backbone features learned on
A are useful (but not trivially sufficient) on B. All randomness derives
from (seed, domain, image index); rerunning a generator yields byte-identical
files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .errors import ContractError
from .manifest import DatasetManifest, ManifestRecord, save_manifest
from .masks import LabelMask, save_indexed_mask
from .seeds import derived_rng

DOMAIN_A = "A"
DOMAIN_B = "B"

# texture family base colors, domain A (background first)
_A_BG_COLOR = np.array([0.46, 0.52, 0.46])
_A_CLASS_COLORS = [
    np.array([0.74, 0.36, 0.36]),
    np.array([0.36, 0.46, 0.74]),
    np.array([0.72, 0.68, 0.34]),
    np.array([0.52, 0.70, 0.48]),
    np.array([0.66, 0.44, 0.70]),
]
# domain B keeps one blob color for every class: texture is the only cue
_B_BG_COLOR = np.array([0.80, 0.68, 0.73])
_B_BLOB_COLOR = np.array([0.55, 0.40, 0.52])
_B_DISTRACTOR_COLOR = np.array([0.36, 0.31, 0.39])


@dataclass
class SyntheticSpec:
    domain: str
    task: str  # 'seg' (domain A) or 'cls' (domain B)
    n: int
    image_size: int = 64
    num_classes: int = 4
    seed: int = 0

    def validate(self) -> None:
        if self.n < 1 or self.num_classes < 2:
            raise ContractError("need n >= 1 and num_classes >= 2")
        if self.domain == DOMAIN_A and self.task != "seg":
            raise ContractError("domain A generates segmentation data (task='seg')")
        if self.domain == DOMAIN_B and self.task != "cls":
            raise ContractError("domain B generates classification data (task='cls')")
        if self.domain not in (DOMAIN_A, DOMAIN_B):
            raise ContractError(f"unknown domain {self.domain!r}")


def _mesh(size: int):
    return np.mgrid[0:size, 0:size].astype(np.float64)


def _stripes(size: int, freq: float, angle: float, phase: float) -> np.ndarray:
    y, x = _mesh(size)
    u = (x * math.cos(angle) + y * math.sin(angle)) / size
    return 0.5 + 0.5 * np.sin(2 * np.pi * freq * u + phase)


def _dots(size: int, freq: float, phase: float) -> np.ndarray:
    y, x = _mesh(size)
    t = np.sin(2 * np.pi * freq * x / size + phase) * np.sin(2 * np.pi * freq * y / size + 1.7 * phase)
    return 0.5 + 0.5 * t


def _checker(size: int, freq: float, phase: float) -> np.ndarray:
    y, x = _mesh(size)
    t = np.sin(2 * np.pi * freq * x / size + phase) * np.sin(2 * np.pi * freq * y / size + phase)
    return 0.5 + 0.5 * np.tanh(4.0 * t)


def _smooth_noise(size: int, rng: np.random.Generator, sigma: float = 3.0) -> np.ndarray:
    n = rng.normal(0.0, 1.0, (size, size))
    n = cv2.GaussianBlur(n, (0, 0), sigma)
    lo, hi = n.min(), n.max()
    return (n - lo) / (hi - lo + 1e-9)


def texture_family(index: int, size: int, rng: np.random.Generator, freq_scale: float = 1.0) -> np.ndarray:
    """Render texture family `index` (cycled) with per-call jitter."""
    jitter = float(rng.uniform(0.85, 1.15))
    phase = float(rng.uniform(0, 2 * np.pi))
    fam = index % 3
    if fam == 0:
        angle = float(rng.uniform(-0.3, 0.3)) + (np.pi / 4) * (index // 3)
        return _stripes(size, 7.0 * jitter * freq_scale, angle, phase)
    if fam == 1:
        return _dots(size, 6.0 * jitter * freq_scale, phase)
    return _checker(size, 5.0 * jitter * freq_scale, phase)


def _colorize(tex: np.ndarray, color: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    base = np.clip(color + rng.uniform(-0.06, 0.06, 3), 0.05, 0.95)
    return base[None, None, :] * (0.45 + 0.55 * tex[:, :, None])


def _random_shape_mask(size: int, rng: np.random.Generator) -> np.ndarray:
    """One filled ellipse, rotated box or triangle as a bool mask."""
    canvas = np.zeros((size, size), dtype=np.uint8)
    cy, cx = rng.integers(size // 4, 3 * size // 4, size=2)
    r1 = int(rng.integers(size // 6, size // 3))
    r2 = int(rng.integers(size // 6, size // 3))
    angle = float(rng.uniform(0, 180))
    kind = int(rng.integers(0, 3))
    if kind == 0:
        cv2.ellipse(canvas, (int(cx), int(cy)), (r1, r2), angle, 0, 360, 1, -1)
    elif kind == 1:
        box = cv2.boxPoints(((float(cx), float(cy)), (2.0 * r1, 2.0 * r2), angle))
        cv2.fillPoly(canvas, [np.int64(np.rint(box))], 1)
    else:
        theta = np.deg2rad(angle) + np.array([0.0, 2.1, 4.2])
        pts = np.stack([cx + 1.2 * r1 * np.cos(theta), cy + 1.2 * r2 * np.sin(theta)], axis=1)
        cv2.fillPoly(canvas, [np.int64(np.rint(pts))], 1)
    return canvas.astype(bool)


def _render_domain_a(spec: SyntheticSpec, index: int) -> tuple[np.ndarray, LabelMask]:
    rng = derived_rng(spec.seed, "A", index)
    size = spec.image_size
    k = spec.num_classes
    img = _colorize(_smooth_noise(size, rng), _A_BG_COLOR, rng)
    mask = np.zeros((size, size), dtype=np.int64)

    n_shapes = 1 if k == 2 else int(rng.integers(1, min(3, k - 1) + 1))
    # first shape cycles through the classes so every class is well represented
    classes = [(index % (k - 1)) + 1]
    classes += [int(rng.integers(1, k)) for _ in range(n_shapes - 1)]
    for c in classes:
        region = _random_shape_mask(size, rng)
        tex = texture_family(c - 1, size, rng)
        layer = _colorize(tex, _A_CLASS_COLORS[(c - 1) % len(_A_CLASS_COLORS)], rng)
        img[region] = layer[region]
        mask[region] = c

    img = np.clip(img + rng.normal(0.0, 0.025, img.shape), 0.0, 1.0)
    return img.astype(np.float32), LabelMask(mask, k)


def _render_domain_b(spec: SyntheticSpec, index: int) -> tuple[np.ndarray, int]:
    rng = derived_rng(spec.seed, "B", index)
    size = spec.image_size
    label = index % spec.num_classes
    img = _colorize(_smooth_noise(size, rng), _B_BG_COLOR, rng)

    n_blobs = int(rng.integers(14, 24))
    for b in range(n_blobs):
        cy, cx = rng.integers(2, size - 2, size=2)
        ry = int(rng.integers(3, 7))
        rx = int(rng.integers(3, 7))
        canvas = np.zeros((size, size), dtype=np.uint8)
        cv2.ellipse(canvas, (int(cx), int(cy)), (rx, ry), float(rng.uniform(0, 180)), 0, 360, 1, -1)
        region = canvas.astype(bool)
        if rng.random() < 0.3:  # neutral distractor blob, identical across classes
            layer = _colorize(_smooth_noise(size, rng, sigma=1.5), _B_DISTRACTOR_COLOR, rng)
        else:
            tex = texture_family(label, size, rng, freq_scale=1.8)
            layer = _colorize(tex, _B_BLOB_COLOR, rng)
        img[region] = layer[region]

    img = np.clip(img + rng.normal(0.0, 0.025, img.shape), 0.0, 1.0)
    return img.astype(np.float32), label


def _save_image(img: np.ndarray, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.round(img * 255.0).astype(np.uint8), mode="RGB").save(path)


def generate_synthetic_dataset(
    spec: SyntheticSpec,
    out_dir: str | Path,
    manifest_name: str = "manifest.jsonl",
    prefix: str | None = None,
) -> DatasetManifest:
    """Write images (and masks for domain A) plus a manifest under out_dir."""
    spec.validate()
    out_dir = Path(out_dir)
    prefix = prefix if prefix is not None else spec.domain.lower()
    records = []
    for i in range(spec.n):
        stem = f"{prefix}{i:04d}"
        if spec.domain == DOMAIN_A:
            img, mask = _render_domain_a(spec, i)
            _save_image(img, out_dir / "images" / f"{stem}.png")
            save_indexed_mask(mask, out_dir / "masks" / f"{stem}.png", ignore_value_on_disk=255)
            records.append(ManifestRecord(id=stem, image=f"images/{stem}.png", mask=f"masks/{stem}.png"))
        else:
            img, label = _render_domain_b(spec, i)
            _save_image(img, out_dir / "images" / f"{stem}.png")
            records.append(ManifestRecord(id=stem, image=f"images/{stem}.png", label=label))

    if spec.domain == DOMAIN_A:
        names = ["background"] + [_family_name(j) for j in range(spec.num_classes - 1)]
    else:
        names = [_family_name(j) for j in range(spec.num_classes)]
    manifest = DatasetManifest(
        records=records,
        class_names=names,
        ignore_value_on_disk=255,
        root=out_dir,
        extra={
            "domain": spec.domain,
            "task": spec.task,
            "seed": spec.seed,
            "image_size": spec.image_size,
            "generator": "scribtrans-synth-v1",
        },
    )
    manifest.validate()
    save_manifest(manifest, out_dir / manifest_name)
    return manifest


def _family_name(index: int) -> str:
    base = ["streaky", "dotted", "checked"][index % 3]
    return base if index < 3 else f"{base}{index // 3 + 1}"
