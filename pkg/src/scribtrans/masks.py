"""Label masks and their on-disk encoding.

Internally a mask holds class indices 0..K-1 plus the reserved IGNORE
sentinel (-1), which can never collide with a class index. Mask files store
8-bit values; the manifest's ``ignore_value_on_disk`` is remapped to IGNORE
at load time and the remaining K valid on-disk values map order-preservingly
onto 0..K-1. With ignore-on-disk 0 this reproduces the convention where file
values 1..K are the classes; with the default 255 the file values 0..K-1 are
used as-is.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ContractError, EmptySupervisionError, MalformedMaskError
from .manifest import DatasetManifest

IGNORE = -1

DENSE = "dense"
SCRIBBLE = "scribble"


@dataclass
class LabelMask:
    data: np.ndarray  # (H, W) integer array of class indices or IGNORE
    num_classes: int
    kind: str = DENSE

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2:
            raise ContractError(f"mask must be 2-D, got shape {self.data.shape}")
        if not np.issubdtype(self.data.dtype, np.integer):
            raise ContractError(f"mask dtype must be integer, got {self.data.dtype}")
        if self.kind not in (DENSE, SCRIBBLE):
            raise ContractError(f"unknown mask kind {self.kind!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    def labeled(self) -> np.ndarray:
        return self.data != IGNORE

    def labeled_fraction(self) -> float:
        return float(np.count_nonzero(self.labeled())) / self.data.size

    def classes_present(self) -> np.ndarray:
        vals = np.unique(self.data)
        return vals[vals != IGNORE]

    def validate(self) -> None:
        bad = (self.data != IGNORE) & ((self.data < 0) | (self.data >= self.num_classes))
        if bad.any():
            y, x = np.argwhere(bad)[0]
            raise ContractError(
                f"mask value {int(self.data[y, x])} at ({int(y)}, {int(x)}) outside "
                f"[0, {self.num_classes - 1}] and not IGNORE"
            )


def disk_class_values(num_classes: int, ignore_value_on_disk: int) -> np.ndarray:
    """The K valid on-disk values: the first K non-negative 8-bit integers
    skipping the ignore value, in increasing order."""
    vals = [v for v in range(256) if v != ignore_value_on_disk][:num_classes]
    if len(vals) < num_classes:
        raise ContractError(f"cannot encode {num_classes} classes in 8-bit values")
    return np.asarray(vals, dtype=np.int64)


def load_indexed_mask(path: str | Path, manifest: DatasetManifest) -> LabelMask:
    """Load an 8-bit single-channel indexed mask file and remap it to the
    internal encoding (classes 0..K-1, IGNORE sentinel)."""
    path = Path(path)
    img = Image.open(path)
    if img.mode == "P":
        img = img.convert("L")
    if img.mode != "L":
        raise MalformedMaskError(f"{path}: expected 8-bit single-channel mask, got mode {img.mode!r}")
    raw = np.asarray(img, dtype=np.int64)

    k = manifest.num_classes
    lut = np.full(256, -2, dtype=np.int64)  # -2 marks invalid values
    lut[disk_class_values(k, manifest.ignore_value_on_disk)] = np.arange(k)
    lut[manifest.ignore_value_on_disk] = IGNORE

    mapped = lut[raw]
    bad = mapped == -2
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise MalformedMaskError(
            f"{path}: pixel value {int(raw[y, x])} at ({int(y)}, {int(x)}) is not a "
            f"class index or the ignore value {manifest.ignore_value_on_disk}"
        )
    kind = SCRIBBLE if manifest.extra.get("mask_kind") == SCRIBBLE else DENSE
    return LabelMask(data=mapped, num_classes=k, kind=kind)


def save_indexed_mask(mask: LabelMask, path: str | Path, ignore_value_on_disk: int = 255) -> Path:
    """Inverse of load_indexed_mask: write the 8-bit indexed file."""
    mask.validate()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = disk_class_values(mask.num_classes, ignore_value_on_disk)
    out = np.full(mask.data.shape, ignore_value_on_disk, dtype=np.uint8)
    lab = mask.labeled()
    out[lab] = values[mask.data[lab]].astype(np.uint8)
    Image.fromarray(out, mode="L").save(path)
    return path


def derive_multilabel_target(mask: LabelMask, background_class: int | None = 0) -> np.ndarray:
    """Presence bit vector: bit k is set iff class k occupies at least one
    non-ignored pixel. The background class is excluded by default since it
    appears in nearly every image."""
    lab = mask.labeled()
    if not lab.any():
        raise EmptySupervisionError("mask has no labeled pixels; cannot derive a class target")
    target = np.zeros(mask.num_classes, dtype=np.float32)
    target[np.unique(mask.data[lab])] = 1.0
    if background_class is not None:
        target[background_class] = 0.0
    return target
