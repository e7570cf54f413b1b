"""Paired image/mask augmentation: random rescale, crop and horizontal flip.

Each op draws its random decision once and applies it to the image and the
mask together. Images are interpolated bilinearly; masks always use nearest
neighbour so no new label values can appear. Inputs smaller than the crop
size are padded centered, with 0 in the image and IGNORE in the mask, so
padding contributes no loss.
"""

from __future__ import annotations

import math

import cv2
import numpy as np

from .errors import ContractError
from .masks import IGNORE, LabelMask


def _check_pair(image: np.ndarray, mask: LabelMask | None) -> None:
    if image.ndim != 3:
        raise ContractError(f"image must be HxWxC, got shape {image.shape}")
    if mask is not None and mask.data.shape != image.shape[:2]:
        raise ContractError(f"image {image.shape[:2]} and mask {mask.data.shape} shapes differ")


def _nearest_indices(n_out: int, n_in: int) -> np.ndarray:
    # pixel-center nearest neighbour mapping, label-safe for any dtype
    src = np.floor((np.arange(n_out) + 0.5) * (n_in / n_out)).astype(np.int64)
    return np.clip(src, 0, n_in - 1)


def random_rescale(
    image: np.ndarray,
    mask: LabelMask | None,
    scale_range: tuple[float, float],
    rng: np.random.Generator,
) -> tuple[np.ndarray, LabelMask | None]:
    lo, hi = scale_range
    if not (0 < lo <= hi):
        raise ContractError(f"invalid scale range {scale_range}")
    _check_pair(image, mask)
    s = float(rng.uniform(lo, hi))
    h, w = image.shape[:2]
    nh, nw = math.ceil(s * h), math.ceil(s * w)
    if (nh, nw) == (h, w):
        return image, mask
    out_img = cv2.resize(image, (nw, nh), interpolation=cv2.INTER_LINEAR)
    if out_img.ndim == 2:  # cv2 drops a size-1 channel axis
        out_img = out_img[:, :, None]
    out_mask = None
    if mask is not None:
        rows = _nearest_indices(nh, h)
        cols = _nearest_indices(nw, w)
        out_mask = LabelMask(mask.data[np.ix_(rows, cols)], mask.num_classes, mask.kind)
    return out_img, out_mask


def _pad_to(image: np.ndarray, mask: LabelMask | None, size: int):
    h, w = image.shape[:2]
    ph, pw = max(0, size - h), max(0, size - w)
    if ph == 0 and pw == 0:
        return image, mask
    pads = ((ph // 2, ph - ph // 2), (pw // 2, pw - pw // 2))
    image = np.pad(image, (*pads, (0, 0)), constant_values=0.0)
    if mask is not None:
        mask = LabelMask(
            np.pad(mask.data, pads, constant_values=IGNORE), mask.num_classes, mask.kind
        )
    return image, mask


def random_crop(
    image: np.ndarray,
    mask: LabelMask | None,
    size: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, LabelMask | None]:
    _check_pair(image, mask)
    image, mask = _pad_to(image, mask, size)
    h, w = image.shape[:2]
    oy = int(rng.integers(0, h - size + 1))
    ox = int(rng.integers(0, w - size + 1))
    out_img = image[oy : oy + size, ox : ox + size].copy()
    out_mask = None
    if mask is not None:
        out_mask = LabelMask(
            mask.data[oy : oy + size, ox : ox + size].copy(), mask.num_classes, mask.kind
        )
    return out_img, out_mask


def random_hflip(
    image: np.ndarray,
    mask: LabelMask | None,
    p: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, LabelMask | None]:
    _check_pair(image, mask)
    if rng.random() >= p:
        return image, mask
    out_img = image[:, ::-1].copy()
    out_mask = None
    if mask is not None:
        out_mask = LabelMask(mask.data[:, ::-1].copy(), mask.num_classes, mask.kind)
    return out_img, out_mask


def augment_pair(
    image: np.ndarray,
    mask: LabelMask | None,
    rng: np.random.Generator,
    crop_size: int,
    scale_range: tuple[float, float] = (0.5, 1.5),
    hflip_prob: float = 0.5,
) -> tuple[np.ndarray, LabelMask | None]:
    """The pre-training augmentation chain: rescale -> crop -> hflip."""
    image, mask = random_rescale(image, mask, scale_range, rng)
    image, mask = random_crop(image, mask, crop_size, rng)
    image, mask = random_hflip(image, mask, hflip_prob, rng)
    return image, mask
