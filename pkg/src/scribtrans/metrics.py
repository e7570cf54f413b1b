"""Accuracy metrics."""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .masks import IGNORE, LabelMask


def accuracy(predictions, labels) -> float:
    """Fraction of equal entries."""
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.shape != y.shape:
        raise ContractError(f"shape mismatch: predictions {p.shape} vs labels {y.shape}")
    if p.size == 0:
        raise ContractError("accuracy of an empty prediction set is undefined")
    return float(np.count_nonzero(p == y)) / p.size


def pixel_accuracy(pred_mask: LabelMask, ref_mask: LabelMask) -> float:
    """Accuracy over the reference mask's non-ignored pixels only."""
    if pred_mask.data.shape != ref_mask.data.shape:
        raise ContractError(
            f"shape mismatch: pred {pred_mask.data.shape} vs ref {ref_mask.data.shape}"
        )
    valid = ref_mask.data != IGNORE
    if not valid.any():
        raise ContractError("reference mask has no labeled pixels")
    return accuracy(pred_mask.data[valid], ref_mask.data[valid])
