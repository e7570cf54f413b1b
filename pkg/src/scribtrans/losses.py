"""Masked segmentation cross-entropy and multi-label BCE.

The segmentation loss sums per-pixel softmax cross-entropy over labeled
pixels only; ignored pixels contribute exactly zero loss and exactly zero
gradient, which is what lets predictions expand freely into unlabeled
regions during scribble training. Two normalizations are exposed: 'labeled'
divides by the number of labeled pixels (default, keeps gradient magnitude
independent of scribble sparsity) and 'paper' divides by the full pixel
count H*W.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch

from .errors import ContractError
from .masks import IGNORE, LabelMask

log = logging.getLogger(__name__)

MODES = ("labeled", "paper")


@dataclass
class LossValue:
    value: torch.Tensor  # scalar, differentiable
    labeled_count: int

    def item(self) -> float:
        return float(self.value.detach())


def softmax_ce_pixel(logits: torch.Tensor, label) -> torch.Tensor:
    """-log softmax(logits)[label] with max-subtraction stabilization.

    logits: (..., K); label: int or (...) index tensor. Returns (...).
    """
    z = torch.as_tensor(logits)
    lab = torch.as_tensor(label, dtype=torch.long, device=z.device)
    if lab.ndim == z.ndim:
        raise ContractError("label must have one dimension fewer than logits")
    lse = torch.logsumexp(z, dim=-1)
    picked = z.gather(-1, lab.unsqueeze(-1)).squeeze(-1)
    return lse - picked


def _mask_tensor(mask, device) -> torch.Tensor:
    if isinstance(mask, LabelMask):
        return torch.as_tensor(mask.data, dtype=torch.long, device=device)
    return torch.as_tensor(mask, dtype=torch.long, device=device)


def masked_seg_loss(logits: torch.Tensor, mask, mode: str = "labeled") -> LossValue:
    """Cross-entropy over non-ignored pixels of one image.

    logits: (H, W, K); mask: (H, W) int with IGNORE for unlabeled pixels.
    """
    if mode not in MODES:
        raise ContractError(f"mode must be one of {MODES}, got {mode!r}")
    z = torch.as_tensor(logits)
    m = _mask_tensor(mask, z.device)
    if z.ndim != 3:
        raise ContractError(f"logits must be HxWxK, got shape {tuple(z.shape)}")
    if m.shape != z.shape[:2]:
        raise ContractError(f"logits {tuple(z.shape[:2])} and mask {tuple(m.shape)} shapes differ")

    labeled = m != IGNORE
    count = int(labeled.sum())
    if count == 0:
        # zero loss, and exactly-zero gradient to every logit
        return LossValue(value=z.sum() * 0.0, labeled_count=0)

    ce = softmax_ce_pixel(z[labeled], m[labeled])
    denom = count if mode == "labeled" else m.numel()
    return LossValue(value=ce.sum() / denom, labeled_count=count)


def masked_seg_loss_batch(logits: torch.Tensor, masks, mode: str = "labeled") -> LossValue:
    """Mean of per-image losses over a batch; images with no labeled pixels
    are skipped (with a warning) so they do not dilute the update.

    logits: (B, H, W, K); masks: (B, H, W).
    """
    z = torch.as_tensor(logits)
    m = _mask_tensor(masks, z.device)
    per_image = [masked_seg_loss(z[i], m[i], mode) for i in range(z.shape[0])]
    contributing = [lv for lv in per_image if lv.labeled_count > 0]
    if not contributing:
        log.warning("every image in the batch is fully ignored; loss is 0")
        return LossValue(value=z.sum() * 0.0, labeled_count=0)
    if len(contributing) < len(per_image):
        log.warning(
            "skipping %d fully-ignored image(s) in batch", len(per_image) - len(contributing)
        )
    value = torch.stack([lv.value for lv in contributing]).mean()
    return LossValue(value=value, labeled_count=sum(lv.labeled_count for lv in contributing))


def bce_multilabel(logits: torch.Tensor, target) -> torch.Tensor:
    """Mean binary cross-entropy with logits over the class axis, in the
    overflow-safe log-sum-exp form.

    logits: (..., K); target: (..., K) of {0,1}. Returns (...).
    """
    z = torch.as_tensor(logits)
    t = torch.as_tensor(target, dtype=z.dtype, device=z.device)
    if t.shape != z.shape:
        raise ContractError(f"logits {tuple(z.shape)} and target {tuple(t.shape)} shapes differ")
    loss = z.clamp_min(0.0) - z * t + torch.log1p(torch.exp(-z.abs()))
    return loss.mean(dim=-1)
