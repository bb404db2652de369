"""Masked binary cross-entropy over per-frame multi-hot grids."""

from __future__ import annotations

import numpy as np

CLIP = 1e-7


def bce_loss(pred: np.ndarray, target: np.ndarray, mask: np.ndarray | None = None,
             with_grad: bool = False):
    """Mean binary cross-entropy over valid cells.

    ``pred`` holds probabilities (clipped to [1e-7, 1-1e-7] internally);
    ``mask`` broadcasts against ``pred`` (e.g. a (B, T) frame-validity mask
    against (B, T, C) grids) and excludes padded frames from both the mean
    and the gradient.  With ``with_grad`` returns (loss, dloss/dpred).
    """
    pred = np.asarray(pred)
    target = np.asarray(target, dtype=pred.dtype)
    p = np.clip(pred, CLIP, 1.0 - CLIP)
    cell = -(target * np.log(p) + (1.0 - target) * np.log1p(-p))
    if mask is None:
        count = cell.size
        loss = float(cell.sum() / count)
        if not with_grad:
            return loss
        grad = (p - target) / (p * (1.0 - p)) / count
    else:
        mask = np.asarray(mask, dtype=pred.dtype)
        if mask.ndim == pred.ndim - 1:
            mask = mask[..., None]
        weighted = cell * mask
        count = float(mask.sum() * (pred.shape[-1] if mask.shape[-1] == 1 else 1.0))
        if count == 0:
            raise ValueError("mask excludes every cell")
        loss = float(weighted.sum() / count)
        if not with_grad:
            return loss
        grad = (p - target) / (p * (1.0 - p)) * mask / count
    # clipping gates the gradient outside the representable band
    grad = np.where((pred > CLIP) & (pred < 1.0 - CLIP), grad, 0.0)
    return loss, grad.astype(pred.dtype)
