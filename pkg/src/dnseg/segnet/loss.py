"""Pixel-wise softmax cross-entropy."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import EmptyTarget, InvalidInput, ShapeError


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits, mask, ignore_label: Optional[int] = None):
    """Mean cross-entropy over non-ignored pixels and its gradient.

    ``logits`` is (..., K) and ``mask`` the matching (...) integer labels.
    Returns ``(loss, grad)`` with ``grad = (softmax - onehot) / N_valid`` on
    valid pixels and zero elsewhere.
    """
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask)
    if logits.shape[:-1] != mask.shape:
        raise ShapeError(f"logits {logits.shape} and mask {mask.shape} do not align")
    k = logits.shape[-1]
    valid = np.ones(mask.shape, dtype=bool) if ignore_label is None else mask != ignore_label
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise EmptyTarget("every pixel is ignored")
    labels = np.where(valid, mask, 0)
    if labels.min() < 0 or labels.max() >= k:
        raise InvalidInput(f"labels must lie in [0, {k}) or equal the ignore label")
    z = logits - logits.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=-1))
    picked = np.take_along_axis(z, labels[..., None], axis=-1)[..., 0]
    nll = log_norm - picked
    loss = float(nll[valid].sum() / n_valid)
    grad = softmax(logits)
    np.put_along_axis(grad, labels[..., None], np.take_along_axis(grad, labels[..., None], axis=-1) - 1.0, axis=-1)
    grad *= valid[..., None] / n_valid
    return loss, grad
