"""Symmetric temperature-scaled contrastive loss over embedding batches.

Both directional terms are exposed for testing: one classifies which fused
row matches each next-step vision row, the other classifies which vision row
matches each fused row. The total is their mean.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as fn

from ..errors import UsageError
from .model import EmbeddingBatch


def _pair(f, v) -> tuple[torch.Tensor, torch.Tensor]:
    if isinstance(f, EmbeddingBatch):
        f = f.vectors
    if isinstance(v, EmbeddingBatch):
        v = v.vectors
    f = torch.as_tensor(np.asarray(f)) if not isinstance(f, torch.Tensor) else f
    v = torch.as_tensor(np.asarray(v)) if not isinstance(v, torch.Tensor) else v
    if f.shape[0] != v.shape[0]:
        raise UsageError(f"batch size mismatch: {f.shape[0]} vs {v.shape[0]}")
    if f.shape[0] == 0:
        raise UsageError("contrastive loss undefined for an empty batch")
    return f, v


def clip_loss_terms(fused, v_next, tau) -> tuple[torch.Tensor, torch.Tensor]:
    """Directional cross-entropy terms (fused-to-vision, vision-to-fused)."""
    f, v = _pair(fused, v_next)
    if not isinstance(tau, torch.Tensor):
        tau = torch.as_tensor(tau, dtype=f.dtype)
    logits = (f @ v.transpose(0, 1)) / tau  # cosine similarities of unit rows
    labels = torch.arange(f.shape[0], device=f.device)
    loss_fv = fn.cross_entropy(logits, labels)
    loss_vf = fn.cross_entropy(logits.transpose(0, 1), labels)
    return loss_fv, loss_vf


def clip_loss(fused, v_next, tau) -> torch.Tensor:
    """Symmetric contrastive loss: mean of the two directional terms."""
    loss_fv, loss_vf = clip_loss_terms(fused, v_next, tau)
    return 0.5 * (loss_fv + loss_vf)
