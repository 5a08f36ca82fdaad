"""Masked multimodal contrastive pre-training of the tactile encoder."""

from .loss import clip_loss, clip_loss_terms
from .masking import PatchMask, apply_mask, draw_mask, mask_patches
from .model import (
    EmbeddingBatch,
    FusionHead,
    ReprModel,
    Role,
    TactileEncoder,
    VisionEncoder,
    encode,
    fuse,
    unit_rows,
    vision_param_checksum,
)
from .train import (
    EmptyDatasetError,
    load_repr_checkpoint,
    pretrain,
    save_repr_checkpoint,
)

__all__ = [
    "EmbeddingBatch",
    "EmptyDatasetError",
    "FusionHead",
    "PatchMask",
    "ReprModel",
    "Role",
    "TactileEncoder",
    "VisionEncoder",
    "apply_mask",
    "clip_loss",
    "clip_loss_terms",
    "draw_mask",
    "encode",
    "fuse",
    "load_repr_checkpoint",
    "mask_patches",
    "pretrain",
    "save_repr_checkpoint",
    "unit_rows",
    "vision_param_checksum",
]
