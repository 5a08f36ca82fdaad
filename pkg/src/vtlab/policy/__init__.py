"""Diffusion-policy behavior cloning over action chunks."""

from .conditioning import (
    ObsConditioning,
    ObsWindow,
    Variant,
    build_conditioning,
    conditioning_batch,
    conditioning_dim,
    degrade_tactile,
    window_from_aligned,
)
from .normalizer import MinMaxNormalizer
from .sampling import ActionChunk, ddim_sample
from .schedule import NoiseSchedule, add_noise, ddim_timesteps
from .train import (
    EmptyDatasetError,
    PolicyModel,
    build_windows,
    gather_chunk,
    load_policy_checkpoint,
    save_policy_checkpoint,
    train_policy,
)
from .unet import ConditionalUNet1D

__all__ = [
    "ActionChunk",
    "ConditionalUNet1D",
    "EmptyDatasetError",
    "MinMaxNormalizer",
    "NoiseSchedule",
    "ObsConditioning",
    "ObsWindow",
    "PolicyModel",
    "Variant",
    "add_noise",
    "build_conditioning",
    "build_windows",
    "conditioning_batch",
    "conditioning_dim",
    "ddim_sample",
    "ddim_timesteps",
    "degrade_tactile",
    "gather_chunk",
    "load_policy_checkpoint",
    "save_policy_checkpoint",
    "train_policy",
    "window_from_aligned",
]
