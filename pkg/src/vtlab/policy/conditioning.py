"""Observation conditioning vectors for the four policy variants.

Each conditioning concatenates, per image-observation frame, the unit vision
embedding and (except for the vision-only baseline) the unit tactile
embedding, followed by the normalized proprioception history. The low-res
variant degrades the tactile images to 16x16 and back before encoding.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as fn

from ..episodes import AlignedEpisode
from ..errors import UsageError
from ..pretrain.model import unit_rows
from .normalizer import MinMaxNormalizer

LOWRES_SIZE = 16


class Variant(str, enum.Enum):
    VISION_ONLY = "vision-only"
    VISUOTACTILE_SCRATCH = "visuotactile-scratch"
    VISUOTACTILE_PRETRAINED = "visuotactile-pretrained"
    VISUOTACTILE_LOWRES = "visuotactile-lowres"


TACTILE_VARIANTS = (Variant.VISUOTACTILE_SCRATCH, Variant.VISUOTACTILE_PRETRAINED,
                    Variant.VISUOTACTILE_LOWRES)


@dataclass
class ObsConditioning:
    vector: np.ndarray  # (C,) float32
    variant: Variant


@dataclass
class ObsWindow:
    """Observation history covering the image and proprioception horizons."""

    vision: np.ndarray  # (H_img, H, W, 3)
    tactile_left: np.ndarray  # (H_img, h, w)
    tactile_right: np.ndarray  # (H_img, h, w)
    proprio: np.ndarray  # (H_prop, 4)


def conditioning_dim(variant: Variant, embed_dim: int, image_horizon: int = 2,
                     proprio_horizon: int = 2, proprio_dim: int = 4) -> int:
    per_frame = embed_dim if variant == Variant.VISION_ONLY else 2 * embed_dim
    return image_horizon * per_frame + proprio_horizon * proprio_dim


def window_from_aligned(episode: AlignedEpisode, k: int, image_horizon: int = 2,
                        proprio_horizon: int = 2) -> ObsWindow:
    """History window ending at tick k; the first frame repeats at the episode start."""
    if k < 0 or k >= len(episode):
        raise UsageError(f"tick {k} outside episode of length {len(episode)}")
    img_idx = np.clip(np.arange(k - image_horizon + 1, k + 1), 0, None)
    prop_idx = np.clip(np.arange(k - proprio_horizon + 1, k + 1), 0, None)
    return ObsWindow(
        vision=episode.vision[img_idx],
        tactile_left=episode.tactile_left[img_idx],
        tactile_right=episode.tactile_right[img_idx],
        proprio=episode.proprio[prop_idx],
    )


def degrade_tactile(pixels: torch.Tensor, target: int = LOWRES_SIZE) -> torch.Tensor:
    """Mean-pool (N, C, h, w) pads to target resolution, then upsample back."""
    h = pixels.shape[-1]
    if h % target:
        raise UsageError(f"tactile resolution {h} not divisible by {target}")
    factor = h // target
    pooled = fn.avg_pool2d(pixels, factor)
    return fn.interpolate(pooled, scale_factor=float(factor), mode="nearest")


def conditioning_batch(vision: torch.Tensor, tactile: torch.Tensor,
                       proprio: torch.Tensor, vision_encoder, tactile_encoder,
                       variant: Variant) -> torch.Tensor:
    """Batched conditioning with gradients.

    vision: (B, H_img, H, W, 3); tactile: (B, H_img, 2, h, w);
    proprio: (B, H_prop, 4) already normalized. Returns (B, C).
    """
    b, h_img = vision.shape[:2]
    flat = vision.reshape(b * h_img, *vision.shape[2:]).permute(0, 3, 1, 2)
    v_emb = unit_rows(vision_encoder(flat)).reshape(b, h_img, -1)

    if variant == Variant.VISION_ONLY:
        frames = v_emb
    else:
        if tactile_encoder is None:
            raise UsageError(f"variant {variant.value} needs a tactile encoder")
        t_flat = tactile.reshape(b * h_img, *tactile.shape[2:])
        if variant == Variant.VISUOTACTILE_LOWRES:
            t_flat = degrade_tactile(t_flat)
        t_emb = unit_rows(tactile_encoder(t_flat)).reshape(b, h_img, -1)
        frames = torch.cat([v_emb, t_emb], dim=-1)

    return torch.cat([frames.reshape(b, -1), proprio.reshape(b, -1)], dim=-1)


class WindowTooShortError(UsageError):
    """The observation window does not cover the required horizons."""


def build_conditioning(window: ObsWindow, vision_encoder, tactile_encoder,
                       variant: Variant,
                       proprio_normalizer: MinMaxNormalizer | None = None,
                       image_horizon: int = 2,
                       proprio_horizon: int = 2) -> ObsConditioning:
    """Single-window conditioning vector (no gradients)."""
    variant = Variant(variant)
    if window.vision.shape[0] < image_horizon:
        raise WindowTooShortError(
            f"window has {window.vision.shape[0]} image frames, needs {image_horizon}")
    if window.proprio.shape[0] < proprio_horizon:
        raise WindowTooShortError(
            f"window has {window.proprio.shape[0]} proprio frames, needs {proprio_horizon}")
    vision = torch.as_tensor(window.vision, dtype=torch.float32).unsqueeze(0)
    tactile = torch.as_tensor(
        np.stack([window.tactile_left, window.tactile_right], axis=1),
        dtype=torch.float32).unsqueeze(0)
    proprio = np.asarray(window.proprio, dtype=np.float64)
    if proprio_normalizer is not None:
        proprio = proprio_normalizer.normalize(proprio)
    proprio_t = torch.as_tensor(proprio, dtype=torch.float32).unsqueeze(0)
    with torch.no_grad():
        vec = conditioning_batch(vision, tactile, proprio_t,
                                 vision_encoder, tactile_encoder, variant)
    return ObsConditioning(vector=vec.squeeze(0).numpy().astype(np.float32), variant=variant)
