"""Tactile-resolution degradation for the low-res sensing ablation."""

from __future__ import annotations

import numpy as np

from ..errors import UsageError
from ..simworld.types import TactileImage


def downsample_pixels(pixels: np.ndarray, target: int = 16) -> np.ndarray:
    """Mean-pool an (h, w) image to target x target, then nearest-neighbor
    upsample back to the original size."""
    h, w = pixels.shape[-2:]
    if h < target or w < target:
        raise UsageError(f"source resolution {h}x{w} below target {target}")
    if h % target or w % target:
        raise UsageError(f"source resolution {h}x{w} not divisible by {target}")
    fh, fw = h // target, w // target
    pooled = pixels.reshape(*pixels.shape[:-2], target, fh, target, fw).mean(axis=(-3, -1))
    up = np.repeat(np.repeat(pooled, fh, axis=-2), fw, axis=-1)
    return up.astype(pixels.dtype)


def downsample_tactile(image: TactileImage, target: int = 16) -> TactileImage:
    """Degrade a tactile image to the low-res sensor's resolution."""
    return TactileImage(pixels=downsample_pixels(image.pixels, target),
                        finger=image.finger, timestamp=image.timestamp)
