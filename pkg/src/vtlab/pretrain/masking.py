"""Patch masking of vision frames for the contrastive pre-training objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UsageError
from ..simworld.types import VisionImage


@dataclass
class PatchMask:
    """Boolean grid over image patches; True marks a zeroed patch."""

    grid: np.ndarray  # (gh, gw) bool
    ratio: float  # drawn masking ratio before rounding to a patch count
    seed: int


def draw_mask(rng: np.random.Generator, grid_shape: tuple[int, int],
              ratio_range: tuple[float, float]) -> tuple[np.ndarray, float]:
    """Sample a patch mask: uniform ratio, then round(ratio * P) patches."""
    lo, hi = ratio_range
    ratio = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
    total = grid_shape[0] * grid_shape[1]
    count = int(np.round(ratio * total))
    grid = np.zeros(total, dtype=bool)
    if count > 0:
        grid[rng.choice(total, size=count, replace=False)] = True
    return grid.reshape(grid_shape), ratio


def apply_mask(pixels: np.ndarray, grid: np.ndarray, patch_size: int) -> np.ndarray:
    """Zero the masked patches of an (H, W, C) or batched (N, H, W, C) array."""
    reps = np.repeat(np.repeat(grid, patch_size, axis=-2), patch_size, axis=-1)
    masked = pixels.copy()
    masked[reps] = 0.0  # boolean index over the leading (.., H, W) axes
    return masked


def mask_patches(image: VisionImage | np.ndarray, ratio_range: tuple[float, float],
                 seed: int, patch_size: int = 8) -> tuple[VisionImage | np.ndarray, PatchMask]:
    """Mask a uniformly drawn fraction of patches; deterministic under seed."""
    pixels = image.pixels if isinstance(image, VisionImage) else image
    h, w = pixels.shape[:2]
    if h % patch_size or w % patch_size:
        raise UsageError(
            f"image dims {h}x{w} are not divisible by patch size {patch_size}")
    rng = np.random.default_rng(seed)
    grid, ratio = draw_mask(rng, (h // patch_size, w // patch_size), ratio_range)
    masked = apply_mask(pixels, grid, patch_size)
    mask = PatchMask(grid=grid, ratio=ratio, seed=seed)
    if isinstance(image, VisionImage):
        return VisionImage(pixels=masked, timestamp=image.timestamp), mask
    return masked, mask
