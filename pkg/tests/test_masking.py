"""Patch masking: ratios, determinism, coverage."""

from __future__ import annotations

import numpy as np
import pytest

from vtlab.errors import UsageError
from vtlab.pretrain import mask_patches
from vtlab.simworld import VisionImage


@pytest.fixture
def image():
    rng = np.random.default_rng(1)
    return rng.uniform(0.1, 1.0, size=(64, 64, 3)).astype(np.float32)


def test_zero_ratio_is_identity(image):
    masked, mask = mask_patches(image, (0.0, 0.0), seed=0)
    assert np.array_equal(masked, image)
    assert not mask.grid.any()


def test_masked_count_in_range_for_1000_seeds(image):
    counts = []
    for seed in range(1000):
        _, mask = mask_patches(image, (0.5, 0.75), seed=seed)
        counts.append(int(mask.grid.sum()))
    counts = np.array(counts)
    assert counts.min() >= 32 and counts.max() <= 48
    fractions = counts / 64.0
    assert np.all(fractions >= 0.5) and np.all(fractions <= 0.75)


def test_every_patch_masked_at_least_once(image):
    hit = np.zeros((8, 8), dtype=bool)
    for seed in range(1000):
        _, mask = mask_patches(image, (0.5, 0.75), seed=seed)
        hit |= mask.grid
    assert hit.all()


def test_deterministic_under_seed(image):
    a_img, a_mask = mask_patches(image, (0.5, 0.75), seed=77)
    b_img, b_mask = mask_patches(image, (0.5, 0.75), seed=77)
    assert np.array_equal(a_img, b_img)
    assert np.array_equal(a_mask.grid, b_mask.grid)


def test_masked_patches_are_zero(image):
    masked, mask = mask_patches(image, (0.5, 0.5), seed=3)
    for gy, gx in zip(*np.nonzero(mask.grid)):
        block = masked[gy * 8:(gy + 1) * 8, gx * 8:(gx + 1) * 8]
        assert np.all(block == 0.0)
    for gy, gx in zip(*np.nonzero(~mask.grid)):
        block = masked[gy * 8:(gy + 1) * 8, gx * 8:(gx + 1) * 8]
        assert np.array_equal(block, image[gy * 8:(gy + 1) * 8, gx * 8:(gx + 1) * 8])


def test_vision_image_wrapper_preserved(image):
    wrapped = VisionImage(pixels=image, timestamp=1.5)
    masked, _ = mask_patches(wrapped, (0.5, 0.75), seed=0)
    assert isinstance(masked, VisionImage)
    assert masked.timestamp == 1.5


def test_indivisible_dims_rejected():
    with pytest.raises(UsageError):
        mask_patches(np.zeros((60, 60, 3), np.float32), (0.5, 0.75), seed=0)
