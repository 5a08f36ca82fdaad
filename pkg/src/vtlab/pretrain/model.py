"""Encoders and fusion head for masked multimodal contrastive pre-training.

The vision trunk (patch embedding followed by a small convolutional stack) is
frozen; only the tactile encoder, the fusion projection, and the temperature
train. The tactile encoder is shared across both finger pads, which enter
stacked channel-wise in LEFT, RIGHT order.
"""

from __future__ import annotations

import enum
import math
import zlib
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from ..errors import UsageError


class Role(str, enum.Enum):
    V_CURRENT_MASKED = "v_current_masked"
    V_NEXT = "v_next"
    T = "t"
    F = "f"


@dataclass
class EmbeddingBatch:
    """Unit-normalized embedding rows with their contrastive role."""

    vectors: np.ndarray  # (N, D)
    role: Role


def unit_rows(x: torch.Tensor, eps: float = 1e-12) -> torch.Tensor:
    return x / x.norm(dim=-1, keepdim=True).clamp_min(eps)


class SpatialSoftmax(nn.Module):
    """Per-channel expected feature coordinates in [-1, 1].

    Keypoint pooling keeps positional information in a form a linear head can
    read, which matters here because encoders start from random weights.
    """

    def __init__(self, height: int, width: int, beta: float = 5.0):
        super().__init__()
        ys, xs = torch.meshgrid(torch.linspace(-1.0, 1.0, height),
                                torch.linspace(-1.0, 1.0, width), indexing="ij")
        self.register_buffer("xs", xs.flatten())
        self.register_buffer("ys", ys.flatten())
        self.beta = beta

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        attn = torch.softmax(x.flatten(2) * self.beta, dim=-1)
        return torch.cat([attn @ self.xs.to(x.dtype), attn @ self.ys.to(x.dtype)], dim=-1)


class _StandardizedEncoder(nn.Module):
    """Base class holding frozen output-standardization statistics.

    A randomly initialized encoder emits outputs dominated by a constant
    offset; after unit normalization every input collapses onto nearly the
    same direction, which starves any cosine-similarity objective. Centering
    and rescaling by statistics taken once over reference data (part of
    initialization, frozen afterwards) restores spread on the sphere.
    """

    def __init__(self, embed_dim: int):
        super().__init__()
        self.register_buffer("out_center", torch.zeros(embed_dim))
        self.register_buffer("out_scale", torch.ones(embed_dim))

    def calibrate(self, reference: torch.Tensor) -> None:
        """Freeze output statistics from a reference batch of inputs."""
        with torch.no_grad():
            raw = self._features(reference)
            center = raw.mean(dim=0)
            std = (raw - center).std(dim=0)
            floor = 0.1 * std.mean().clamp_min(1e-8)
            self.out_center.copy_(center)
            self.out_scale.copy_(std.clamp_min(floor))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        raw = self._features(x)
        return (raw - self.out_center.to(raw.dtype)) / self.out_scale.to(raw.dtype)


class VisionEncoder(_StandardizedEncoder):
    """Patch embedding, a small convolutional trunk, and a keypoint head."""

    def __init__(self, res: int = 64, patch_size: int = 8, embed_dim: int = 128):
        super().__init__(embed_dim)
        if res % patch_size:
            raise UsageError(f"resolution {res} not divisible by patch size {patch_size}")
        grid = res // patch_size
        self.patch_embed = nn.Conv2d(3, 32, kernel_size=patch_size, stride=patch_size)
        self.trunk = nn.Conv2d(32, 64, 3, stride=1, padding=1)
        self.pool = SpatialSoftmax(grid, grid)
        self.head = nn.Linear(64 * 3, embed_dim)

    def _features(self, x: torch.Tensor) -> torch.Tensor:
        h = torch.relu(self.trunk(torch.relu(self.patch_embed(x))))
        feats = torch.cat([self.pool(h), h.mean(dim=(2, 3))], dim=-1)
        return self.head(feats)


class TactileEncoder(_StandardizedEncoder):
    """Shared encoder over the two stacked finger-pad images, output D."""

    def __init__(self, res: int = 32, embed_dim: int = 128):
        super().__init__(embed_dim)
        self.conv1 = nn.Conv2d(2, 16, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(16, 32, 3, stride=1, padding=1)
        self.pool = SpatialSoftmax(res // 2, res // 2)
        self.head = nn.Linear(32 * 3, embed_dim)

    def _features(self, x: torch.Tensor) -> torch.Tensor:
        h = torch.relu(self.conv2(torch.relu(self.conv1(x))))
        feats = torch.cat([self.pool(h), h.mean(dim=(2, 3))], dim=-1)
        return self.head(feats)


class FusionHead(nn.Module):
    """Projects the concatenated [V_current ; T] embedding back to D dims."""

    def __init__(self, embed_dim: int = 128):
        super().__init__()
        self.proj = nn.Linear(2 * embed_dim, embed_dim)

    def forward(self, v: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        return self.proj(torch.cat([v, t], dim=-1))


class ReprModel(nn.Module):
    """Frozen vision trunk, trainable tactile encoder + fusion + temperature."""

    def __init__(self, embed_dim: int = 128, patch_size: int = 8,
                 vision_res: int = 64, tactile_res: int = 32,
                 temperature_init: float = 0.07,
                 temperature_clamp: tuple[float, float] = (0.01, 100.0)):
        super().__init__()
        self.embed_dim = embed_dim
        self.patch_size = patch_size
        self.vision_res = vision_res
        self.tactile_res = tactile_res
        self.temperature_clamp = temperature_clamp
        self.vision_encoder = VisionEncoder(vision_res, patch_size, embed_dim)
        self.tactile_encoder = TactileEncoder(tactile_res, embed_dim)
        self.fusion = FusionHead(embed_dim)
        self.log_tau = nn.Parameter(torch.tensor(math.log(temperature_init)))
        self.vision_encoder.requires_grad_(False)

    @property
    def tau(self) -> torch.Tensor:
        lo, hi = self.temperature_clamp
        return self.log_tau.clamp(math.log(lo), math.log(hi)).exp()

    def calibrate_encoders(self, vision_pixels: torch.Tensor,
                           tactile_pixels: torch.Tensor) -> None:
        """Freeze both encoders' output statistics on reference frames.

        vision_pixels: (N, H, W, 3); tactile_pixels: (N, 2, h, w).
        """
        self.vision_encoder.calibrate(vision_pixels.permute(0, 3, 1, 2))
        self.tactile_encoder.calibrate(tactile_pixels)

    def clamp_temperature(self) -> None:
        lo, hi = self.temperature_clamp
        with torch.no_grad():
            self.log_tau.clamp_(math.log(lo), math.log(hi))

    def embed_vision(self, pixels: torch.Tensor) -> torch.Tensor:
        """Unit embeddings of (N, H, W, 3) pixels; no encoder gradients."""
        with torch.no_grad():
            return unit_rows(self.vision_encoder(pixels.permute(0, 3, 1, 2)))

    def embed_tactile(self, pixels: torch.Tensor) -> torch.Tensor:
        """Unit embeddings of (N, 2, h, w) stacked LEFT,RIGHT pad images."""
        return unit_rows(self.tactile_encoder(pixels))

    def fuse_embeddings(self, v: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        return unit_rows(self.fusion(v, t))


def _as_tensor(images, dtype=torch.float32) -> torch.Tensor:
    if isinstance(images, torch.Tensor):
        return images.to(dtype)
    return torch.as_tensor(np.asarray(images), dtype=dtype)


def encode(model: ReprModel, images, role: Role) -> EmbeddingBatch:
    """Encode a batch of images for a contrastive role; rows are unit norm."""
    x = _as_tensor(images)
    if role in (Role.V_CURRENT_MASKED, Role.V_NEXT):
        if x.ndim != 4 or x.shape[-1] != 3 or x.shape[1] != model.vision_res:
            raise UsageError(f"vision batch must be (N, {model.vision_res}, "
                             f"{model.vision_res}, 3), got {tuple(x.shape)}")
        vectors = model.embed_vision(x)
    elif role == Role.T:
        if x.ndim != 4 or x.shape[1] != 2 or x.shape[2] != model.tactile_res:
            raise UsageError(f"tactile batch must be (N, 2, {model.tactile_res}, "
                             f"{model.tactile_res}), got {tuple(x.shape)}")
        vectors = model.embed_tactile(x).detach()
    else:
        raise UsageError(f"encode() does not produce role {role}")
    return EmbeddingBatch(vectors=vectors.cpu().numpy(), role=role)


def fuse(model: ReprModel, v_current: EmbeddingBatch, t: EmbeddingBatch) -> EmbeddingBatch:
    """Fuse masked-vision and tactile embedding batches into F."""
    if v_current.vectors.shape[0] != t.vectors.shape[0]:
        raise UsageError(f"batch size mismatch: {v_current.vectors.shape[0]} vision "
                         f"vs {t.vectors.shape[0]} tactile rows")
    with torch.no_grad():
        fused = model.fuse_embeddings(_as_tensor(v_current.vectors), _as_tensor(t.vectors))
    return EmbeddingBatch(vectors=fused.cpu().numpy(), role=Role.F)


def vision_param_checksum(model: ReprModel) -> int:
    """CRC32 over the frozen vision trunk's parameters, for freeze audits."""
    crc = 0
    for name, param in sorted(model.vision_encoder.state_dict().items()):
        crc = zlib.crc32(param.detach().cpu().numpy().tobytes(), crc)
    return crc & 0xFFFFFFFF
