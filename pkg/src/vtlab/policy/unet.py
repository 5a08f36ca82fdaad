"""1-D convolutional encoder-decoder noise predictor over the action axis.

Conditioning (observation features plus a sinusoidal diffusion-step
embedding) is injected at every level through FiLM modulation. Activations
are smooth (Mish) so the loss is finite-difference checkable, and the output
projection starts at zero so the initial training loss sits at the variance
of the target noise.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as fn

TIME_EMBED_DIM = 32


def timestep_embedding(t: torch.Tensor, dim: int = TIME_EMBED_DIM) -> torch.Tensor:
    """Sinusoidal embedding of integer diffusion steps, shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(-math.log(1000.0) * torch.arange(half, dtype=torch.float64) / half)
    args = t.double().reshape(-1, 1) * freqs.reshape(1, -1)
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
    return emb.to(t.device)


class FilmBlock(nn.Module):
    """Two 1-D convolutions with feature-wise modulation from the conditioning."""

    def __init__(self, c_in: int, c_out: int, cond_dim: int):
        super().__init__()
        self.conv1 = nn.Conv1d(c_in, c_out, 3, padding=1)
        self.conv2 = nn.Conv1d(c_out, c_out, 3, padding=1)
        self.norm1 = nn.GroupNorm(min(8, c_out), c_out)
        self.norm2 = nn.GroupNorm(min(8, c_out), c_out)
        self.film = nn.Linear(cond_dim, 2 * c_out)
        self.skip = nn.Conv1d(c_in, c_out, 1) if c_in != c_out else nn.Identity()

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        h = fn.mish(self.norm1(self.conv1(x)))
        scale, shift = self.film(cond).chunk(2, dim=-1)
        h = h * (1.0 + scale.unsqueeze(-1)) + shift.unsqueeze(-1)
        h = fn.mish(self.norm2(self.conv2(h)))
        return h + self.skip(x)


class ConditionalUNet1D(nn.Module):
    """Denoiser epsilon(x_t, t, cond) over (B, action_dim, horizon) chunks."""

    def __init__(self, action_dim: int = 4, cond_dim: int = 520,
                 channels: tuple[int, ...] = (32, 64, 128)):
        super().__init__()
        self.action_dim = action_dim
        self.cond_dim = cond_dim
        full_cond = cond_dim + TIME_EMBED_DIM
        c0, c1, c2 = channels
        self.down1 = FilmBlock(action_dim, c0, full_cond)
        self.down2 = FilmBlock(c0, c1, full_cond)
        self.mid = FilmBlock(c1, c2, full_cond)
        self.up2 = FilmBlock(c2 + c1, c1, full_cond)
        self.up1 = FilmBlock(c1 + c0, c0, full_cond)
        self.out = nn.Conv1d(c0, action_dim, 1)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def forward(self, x: torch.Tensor, t: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        temb = timestep_embedding(t).to(x.dtype)
        if temb.shape[0] == 1 and x.shape[0] > 1:
            temb = temb.expand(x.shape[0], -1)
        c = torch.cat([cond, temb], dim=-1)

        h1 = self.down1(x, c)
        h2 = self.down2(fn.avg_pool1d(h1, 2), c)
        m = self.mid(fn.avg_pool1d(h2, 2), c)
        u2 = self.up2(torch.cat([_up(m), h2], dim=1), c)
        u1 = self.up1(torch.cat([_up(u2), h1], dim=1), c)
        return self.out(u1)


def _up(x: torch.Tensor) -> torch.Tensor:
    return fn.interpolate(x, scale_factor=2.0, mode="nearest")
