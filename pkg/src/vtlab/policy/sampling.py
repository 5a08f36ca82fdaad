"""Deterministic DDIM sampling of action chunks from a trained policy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import NumericalError
from .conditioning import ObsConditioning
from .schedule import ddim_timesteps


@dataclass
class ActionChunk:
    """Horizon-length sequence of denormalized delta-pose actions."""

    actions: np.ndarray  # (horizon, A)
    created_at: float


def ddim_sample(model, cond, steps: int | None = None, seed: int = 0,
                created_at: float = 0.0) -> ActionChunk:
    """Sample one action chunk; fully deterministic given (model, cond, seed).

    Runs the eta = 0 update over a stride-selected subsequence of the training
    schedule, starting from seeded Gaussian noise; predicted clean chunks are
    clipped to the normalized action box at every step.
    """
    steps = model.inference_steps if steps is None else steps
    knots = ddim_timesteps(model.schedule.T, steps)
    if isinstance(cond, ObsConditioning):
        cond = cond.vector
    cond_t = torch.as_tensor(np.asarray(cond), dtype=torch.float32).reshape(1, -1)

    generator = torch.Generator().manual_seed(seed & 0x7FFF_FFFF_FFFF_FFFF)
    x = torch.randn((1, model.unet.action_dim, model.action_horizon), generator=generator)
    alpha_bar = model.schedule.alpha_bar

    with torch.no_grad():
        for t_now, t_next in zip(knots[:-1], knots[1:]):
            ab_now = float(alpha_bar[t_now])
            ab_next = float(alpha_bar[t_next])
            eps_hat = model.unet(x, torch.tensor([int(t_now)]), cond_t)
            x0 = (x - np.sqrt(1.0 - ab_now) * eps_hat) / np.sqrt(ab_now)
            if ab_now >= 1e-2:
                # clamping the clean-chunk estimate stabilizes the tail of the
                # trajectory, but at near-zero signal fraction the 1/sqrt(ab)
                # amplification makes the estimate meaningless and clamping it
                # would erase the information carried forward by x
                x0 = x0.clamp(-1.0, 1.0)
            x = np.sqrt(ab_next) * x0 + np.sqrt(1.0 - ab_next) * eps_hat

    normalized = x.squeeze(0).transpose(0, 1).numpy().astype(np.float64)  # (H, A)
    if not np.all(np.isfinite(normalized)):
        raise NumericalError("sampler produced non-finite actions")
    actions = model.action_normalizer.denormalize(normalized)
    return ActionChunk(actions=actions, created_at=created_at)
