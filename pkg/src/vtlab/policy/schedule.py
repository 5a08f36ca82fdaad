"""Squared-cosine noise schedule and the diffusion forward process."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UsageError


@dataclass
class NoiseSchedule:
    """Cumulative signal fractions alpha_bar[0..T]; alpha_bar[0] == 1."""

    alpha_bar: np.ndarray  # (T+1,) float64, strictly decreasing

    @property
    def T(self) -> int:
        return len(self.alpha_bar) - 1

    @classmethod
    def squared_cosine(cls, steps: int = 50, offset: float = 0.008) -> "NoiseSchedule":
        t = np.arange(steps + 1, dtype=np.float64)
        f = np.cos(((t / steps) + offset) / (1.0 + offset) * np.pi / 2.0) ** 2
        alpha_bar = f / f[0]
        # cap per-step noise so alpha_bar stays strictly positive at t = T
        betas = np.clip(1.0 - alpha_bar[1:] / alpha_bar[:-1], 0.0, 0.999)
        alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
        return cls(alpha_bar=alpha_bar)

    def validate(self) -> None:
        if self.alpha_bar[0] != 1.0:
            raise UsageError("alpha_bar[0] must be 1")
        if not np.all(np.diff(self.alpha_bar) < 0):
            raise UsageError("alpha_bar must be strictly decreasing")
        if self.alpha_bar[-1] <= 0:
            raise UsageError("alpha_bar[T] must stay positive")


def add_noise(chunk: np.ndarray, t: int, schedule: NoiseSchedule,
              rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Forward-noise a normalized chunk at diffusion step t; returns (noised, eps)."""
    if not 1 <= t <= schedule.T:
        raise UsageError(f"diffusion step {t} outside [1, {schedule.T}]")
    chunk = np.asarray(chunk, dtype=np.float64)
    eps = rng.standard_normal(chunk.shape)
    ab = schedule.alpha_bar[t]
    noised = np.sqrt(ab) * chunk + np.sqrt(1.0 - ab) * eps
    return noised, eps


def ddim_timesteps(T: int, steps: int) -> np.ndarray:
    """Strictly decreasing knots from T to 0 selecting a stride subsequence."""
    if steps > T:
        raise UsageError(f"cannot run {steps} inference steps on a {T}-step schedule")
    knots = np.round(np.linspace(T, 0, steps + 1)).astype(np.int64)
    return knots
