"""Diffusion-policy behavior cloning on aligned, validity-filtered episodes.

Action chunks are consecutive policy-tick windows (stride 1); windows that
run past the episode end repeat the final action and carry a padded flag.
The denoiser trains on the standard noise-prediction objective with
uniformly sampled diffusion steps; observation encoders fine-tune at a
reduced learning rate unless frozen.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from ..checkpoints import load_checkpoint, save_checkpoint
from ..config import PolicyConfig
from ..episodes import AlignedEpisode
from ..errors import DataError, NumericalError
from ..pretrain.model import ReprModel, TactileEncoder, VisionEncoder
from ..seeding import child_rng, torch_seed
from .conditioning import Variant, conditioning_batch, conditioning_dim
from .normalizer import MinMaxNormalizer
from .schedule import NoiseSchedule
from .unet import ConditionalUNet1D

logger = logging.getLogger(__name__)

ACTION_DIM = 4


class EmptyDatasetError(DataError):
    """No training windows available."""


class _Ema:
    """Exponential moving average of module parameters; evaluation weights."""

    def __init__(self, modules: list[nn.Module], decay: float = 0.999):
        self.decay = decay
        self.modules = [m for m in modules if m is not None]
        self.shadow = [{k: v.detach().clone() for k, v in m.state_dict().items()}
                       for m in self.modules]

    @torch.no_grad()
    def update(self) -> None:
        for module, shadow in zip(self.modules, self.shadow):
            for key, value in module.state_dict().items():
                if value.dtype.is_floating_point:
                    shadow[key].mul_(self.decay).add_(value, alpha=1.0 - self.decay)
                else:
                    shadow[key].copy_(value)

    @torch.no_grad()
    def copy_into_modules(self) -> None:
        for module, shadow in zip(self.modules, self.shadow):
            module.load_state_dict(shadow)

    @torch.no_grad()
    def swapped(self):
        """Context manager: modules temporarily hold the EMA weights."""
        import contextlib

        @contextlib.contextmanager
        def ctx():
            backups = [{k: v.detach().clone() for k, v in m.state_dict().items()}
                       for m in self.modules]
            self.copy_into_modules()
            try:
                yield
            finally:
                for module, backup in zip(self.modules, backups):
                    module.load_state_dict(backup)

        return ctx()


@dataclass
class PolicyModel:
    """Trained denoiser plus its encoders, normalizers, and schedule."""

    variant: Variant
    unet: ConditionalUNet1D
    vision_encoder: VisionEncoder
    tactile_encoder: TactileEncoder | None
    action_normalizer: MinMaxNormalizer
    proprio_normalizer: MinMaxNormalizer
    schedule: NoiseSchedule
    embed_dim: int
    action_horizon: int = 16
    image_obs_horizon: int = 2
    proprio_obs_horizon: int = 2
    inference_steps: int = 16
    loss_history: np.ndarray | None = field(default=None, repr=False)

    @property
    def cond_dim(self) -> int:
        return conditioning_dim(self.variant, self.embed_dim,
                                self.image_obs_horizon, self.proprio_obs_horizon)


@dataclass
class _Windows:
    episodes: list[AlignedEpisode]
    index: np.ndarray  # (n, 2) of (episode, tick)
    horizon: int
    padded: np.ndarray  # (n,) bool

    def __len__(self) -> int:
        return len(self.index)


def build_windows(episodes: list[AlignedEpisode], horizon: int) -> _Windows:
    index = []
    padded = []
    for i, ep in enumerate(episodes):
        n = len(ep)
        for k in range(n):
            index.append((i, k))
            padded.append(k + horizon > n)
    if not index:
        raise EmptyDatasetError("no action-chunk windows in the dataset")
    return _Windows(episodes=episodes, index=np.array(index, dtype=np.int64),
                    horizon=horizon, padded=np.array(padded, dtype=bool))


def gather_chunk(episode: AlignedEpisode, k: int, horizon: int) -> np.ndarray:
    """Action chunk starting at tick k, padded by repeating the final action."""
    chunk = episode.action[k:k + horizon]
    if len(chunk) < horizon:
        pad = np.repeat(chunk[-1:], horizon - len(chunk), axis=0)
        chunk = np.concatenate([chunk, pad], axis=0)
    return chunk


def _gather_batch(windows: _Windows, picks: np.ndarray, image_horizon: int,
                  proprio_horizon: int):
    eps = windows.episodes
    vision, tactile, proprio, chunks = [], [], [], []
    for i, k in picks:
        ep = eps[i]
        img_idx = np.clip(np.arange(k - image_horizon + 1, k + 1), 0, None)
        prop_idx = np.clip(np.arange(k - proprio_horizon + 1, k + 1), 0, None)
        vision.append(ep.vision[img_idx])
        tactile.append(np.stack([ep.tactile_left[img_idx], ep.tactile_right[img_idx]],
                                axis=1))
        proprio.append(ep.proprio[prop_idx])
        chunks.append(gather_chunk(ep, k, windows.horizon))
    return (np.stack(vision), np.stack(tactile), np.stack(proprio),
            np.stack(chunks).astype(np.float64))


def init_encoders(repr_model: ReprModel, variant: Variant, seed: int
                  ) -> tuple[VisionEncoder, TactileEncoder | None]:
    """Per-variant encoder initialization from the shared representation model."""
    vision = copy.deepcopy(repr_model.vision_encoder)
    vision.requires_grad_(True)
    if variant == Variant.VISION_ONLY:
        return vision, None
    if variant == Variant.VISUOTACTILE_SCRATCH:
        torch.manual_seed(torch_seed(seed, "scratch-tactile"))
        return vision, TactileEncoder(repr_model.tactile_res, repr_model.embed_dim)
    return vision, copy.deepcopy(repr_model.tactile_encoder)


def train_policy(episodes: list[AlignedEpisode], repr_model: ReprModel,
                 variant: Variant | str, cfg: PolicyConfig | None = None,
                 seed: int = 0, out_dir: str | Path | None = None,
                 checkpoint_epochs: tuple[int, ...] = ()) -> PolicyModel:
    """Clone the demonstrations into a conditional denoiser for one variant."""
    cfg = cfg or PolicyConfig()
    variant = Variant(variant)
    if not episodes:
        raise EmptyDatasetError("cannot train a policy on an empty dataset")

    windows = build_windows(episodes, cfg.action_horizon)
    action_normalizer = MinMaxNormalizer.fit(np.concatenate([ep.action for ep in episodes]))
    proprio_normalizer = MinMaxNormalizer.fit(np.concatenate([ep.proprio for ep in episodes]))
    schedule = NoiseSchedule.squared_cosine(cfg.train_diffusion_steps, cfg.schedule_offset)

    rng = child_rng(seed, "policy", variant.value)
    torch.manual_seed(torch_seed(seed, "policy", variant.value))
    vision_encoder, tactile_encoder = init_encoders(repr_model, variant, seed)
    if variant == Variant.VISUOTACTILE_SCRATCH:
        # the fresh encoder needs the same init-time output standardization
        # the pre-trained one received
        frames = [(i, k) for i, ep in enumerate(episodes) for k in range(len(ep))]
        picks = rng.choice(len(frames), size=min(512, len(frames)), replace=False)
        sample = np.stack([
            np.stack([episodes[frames[p][0]].tactile_left[frames[p][1]],
                      episodes[frames[p][0]].tactile_right[frames[p][1]]])
            for p in picks])
        tactile_encoder.calibrate(torch.as_tensor(sample))
    torch.manual_seed(torch_seed(seed, "policy-unet", variant.value))
    unet = ConditionalUNet1D(
        action_dim=ACTION_DIM,
        cond_dim=conditioning_dim(variant, repr_model.embed_dim,
                                  cfg.image_obs_horizon, cfg.proprio_obs_horizon),
        channels=cfg.unet_channels)

    groups = [{"params": list(unet.parameters()), "lr": cfg.learning_rate}]
    if not cfg.freeze_vision_encoder:
        groups.append({"params": list(vision_encoder.parameters()),
                       "lr": cfg.encoder_learning_rate})
    else:
        vision_encoder.requires_grad_(False)
    if tactile_encoder is not None:
        if not cfg.freeze_tactile_encoder:
            groups.append({"params": list(tactile_encoder.parameters()),
                           "lr": cfg.encoder_learning_rate})
        else:
            tactile_encoder.requires_grad_(False)
    optimizer = torch.optim.AdamW(groups, betas=(cfg.adam_beta1, cfg.adam_beta2),
                                  weight_decay=cfg.weight_decay)

    steps_per_epoch = math.ceil(len(windows) / cfg.batch_size)
    total_steps = max(cfg.epochs * steps_per_epoch, 1)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda s: 0.5 * (1.0 + math.cos(math.pi * s / total_steps)))

    alpha_bar = torch.as_tensor(schedule.alpha_bar, dtype=torch.float32)
    model = PolicyModel(
        variant=variant, unet=unet, vision_encoder=vision_encoder,
        tactile_encoder=tactile_encoder, action_normalizer=action_normalizer,
        proprio_normalizer=proprio_normalizer, schedule=schedule,
        embed_dim=repr_model.embed_dim, action_horizon=cfg.action_horizon,
        image_obs_horizon=cfg.image_obs_horizon,
        proprio_obs_horizon=cfg.proprio_obs_horizon,
        inference_steps=cfg.inference_steps)

    ema = _Ema([unet, vision_encoder, tactile_encoder], decay=cfg.ema_decay)
    loss_history: list[float] = []
    wanted_epochs = set(int(e) for e in checkpoint_epochs)
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(windows))
        for start in range(0, len(order), cfg.batch_size):
            picks = windows.index[order[start:start + cfg.batch_size]]
            vision, tactile, proprio, chunks = _gather_batch(
                windows, picks, cfg.image_obs_horizon, cfg.proprio_obs_horizon)

            cond = conditioning_batch(
                torch.as_tensor(vision), torch.as_tensor(tactile),
                torch.as_tensor(proprio_normalizer.normalize(proprio), dtype=torch.float32),
                vision_encoder, tactile_encoder, variant)

            x0 = torch.as_tensor(action_normalizer.normalize(chunks),
                                 dtype=torch.float32).transpose(1, 2)  # (B, A, H)
            b = x0.shape[0]
            t = torch.randint(1, schedule.T + 1, (b,))
            eps = torch.randn_like(x0)
            ab = alpha_bar[t].reshape(-1, 1, 1)
            noised = ab.sqrt() * x0 + (1.0 - ab).sqrt() * eps

            pred = unet(noised, t, cond)
            loss = torch.mean((pred - eps) ** 2)
            if not torch.isfinite(loss):
                raise NumericalError(
                    f"non-finite policy loss at epoch {epoch}, step {len(loss_history)}")
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(
                [p for g in groups for p in g["params"]], 5.0)
            optimizer.step()
            scheduler.step()
            ema.update()
            loss_history.append(float(loss.detach()))

        if (epoch + 1) in wanted_epochs and out_dir is not None:
            model.loss_history = np.array(loss_history, dtype=np.float32)
            with ema.swapped():
                save_policy_checkpoint(
                    model,
                    Path(out_dir) / f"policy_{variant.value}_epoch{epoch + 1:03d}.ckpt",
                    epoch=epoch + 1)
        if (epoch + 1) % 10 == 0 or epoch == cfg.epochs - 1:
            recent = float(np.mean(loss_history[-steps_per_epoch:]))
            logger.info("policy %s epoch %d/%d loss %.4f",
                        variant.value, epoch + 1, cfg.epochs, recent)

    ema.copy_into_modules()  # the averaged weights are the evaluation weights
    model.loss_history = np.array(loss_history, dtype=np.float32)
    if out_dir is not None:
        save_policy_checkpoint(model, Path(out_dir) / f"policy_{variant.value}.ckpt",
                               epoch=cfg.epochs)
    return model


def save_policy_checkpoint(model: PolicyModel, path: str | Path, epoch: int) -> None:
    header = {
        "variant": model.variant.value,
        "embed_dim": model.embed_dim,
        "action_horizon": model.action_horizon,
        "image_obs_horizon": model.image_obs_horizon,
        "proprio_obs_horizon": model.proprio_obs_horizon,
        "inference_steps": model.inference_steps,
        "train_diffusion_steps": model.schedule.T,
        "epoch": int(epoch),
    }
    blobs: dict[str, np.ndarray] = {
        "norm/action_lo": model.action_normalizer.lo,
        "norm/action_hi": model.action_normalizer.hi,
        "norm/proprio_lo": model.proprio_normalizer.lo,
        "norm/proprio_hi": model.proprio_normalizer.hi,
        "schedule/alpha_bar": model.schedule.alpha_bar,
    }
    for prefix, module in (("unet", model.unet), ("vision_encoder", model.vision_encoder),
                           ("tactile_encoder", model.tactile_encoder)):
        if module is None:
            continue
        for name, param in module.state_dict().items():
            blobs[f"{prefix}.{name}"] = param.detach().cpu().numpy()
    if model.loss_history is not None:
        blobs["loss_history"] = np.asarray(model.loss_history, dtype=np.float32)
    save_checkpoint(path, "policy", header, blobs)


def load_policy_checkpoint(path: str | Path, unet_channels: tuple[int, ...] = (32, 64, 128),
                           ) -> PolicyModel:
    header, blobs = load_checkpoint(path, expect_kind="policy")
    variant = Variant(header["variant"])
    embed_dim = header["embed_dim"]

    def module_state(prefix: str) -> dict[str, torch.Tensor]:
        p = prefix + "."
        return {name[len(p):]: torch.as_tensor(arr)
                for name, arr in blobs.items() if name.startswith(p)}

    vision_state = module_state("vision_encoder")
    patch = vision_state["patch_embed.weight"].shape[-1]
    grid = int(round(math.sqrt(vision_state["pool.xs"].numel())))
    vision_encoder = VisionEncoder(patch * grid, patch, embed_dim)
    vision_encoder.load_state_dict(vision_state)

    tactile_encoder = None
    tactile_state = module_state("tactile_encoder")
    if tactile_state:
        tactile_res = 2 * int(round(math.sqrt(tactile_state["pool.xs"].numel())))
        tactile_encoder = TactileEncoder(tactile_res, embed_dim)
        tactile_encoder.load_state_dict(tactile_state)

    unet = ConditionalUNet1D(
        action_dim=ACTION_DIM,
        cond_dim=conditioning_dim(variant, embed_dim, header["image_obs_horizon"],
                                  header["proprio_obs_horizon"]),
        channels=unet_channels)
    unet.load_state_dict(module_state("unet"))

    return PolicyModel(
        variant=variant, unet=unet, vision_encoder=vision_encoder,
        tactile_encoder=tactile_encoder,
        action_normalizer=MinMaxNormalizer(blobs["norm/action_lo"], blobs["norm/action_hi"]),
        proprio_normalizer=MinMaxNormalizer(blobs["norm/proprio_lo"],
                                            blobs["norm/proprio_hi"]),
        schedule=NoiseSchedule(alpha_bar=blobs["schedule/alpha_bar"]),
        embed_dim=embed_dim,
        action_horizon=header["action_horizon"],
        image_obs_horizon=header["image_obs_horizon"],
        proprio_obs_horizon=header["proprio_obs_horizon"],
        inference_steps=header["inference_steps"],
        loss_history=blobs.get("loss_history"),
    )
