"""Contrastive pre-training loop for the tactile encoder.

Triples (masked current vision, current tactile pair, next vision) are drawn
at the policy clock across all tasks jointly, including episodes whose pose
tracking failed: the objective needs no action labels. The vision trunk stays
frozen; the tactile encoder, fusion projection, and temperature train with
AdamW under cosine decay.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np
import torch

from ..checkpoints import load_checkpoint, save_checkpoint
from ..config import ReprConfig
from ..episodes import AlignedEpisode
from ..errors import DataError, NumericalError
from ..seeding import child_rng, torch_seed
from .loss import clip_loss
from .masking import apply_mask, draw_mask
from .model import ReprModel, vision_param_checksum

logger = logging.getLogger(__name__)


class EmptyDatasetError(DataError):
    """No usable training pairs in the dataset."""


def _triple_index(episodes: list[AlignedEpisode]) -> np.ndarray:
    pairs = [(i, k) for i, ep in enumerate(episodes) for k in range(len(ep) - 1)]
    if not pairs:
        raise EmptyDatasetError("no (current, next) frame pairs to pre-train on")
    return np.array(pairs, dtype=np.int64)


def _batch_masks(rng: np.random.Generator, batch: int, grid: int,
                 ratio_range: tuple[float, float]) -> np.ndarray:
    total = grid * grid
    lo, hi = ratio_range
    ratios = rng.uniform(lo, hi, size=batch) if hi > lo else np.full(batch, lo)
    counts = np.round(ratios * total).astype(np.int64)
    ranks = np.argsort(rng.random((batch, total)), axis=1)
    sel = np.arange(total)[None, :] < counts[:, None]
    flat = np.zeros((batch, total), dtype=bool)
    np.put_along_axis(flat, ranks, sel, axis=1)
    return flat.reshape(batch, grid, grid)


def _calibration_frames(episodes: list[AlignedEpisode], rng: np.random.Generator,
                        count: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Reference frames for the init-time encoder output standardization."""
    frames = [(i, k) for i, ep in enumerate(episodes) for k in range(len(ep))]
    picks = rng.choice(len(frames), size=min(count, len(frames)), replace=False)
    vision = np.stack([episodes[frames[p][0]].vision[frames[p][1]] for p in picks])
    tactile = np.stack([
        np.stack([episodes[frames[p][0]].tactile_left[frames[p][1]],
                  episodes[frames[p][0]].tactile_right[frames[p][1]]]) for p in picks])
    return vision, tactile


def _precompute_next_embeddings(model: ReprModel, episodes: list[AlignedEpisode],
                                chunk: int = 512) -> list[torch.Tensor]:
    out = []
    for ep in episodes:
        embs = []
        for start in range(0, len(ep), chunk):
            pixels = torch.as_tensor(ep.vision[start:start + chunk])
            embs.append(model.embed_vision(pixels))
        out.append(torch.cat(embs) if embs else torch.zeros((0, model.embed_dim)))
    return out


def pretrain(episodes: list[AlignedEpisode], cfg: ReprConfig | None = None,
             seed: int = 0, out_dir: str | Path | None = None) -> ReprModel:
    """Train the tactile encoder; returns the model with `loss_history` set."""
    cfg = cfg or ReprConfig()
    index = _triple_index(episodes)
    rng = child_rng(seed, "pretrain")
    torch.manual_seed(torch_seed(seed, "pretrain"))

    res = episodes[0].vision.shape[1]
    tactile_res = episodes[0].tactile_left.shape[1]
    model = ReprModel(embed_dim=cfg.embed_dim, patch_size=cfg.patch_size,
                      vision_res=res, tactile_res=tactile_res,
                      temperature_init=cfg.temperature_init,
                      temperature_clamp=(cfg.temperature_min, cfg.temperature_max))
    if cfg.vision_weights:
        _load_vision_trunk(model, cfg.vision_weights)
    else:
        vision_ref, tactile_ref = _calibration_frames(episodes, rng)
        model.calibrate_encoders(torch.as_tensor(vision_ref), torch.as_tensor(tactile_ref))

    model.vision_checksum_at_init = vision_param_checksum(model)
    trainable = list(model.tactile_encoder.parameters()) + list(model.fusion.parameters())
    optimizer = torch.optim.AdamW(
        [{"params": trainable, "weight_decay": cfg.weight_decay},
         {"params": [model.log_tau], "weight_decay": 0.0}],
        lr=cfg.learning_rate, betas=(cfg.adam_beta1, cfg.adam_beta2))
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda s: 0.5 * (1.0 + math.cos(math.pi * s / max(cfg.steps, 1))))

    next_embeddings = _precompute_next_embeddings(model, episodes)
    grid = res // cfg.patch_size
    loss_history: list[float] = []
    last_good: Path | None = None

    def save(path_name: str, step: int) -> Path | None:
        if out_dir is None:
            return None
        path = Path(out_dir) / path_name
        save_repr_checkpoint(model, path, step=step,
                             loss_history=np.array(loss_history, dtype=np.float32))
        return path

    for step in range(cfg.steps):
        picks = index[rng.integers(0, len(index), size=cfg.batch_size)]
        vision = np.stack([episodes[i].vision[k] for i, k in picks])
        tactile = np.stack([
            np.stack([episodes[i].tactile_left[k], episodes[i].tactile_right[k]])
            for i, k in picks])
        v_next = torch.stack([next_embeddings[i][k + 1] for i, k in picks])

        masks = _batch_masks(rng, cfg.batch_size, grid, cfg.mask_ratio)
        masked = apply_mask(vision, masks, cfg.patch_size)

        v_cur = model.embed_vision(torch.as_tensor(masked))
        t_cur = model.embed_tactile(torch.as_tensor(tactile))
        fused = model.fuse_embeddings(v_cur, t_cur)
        loss = clip_loss(fused, v_next, model.tau)

        if not torch.isfinite(loss):
            fallback = last_good or save("repr_abort.ckpt", step)
            raise NumericalError(
                f"non-finite pre-training loss at step {step}; "
                f"last good checkpoint: {fallback}")

        optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(trainable + [model.log_tau], 5.0)
        optimizer.step()
        scheduler.step()
        model.clamp_temperature()
        loss_history.append(float(loss.detach()))

        if out_dir is not None and cfg.checkpoint_every > 0 \
                and (step + 1) % cfg.checkpoint_every == 0:
            last_good = save(f"repr_step{step + 1:06d}.ckpt", step + 1)

    model.loss_history = np.array(loss_history, dtype=np.float32)
    save("repr_final.ckpt", cfg.steps)
    return model


def save_repr_checkpoint(model: ReprModel, path: str | Path, step: int,
                         loss_history: np.ndarray | None = None) -> None:
    header = {
        "embed_dim": model.embed_dim,
        "patch_size": model.patch_size,
        "vision_res": model.vision_res,
        "tactile_res": model.tactile_res,
        "temperature_clamp": list(model.temperature_clamp),
        "tau": float(model.tau.detach()),
        "step": int(step),
    }
    blobs = {name: p.detach().cpu().numpy() for name, p in model.state_dict().items()}
    if loss_history is not None:
        blobs["loss_history"] = np.asarray(loss_history, dtype=np.float32)
    save_checkpoint(path, "repr", header, blobs)


def load_repr_checkpoint(path: str | Path) -> ReprModel:
    header, blobs = load_checkpoint(path, expect_kind="repr")
    model = ReprModel(embed_dim=header["embed_dim"], patch_size=header["patch_size"],
                      vision_res=header["vision_res"], tactile_res=header["tactile_res"],
                      temperature_clamp=tuple(header["temperature_clamp"]))
    loss_history = blobs.pop("loss_history", None)
    state = {name: torch.as_tensor(arr) for name, arr in blobs.items()}
    model.load_state_dict(state)
    model.loss_history = loss_history
    model.vision_encoder.requires_grad_(False)
    return model


def _load_vision_trunk(model: ReprModel, path: str | Path) -> None:
    """Initialize the frozen vision trunk from an external repr checkpoint."""
    header, blobs = load_checkpoint(path, expect_kind="repr")
    prefix = "vision_encoder."
    state = {name[len(prefix):]: torch.as_tensor(arr)
             for name, arr in blobs.items() if name.startswith(prefix)}
    if not state:
        raise DataError(f"{path}: no vision trunk parameters found")
    model.vision_encoder.load_state_dict(state)
    logger.info("loaded vision trunk weights from %s", path)
