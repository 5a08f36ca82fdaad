"""Multi-rate stream synchronization onto the policy clock.

Independently clocked streams are aligned by matching shared marker IDs
(the offset estimate is the mean timestamp difference over all shared IDs,
which keeps the quantization error strictly below the sum of the two frame
periods), cropped to the start/stop signal window, and resampled onto the
10 Hz policy tick grid with zero-order hold.
"""

from __future__ import annotations

import numpy as np

from .episodes import (
    ACTION,
    STREAM_NAMES,
    AlignedEpisode,
    FrameStream,
    MarkerEvent,
    RawEpisode,
)
from .errors import DataError

_EPS = 1e-9


class NoCommonMarkerError(DataError):
    """The two marker sequences share no marker ID."""


class EmptyCropError(DataError):
    """Cropping by the start/stop signals left a stream empty."""


class MissingFrameError(DataError):
    """A policy tick has no source frame at or before it in some stream."""


def estimate_offset(events_a: list[MarkerEvent], events_b: list[MarkerEvent]) -> float:
    """Offset mapping stream-b timestamps onto stream-a's clock (t_b + offset).

    Uses the first occurrence of every marker ID shared by both streams and
    averages the per-ID timestamp differences.
    """
    first_a: dict[int, float] = {}
    for event in events_a:
        first_a.setdefault(event.marker_id, event.timestamp)
    first_b: dict[int, float] = {}
    for event in events_b:
        first_b.setdefault(event.marker_id, event.timestamp)

    shared = sorted(set(first_a) & set(first_b))
    if not shared:
        raise NoCommonMarkerError("no marker id appears in both streams")
    diffs = [first_a[i] - first_b[i] for i in shared]
    return float(np.mean(diffs))


def offsets_from_markers(episode: RawEpisode) -> dict[str, float]:
    """Per-stream clock corrections estimated from the calibration markers.

    The vision camera is the reference clock; both tactile pads share the
    collector clock observed through the sync-camera marker events.
    """
    tactile = estimate_offset(episode.marker_events["vision"],
                              episode.marker_events["tactile"])
    return {"vision": 0.0, "tactile_left": tactile, "tactile_right": tactile,
            "proprio": 0.0, "action": 0.0}


def crop_by_signals(episode: RawEpisode, offset_map: dict[str, float]) -> RawEpisode:
    """Drop frames outside [start_signal, stop_signal] on the corrected clock."""
    start, stop = episode.start_signal, episode.stop_signal
    if start >= stop:
        raise EmptyCropError(f"degenerate signal interval [{start}, {stop}]")
    missing = [s for s in episode.streams if s not in offset_map]
    if missing:
        raise DataError(f"offset map does not cover streams: {missing}")

    cropped: dict[str, FrameStream] = {}
    for name, stream in episode.streams.items():
        corrected = stream.timestamps + offset_map[name]
        keep = (corrected >= start - _EPS) & (corrected <= stop + _EPS)
        if not np.any(keep):
            raise EmptyCropError(f"stream '{name}' has no frames in [{start}, {stop}]")
        cropped[name] = FrameStream(name=name, rate=stream.rate,
                                    timestamps=stream.timestamps[keep],
                                    data=stream.data[keep])

    return RawEpisode(
        task_id=episode.task_id,
        seed=episode.seed,
        streams=cropped,
        marker_events={},
        start_signal=start,
        stop_signal=stop,
        tracking_failed=episode.tracking_failed,
        injected_offsets=dict(episode.injected_offsets),
    )


def resample_to_policy_clock(episode: RawEpisode, offset_map: dict[str, float],
                             rate: float = 10.0) -> AlignedEpisode:
    """Select, per policy tick, the latest frame at or before the tick.

    Actions are attached by nearest timestamp instead, since each action
    labels the tick it was issued for.
    """
    period = 1.0 / rate
    corrected = {name: stream.timestamps + offset_map[name]
                 for name, stream in episode.streams.items()}

    first_tick = max(int(np.ceil(ts[0] / period - _EPS)) for ts in corrected.values())
    last_tick = min(int(np.floor(ts[-1] / period + _EPS)) for ts in corrected.values())
    if last_tick < first_tick:
        raise MissingFrameError("no policy tick is covered by every stream")
    ticks = np.arange(first_tick, last_tick + 1, dtype=np.float64) * period

    selected: dict[str, np.ndarray] = {}
    staleness: dict[str, np.ndarray] = {}
    for name in STREAM_NAMES:
        ts = corrected[name]
        if name == ACTION:
            idx = np.searchsorted(ts, ticks)
            idx = np.clip(idx, 1, len(ts) - 1) if len(ts) > 1 else np.zeros(len(ticks), int)
            left_closer = np.abs(ticks - ts[np.maximum(idx - 1, 0)]) <= np.abs(ts[idx] - ticks)
            idx = np.where(left_closer, np.maximum(idx - 1, 0), idx)
        else:
            idx = np.searchsorted(ts, ticks + _EPS, side="right") - 1
            if np.any(idx < 0):
                bad = int(np.argmax(idx < 0))
                raise MissingFrameError(
                    f"stream '{name}' has no frame at or before tick {bad} "
                    f"(t={ticks[bad]:.3f})")
            staleness[name] = ticks - ts[idx]
        selected[name] = episode.streams[name].data[idx]

    return AlignedEpisode(
        task_id=episode.task_id,
        seed=episode.seed,
        tick_times=ticks,
        vision=selected["vision"],
        tactile_left=selected["tactile_left"],
        tactile_right=selected["tactile_right"],
        proprio=selected["proprio"],
        action=selected["action"],
        staleness=staleness,
        source_offsets=dict(offset_map),
        tracking_failed=episode.tracking_failed,
    )


def align_episode(episode: RawEpisode, rate: float = 10.0) -> AlignedEpisode:
    """Full synchronization: estimate offsets, crop, and resample."""
    offsets = offsets_from_markers(episode)
    return resample_to_policy_clock(crop_by_signals(episode, offsets), offsets, rate)
