"""Episode containers: raw multi-rate recordings and aligned frame sequences."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

# canonical stream names used throughout the pipeline
VISION = "vision"
TACTILE_LEFT = "tactile_left"
TACTILE_RIGHT = "tactile_right"
PROPRIO = "proprio"
ACTION = "action"

STREAM_NAMES = (VISION, TACTILE_LEFT, TACTILE_RIGHT, PROPRIO, ACTION)


@dataclass
class MarkerEvent:
    """One calibration-marker detection on a stream-local clock."""

    marker_id: int
    timestamp: float


@dataclass
class FrameStream:
    """Timestamped frame sequence from one sensor at a fixed rate."""

    name: str
    rate: float
    timestamps: np.ndarray  # (n,) float64, stream-local clock
    data: np.ndarray  # (n, *frame_shape) float32

    def __len__(self) -> int:
        return len(self.timestamps)

    def validate(self) -> None:
        if len(self.timestamps) != len(self.data):
            raise DataError(f"stream '{self.name}': {len(self.timestamps)} timestamps "
                            f"vs {len(self.data)} frames")
        if len(self.timestamps) > 1:
            dt = np.diff(self.timestamps)
            if not np.all(dt > 0):
                raise DataError(f"stream '{self.name}': timestamps not strictly increasing")
            if np.max(np.abs(dt - 1.0 / self.rate)) > 1e-9:
                raise DataError(f"stream '{self.name}': inter-frame spacing differs "
                                f"from 1/{self.rate}")


@dataclass
class RawEpisode:
    """Unsynchronized multi-rate recording of one demonstration.

    Marker events are keyed by clock group: the vision camera records on the
    reference clock, the two tactile sensors share the collector clock.
    """

    task_id: str
    seed: int
    streams: dict[str, FrameStream]
    marker_events: dict[str, list[MarkerEvent]]
    start_signal: float
    stop_signal: float
    tracking_failed: bool
    # ground-truth per-stream clock offsets used at generation time; kept for
    # diagnostics and synchronization tests, not consumed by the pipeline
    injected_offsets: dict[str, float] = field(default_factory=dict)

    def validate(self) -> None:
        for stream in self.streams.values():
            stream.validate()
        for group, events in self.marker_events.items():
            times = [e.timestamp for e in events]
            ids = [e.marker_id for e in events]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise DataError(f"marker events '{group}': timestamps not strictly increasing")
            if any(b < a for a, b in zip(ids, ids[1:])):
                raise DataError(f"marker events '{group}': ids decrease")


@dataclass
class AlignedEpisode:
    """Common-clock episode resampled onto the policy tick grid.

    Stored column-wise: row i of every array describes tick i.
    """

    task_id: str
    seed: int
    tick_times: np.ndarray  # (n,) float64, exact multiples of the tick period
    vision: np.ndarray  # (n, H, W, 3) float32
    tactile_left: np.ndarray  # (n, h, w) float32
    tactile_right: np.ndarray  # (n, h, w) float32
    proprio: np.ndarray  # (n, 4) float32: x, y, theta, width
    action: np.ndarray  # (n, 4) float32: dx, dy, dtheta, dwidth
    staleness: dict[str, np.ndarray]  # per source stream, seconds, float64
    source_offsets: dict[str, float]
    tracking_failed: bool

    def __len__(self) -> int:
        return len(self.tick_times)
