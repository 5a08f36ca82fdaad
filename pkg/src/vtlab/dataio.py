"""Bit-exact on-disk episode container, validity filtering, dataset stats.

File layout (all integers little-endian):

    magic            4 bytes  b"VTMN"
    version          u16
    meta length      u32
    meta             UTF-8 JSON (kind, task id, seed, signals, marker events,
                     clock offsets; exact content depends on the record kind)
    stream count     u8
    per stream descriptor:
        name length  u8
        name         UTF-8
        rate         f64
        ndim         u8
        dims         u32 * ndim      (frame shape, may be empty for scalars)
        dtype        u8              (0 = float32, 1 = float64)
    per stream block, in descriptor order:
        frame count  u64
        timestamps   f64 * count
        frame data   dtype * count * prod(dims)
    tracking_failed  u8
    crc32            u32 of every preceding byte

Files are immutable after writing; any flipped byte fails the CRC check on
read, and unknown versions are rejected instead of reinterpreted.
"""

from __future__ import annotations

import json
import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .episodes import AlignedEpisode, FrameStream, MarkerEvent, RawEpisode
from .errors import DataError

logger = logging.getLogger(__name__)

MAGIC = b"VTMN"
FORMAT_VERSION = 1

_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


class BadMagicError(DataError):
    """The file does not start with the episode container magic."""


class VersionMismatchError(DataError):
    """The file declares an unsupported format version."""


class TruncatedFileError(DataError):
    """The file ends before the declared payload does."""


class CrcMismatchError(DataError):
    """The stored CRC32 does not match the file contents."""


@dataclass
class StreamBlock:
    name: str
    rate: float
    timestamps: np.ndarray
    data: np.ndarray


def write_container(path: str | Path, meta: dict, streams: Sequence[StreamBlock],
                    tracking_failed: bool) -> None:
    """Serialize a generic stream container; see the module docstring."""
    parts: list[bytes] = [MAGIC, struct.pack("<H", FORMAT_VERSION)]
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts.append(struct.pack("<I", len(meta_bytes)))
    parts.append(meta_bytes)

    parts.append(struct.pack("<B", len(streams)))
    for block in streams:
        name = block.name.encode("utf-8")
        shape = block.data.shape[1:]
        dtype = np.dtype(block.data.dtype)
        if dtype not in _DTYPE_CODES:
            raise DataError(f"stream '{block.name}': unsupported dtype {dtype}")
        parts.append(struct.pack("<B", len(name)))
        parts.append(name)
        parts.append(struct.pack("<d", block.rate))
        parts.append(struct.pack("<B", len(shape)))
        for dim in shape:
            parts.append(struct.pack("<I", dim))
        parts.append(struct.pack("<B", _DTYPE_CODES[dtype]))
    for block in streams:
        if len(block.timestamps) != len(block.data):
            raise DataError(f"stream '{block.name}': timestamp/frame count mismatch")
        parts.append(struct.pack("<Q", len(block.timestamps)))
        parts.append(np.ascontiguousarray(block.timestamps, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(block.data).astype(block.data.dtype.newbyteorder("<"),
                                                             copy=False).tobytes())

    parts.append(struct.pack("<B", 1 if tracking_failed else 0))
    payload = b"".join(parts)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    Path(path).write_bytes(payload + struct.pack("<I", crc))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFileError(
                f"file ends at byte {len(self.buf)} but {self.pos + n} are needed")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]


def read_container(path: str | Path) -> tuple[dict, list[StreamBlock], bool]:
    """Read and CRC-verify a container; the inverse of write_container."""
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: not an episode container")
    if len(raw) < 11:
        raise TruncatedFileError(f"{path}: shorter than any valid container")
    stored_crc = struct.unpack("<I", raw[-4:])[0]
    actual_crc = zlib.crc32(raw[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise CrcMismatchError(
            f"{path}: crc32 {stored_crc:#010x} does not match contents {actual_crc:#010x}")

    r = _Reader(raw[:-4])
    r.take(4)
    version = r.unpack("<H")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version}, expected {FORMAT_VERSION}")
    meta_len = r.unpack("<I")
    meta = json.loads(r.take(meta_len).decode("utf-8"))

    n_streams = r.unpack("<B")
    descriptors = []
    for _ in range(n_streams):
        name = r.take(r.unpack("<B")).decode("utf-8")
        rate = r.unpack("<d")
        ndim = r.unpack("<B")
        shape = tuple(r.unpack("<I") for _ in range(ndim))
        dtype_code = r.unpack("<B")
        if dtype_code not in _CODE_DTYPES:
            raise DataError(f"{path}: unknown dtype code {dtype_code}")
        descriptors.append((name, rate, shape, _CODE_DTYPES[dtype_code]))

    streams = []
    for name, rate, shape, dtype in descriptors:
        count = r.unpack("<Q")
        ts = np.frombuffer(r.take(count * 8), dtype="<f8").copy()
        n_values = count * int(np.prod(shape, dtype=np.int64)) if shape else count
        data = np.frombuffer(r.take(n_values * dtype.itemsize),
                             dtype=dtype.newbyteorder("<")).astype(dtype)
        streams.append(StreamBlock(name=name, rate=rate, timestamps=ts,
                                   data=data.reshape((count,) + shape)))

    tracking_failed = bool(r.unpack("<B"))
    if r.pos != len(r.buf):
        raise DataError(f"{path}: {len(r.buf) - r.pos} unexpected trailing bytes")
    return meta, streams, tracking_failed


def _marker_events_to_json(events: dict[str, list[MarkerEvent]]) -> dict:
    return {group: [[e.marker_id, e.timestamp] for e in evs] for group, evs in events.items()}


def _marker_events_from_json(doc: dict) -> dict[str, list[MarkerEvent]]:
    return {group: [MarkerEvent(int(i), float(t)) for i, t in evs]
            for group, evs in doc.items()}


def write_episode(episode: RawEpisode | AlignedEpisode, path: str | Path) -> None:
    """Write a raw or aligned episode to disk."""
    if isinstance(episode, RawEpisode):
        meta = {
            "kind": "raw",
            "task_id": episode.task_id,
            "seed": episode.seed,
            "start_signal": episode.start_signal,
            "stop_signal": episode.stop_signal,
            "marker_events": _marker_events_to_json(episode.marker_events),
            "injected_offsets": episode.injected_offsets,
        }
        blocks = [StreamBlock(s.name, s.rate, s.timestamps, s.data)
                  for s in episode.streams.values()]
        write_container(path, meta, blocks, episode.tracking_failed)
    elif isinstance(episode, AlignedEpisode):
        ticks = episode.tick_times
        rate = 1.0 / (ticks[1] - ticks[0]) if len(ticks) > 1 else 10.0
        meta = {
            "kind": "aligned",
            "task_id": episode.task_id,
            "seed": episode.seed,
            "source_offsets": episode.source_offsets,
        }
        blocks = [
            StreamBlock("vision", rate, ticks, episode.vision),
            StreamBlock("tactile_left", rate, ticks, episode.tactile_left),
            StreamBlock("tactile_right", rate, ticks, episode.tactile_right),
            StreamBlock("proprio", rate, ticks, episode.proprio),
            StreamBlock("action", rate, ticks, episode.action),
        ]
        for name, staleness in episode.staleness.items():
            blocks.append(StreamBlock(f"staleness_{name}", rate, ticks,
                                      np.asarray(staleness, dtype=np.float64)))
        write_container(path, meta, blocks, episode.tracking_failed)
    else:
        raise DataError(f"cannot serialize object of type {type(episode).__name__}")


def read_episode(path: str | Path) -> RawEpisode | AlignedEpisode:
    """Read a raw or aligned episode written by write_episode."""
    meta, blocks, tracking_failed = read_container(path)
    by_name = {b.name: b for b in blocks}
    kind = meta.get("kind")
    if kind == "raw":
        streams = {b.name: FrameStream(b.name, b.rate, b.timestamps,
                                       b.data.astype(np.float32, copy=False))
                   for b in blocks}
        return RawEpisode(
            task_id=meta["task_id"],
            seed=int(meta["seed"]),
            streams=streams,
            marker_events=_marker_events_from_json(meta["marker_events"]),
            start_signal=float(meta["start_signal"]),
            stop_signal=float(meta["stop_signal"]),
            tracking_failed=tracking_failed,
            injected_offsets={k: float(v) for k, v in meta["injected_offsets"].items()},
        )
    if kind == "aligned":
        staleness = {b.name[len("staleness_"):]: b.data
                     for b in blocks if b.name.startswith("staleness_")}
        return AlignedEpisode(
            task_id=meta["task_id"],
            seed=int(meta["seed"]),
            tick_times=by_name["vision"].timestamps,
            vision=by_name["vision"].data,
            tactile_left=by_name["tactile_left"].data,
            tactile_right=by_name["tactile_right"].data,
            proprio=by_name["proprio"].data,
            action=by_name["action"].data,
            staleness=staleness,
            source_offsets={k: float(v) for k, v in meta["source_offsets"].items()},
            tracking_failed=tracking_failed,
        )
    raise DataError(f"{path}: unknown record kind '{kind}'")


def filter_valid(episodes: Iterable[RawEpisode | AlignedEpisode]) -> list:
    """Keep only episodes with successful tracking; log every exclusion."""
    kept = []
    for episode in episodes:
        if episode.tracking_failed:
            logger.info("excluding episode task=%s seed=%s: tracking failed",
                        episode.task_id, episode.seed)
            continue
        kept.append(episode)
    return kept


def episode_ticks(episode: RawEpisode | AlignedEpisode) -> int:
    """Length of an episode in policy ticks."""
    if isinstance(episode, AlignedEpisode):
        return len(episode)
    return len(episode.streams["action"])


@dataclass
class TaskStats:
    raw_count: int = 0
    valid_count: int = 0
    mean_aligned_length: float = 0.0


@dataclass
class DatasetStats:
    per_task: dict[str, TaskStats] = field(default_factory=dict)


def compute_stats(episodes: Sequence[RawEpisode | AlignedEpisode]) -> DatasetStats:
    """Per-task raw/valid counts and mean length in policy ticks."""
    stats = DatasetStats()
    lengths: dict[str, list[int]] = {}
    for episode in episodes:
        task = stats.per_task.setdefault(episode.task_id, TaskStats())
        task.raw_count += 1
        if not episode.tracking_failed:
            task.valid_count += 1
        lengths.setdefault(episode.task_id, []).append(episode_ticks(episode))
    for task_id, task in stats.per_task.items():
        task.mean_aligned_length = float(np.mean(lengths[task_id])) if lengths[task_id] else 0.0
    return stats


def format_stats(stats: DatasetStats) -> str:
    """Render stats as a fixed-width table: task, raw, valid, average length."""
    header = f"{'Task':<24}{'Raw Data':>10}{'Valid Data':>12}{'Avg. Length':>13}"
    lines = [header, "-" * len(header)]
    for task_id in sorted(stats.per_task):
        t = stats.per_task[task_id]
        lines.append(f"{task_id:<24}{t.raw_count:>10}{t.valid_count:>12}"
                     f"{t.mean_aligned_length:>13.0f}")
    return "\n".join(lines)


def stats_key_value(stats: DatasetStats) -> str:
    """Machine-readable key/value rendering of the same stats."""
    lines = []
    for task_id in sorted(stats.per_task):
        t = stats.per_task[task_id]
        prefix = task_id.replace("-", "_")
        lines.append(f"{prefix}.raw_count={t.raw_count}")
        lines.append(f"{prefix}.valid_count={t.valid_count}")
        lines.append(f"{prefix}.mean_aligned_length={t.mean_aligned_length:.3f}")
    return "\n".join(lines) + "\n"


def write_manifest(out_dir: str | Path, entries: list[dict]) -> Path:
    """Write the episode manifest (file names, tasks, seeds) for a dataset dir."""
    path = Path(out_dir) / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"episodes": entries}, fh, indent=2, sort_keys=True)
    return path


def read_manifest(data_dir: str | Path) -> list[dict]:
    path = Path(data_dir) / "manifest.json"
    if not path.exists():
        raise DataError(f"no manifest.json in {data_dir}")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return doc["episodes"]
