"""Binary episode container, filtering, and statistics."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from vtlab.dataio import (
    CrcMismatchError,
    DatasetStats,
    TaskStats,
    TruncatedFileError,
    VersionMismatchError,
    compute_stats,
    episode_ticks,
    filter_valid,
    format_stats,
    read_episode,
    stats_key_value,
    write_episode,
)
from vtlab.episodes import FrameStream, RawEpisode
from vtlab.simworld import TaskId, collect_episode
from vtlab.sync import align_episode


def assert_episode_equal(a: RawEpisode, b: RawEpisode):
    assert a.task_id == b.task_id and a.seed == b.seed
    assert a.start_signal == b.start_signal and a.stop_signal == b.stop_signal
    assert a.tracking_failed == b.tracking_failed
    assert a.injected_offsets == b.injected_offsets
    assert set(a.streams) == set(b.streams)
    for name in a.streams:
        sa, sb = a.streams[name], b.streams[name]
        assert sa.rate == sb.rate
        assert np.array_equal(sa.timestamps, sb.timestamps)
        assert np.array_equal(sa.data, sb.data)
        assert sa.data.dtype == sb.data.dtype
    assert set(a.marker_events) == set(b.marker_events)
    for group in a.marker_events:
        assert a.marker_events[group] == b.marker_events[group]


class TestRoundTrip:
    def test_raw_episode_bit_exact(self, tmp_path, sim_cfg):
        episode = collect_episode(TaskId.LIFT_PLACE, 0, sim_cfg)
        path = tmp_path / "ep.vtmn"
        write_episode(episode, path)
        assert_episode_equal(read_episode(path), episode)

    def test_write_is_deterministic(self, tmp_path, sim_cfg):
        episode = collect_episode(TaskId.OCCLUDED_ADJUST, 1, sim_cfg)
        write_episode(episode, tmp_path / "a.vtmn")
        write_episode(episode, tmp_path / "b.vtmn")
        assert (tmp_path / "a.vtmn").read_bytes() == (tmp_path / "b.vtmn").read_bytes()

    def test_aligned_episode_round_trip(self, tmp_path, tiny_dataset):
        aligned = tiny_dataset[0]
        path = tmp_path / "aligned.vtmn"
        write_episode(aligned, path)
        loaded = read_episode(path)
        assert np.array_equal(loaded.vision, aligned.vision)
        assert np.array_equal(loaded.action, aligned.action)
        assert np.array_equal(loaded.tick_times, aligned.tick_times)
        assert loaded.source_offsets == aligned.source_offsets
        for name in aligned.staleness:
            assert np.array_equal(loaded.staleness[name], aligned.staleness[name])

    def test_empty_stream_round_trips(self, tmp_path):
        stream = FrameStream("vision", 60.0, np.zeros(0), np.zeros((0, 4, 4, 3), np.float32))
        episode = RawEpisode(task_id="lift-place", seed=0, streams={"vision": stream},
                             marker_events={}, start_signal=0.0, stop_signal=1.0,
                             tracking_failed=False)
        path = tmp_path / "empty.vtmn"
        write_episode(episode, path)
        loaded = read_episode(path)
        assert len(loaded.streams["vision"]) == 0
        assert loaded.streams["vision"].data.shape == (0, 4, 4, 3)


class TestCorruption:
    @pytest.fixture
    def episode_file(self, tmp_path, sim_cfg):
        path = tmp_path / "ep.vtmn"
        write_episode(collect_episode(TaskId.LIFT_PLACE, 2, sim_cfg), path)
        return path

    @pytest.mark.parametrize("where", ["header", "payload", "near_end"])
    def test_flipped_byte_fails_crc(self, episode_file, where):
        raw = bytearray(episode_file.read_bytes())
        pos = {"header": 8, "payload": len(raw) // 2, "near_end": len(raw) - 10}[where]
        raw[pos] ^= 0xFF
        episode_file.write_bytes(bytes(raw))
        with pytest.raises(CrcMismatchError):
            read_episode(episode_file)

    def test_version_mismatch_distinct_error(self, episode_file):
        import zlib

        raw = bytearray(episode_file.read_bytes())
        raw[4:6] = struct.pack("<H", 999)
        body = bytes(raw[:-4])
        episode_file.write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))
        with pytest.raises(VersionMismatchError):
            read_episode(episode_file)

    def test_truncation_distinct_error(self, episode_file):
        import zlib

        raw = episode_file.read_bytes()
        body = raw[:len(raw) // 2]
        episode_file.write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))
        with pytest.raises(TruncatedFileError):
            read_episode(episode_file)


class TestFilter:
    def _episode(self, failed: bool, task="lift-place", ticks=5) -> RawEpisode:
        stream = FrameStream("action", 10.0, np.arange(ticks) / 10.0,
                             np.zeros((ticks, 4), np.float32))
        return RawEpisode(task_id=task, seed=0, streams={"action": stream},
                          marker_events={}, start_signal=0.0, stop_signal=1.0,
                          tracking_failed=failed)

    def test_all_valid_is_identity(self):
        eps = [self._episode(False) for _ in range(4)]
        assert filter_valid(eps) == eps

    def test_all_failed_gives_empty(self):
        assert filter_valid([self._episode(True) for _ in range(3)]) == []

    def test_filter_does_not_mutate(self):
        eps = [self._episode(False), self._episode(True)]
        before = eps[0].streams["action"].data.copy()
        filter_valid(eps)
        assert np.array_equal(eps[0].streams["action"].data, before)
        assert len(eps) == 2

    def test_thousand_episode_retention(self, thousand_episode_flags):
        flags, retained = thousand_episode_flags
        assert retained == int((~flags).sum())
        assert 0.77 <= retained / 1000 <= 0.83


class TestStats:
    def test_empty_dataset_zeros(self):
        stats = compute_stats([])
        assert stats.per_task == {}

    def test_paper_reference_row_renders(self):
        # fixed fixture row exercising the table layout only
        stats = DatasetStats(per_task={
            "orange-placement": TaskStats(raw_count=87, valid_count=73,
                                          mean_aligned_length=435.0)})
        table = format_stats(stats)
        assert "orange-placement" in table
        assert "87" in table and "73" in table and "435" in table
        kv = stats_key_value(stats)
        assert "orange_placement.raw_count=87" in kv

    def test_counts_cross_check_filter(self, tiny_dataset):
        stats = compute_stats(tiny_dataset)
        total_raw = sum(t.raw_count for t in stats.per_task.values())
        total_valid = sum(t.valid_count for t in stats.per_task.values())
        assert total_raw == len(tiny_dataset)
        assert total_valid == len(filter_valid(tiny_dataset))
        for task in stats.per_task.values():
            assert task.valid_count <= task.raw_count

    def test_aligned_length_is_tick_count(self, tiny_dataset):
        episode = tiny_dataset[0]
        assert episode_ticks(episode) == len(episode)
