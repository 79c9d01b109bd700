"""Line-delimited streaming tracking: detections in, tracks out.

The loop is synchronous: a frame is processed and emitted as soon as the
first line of a later frame (or EOF) is seen, so the pipeline depth is one
frame, well inside the three-frame bound. Malformed lines are logged,
counted and skipped; an out-of-order frame aborts the stream.
"""

from __future__ import annotations

import json
import logging
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from ..tracking import Tracker, TrackerConfig
from .jsonl import FrameBatch, build_header, parse_detection_line
from . import InputError

log = logging.getLogger("surgitrack.stream")


@dataclass
class StreamStats:
    lines_read: int = 0
    frames_emitted: int = 0
    malformed_skipped: int = 0
    latencies_s: list[float] = field(default_factory=list)

    def latency_percentile_ms(self, q: float) -> float:
        if not self.latencies_s:
            return 0.0
        return float(np.percentile(np.asarray(self.latencies_s), q) * 1e3)

    @property
    def fps(self) -> float:
        total = sum(self.latencies_s)
        return self.frames_emitted / total if total > 0 else float("inf")


def _emit_frame(
    tracker: Tracker, batch: FrameBatch, emit: Callable[[str], None]
) -> None:
    outputs = tracker.step(batch.frame_index, batch.detections, batch.transform)
    obj = {
        "video_id": batch.video_id,
        "frame": batch.frame_index,
        "tracks": [
            {
                "id": o.track_id,
                "class": o.class_id,
                "box": list(o.box.as_tuple()),
                "coasted": o.coasted,
            }
            for o in outputs
        ],
    }
    if batch.transform is not None:
        obj["transform"] = list(batch.transform.to_flat())
    emit(json.dumps(obj))


def stream_track(
    lines: Iterable[str],
    emit: Callable[[str], None],
    config: TrackerConfig,
    seed: int = 0,
    kernels=None,
    clock: Callable[[], float] = time.perf_counter,
) -> StreamStats:
    """Track a line stream, emitting one output line per input frame.

    ``emit`` receives complete JSON lines (without trailing newline). The
    provenance header is emitted first. Raises ValueError on out-of-order
    frames; malformed lines are skipped and counted.
    """
    emit(json.dumps(build_header(config.to_dict(), seed), sort_keys=True))
    stats = StreamStats()
    trackers: dict[str, Tracker] = {}
    pending: dict[str, FrameBatch] = {}
    order: list[str] = []

    def flush(video_id: str) -> None:
        batch = pending.pop(video_id)
        t0 = clock()
        _emit_frame(trackers[video_id], batch, emit)
        stats.latencies_s.append(clock() - t0)
        stats.frames_emitted += 1

    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        stats.lines_read += 1
        try:
            video_id, frame, det, transform = parse_detection_line(line, line_no)
        except InputError as exc:
            stats.malformed_skipped += 1
            log.warning("skipping malformed line: %s", exc)
            continue
        if video_id not in trackers:
            trackers[video_id] = Tracker(config, kernels=kernels)
            order.append(video_id)
        current = pending.get(video_id)
        if current is not None and frame < current.frame_index:
            raise ValueError(
                f"line {line_no}: out-of-order frame {frame} for video {video_id!r} "
                f"(currently at {current.frame_index})"
            )
        if current is not None and frame > current.frame_index:
            flush(video_id)
            current = None
        if current is None:
            current = FrameBatch(video_id, frame)
            pending[video_id] = current
        if det is not None:
            current.detections.append(det)
        if transform is not None:
            current.transform = transform
    for video_id in order:
        if video_id in pending:
            flush(video_id)
    return stats


def stream_stdio(config: TrackerConfig, seed: int = 0, kernels=None) -> StreamStats:
    """stream_track wired to stdin/stdout with per-line flushing."""

    def emit(line: str) -> None:
        sys.stdout.write(line + "\n")
        sys.stdout.flush()

    stats = stream_track(sys.stdin, emit, config, seed=seed, kernels=kernels)
    if stats.malformed_skipped:
        print(f"skipped {stats.malformed_skipped} malformed line(s)", file=sys.stderr)
    return stats
