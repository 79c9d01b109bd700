"""Per-video time / motion / usage metric extraction from track sets.

The 34-metric catalogue (M01..M34) spans three families:

* time: procedure, visible and idle durations, per-class visible time,
  segment-duration statistics;
* motion: path length, speed/acceleration/jerk statistics, economy of
  motion, box-area statistics, heading-change rate, camera-compensated
  path length;
* usage: instrument switches, insertion counts, per-class segment counts,
  distinct classes used.

Visibility is computed over confirmed track emissions (coasted frames count
as visible) with short dropouts bridged so detector-interval gaps do not
fragment segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import CameraTransform
from .tracking import DEFAULT_CLASS_REGISTRY, TrackPoint, TrackSet

DEFAULT_GAP_TOLERANCE = 12  # frames (~0.5 s at 25 FPS)
DEFAULT_SMOOTHING_WINDOW = 5  # frames, centered, shrinking at boundaries

# fixed per-class metric slots follow the canonical four-class registry
_CLASS_SLOTS = DEFAULT_CLASS_REGISTRY

METRIC_NAMES: tuple[tuple[str, str], ...] = (
    ("M01", "total_procedure_time_s"),
    ("M02", "instrument_visible_time_s"),
    ("M03", "procedure_to_visible_time_ratio"),
    ("M04", "idle_time_s"),
    ("M05", "visible_time_blunt_dissector_s"),
    ("M06", "visible_time_cup_forceps_s"),
    ("M07", "visible_time_kerrisons_s"),
    ("M08", "visible_time_pituitary_rongeurs_s"),
    ("M09", "mean_visibility_segment_s"),
    ("M10", "longest_idle_gap_s"),
    ("M11", "median_visibility_segment_s"),
    ("M12", "idle_fraction"),
    ("M13", "path_length_px"),
    ("M14", "mean_speed_px_s"),
    ("M15", "speed_std_px_s"),
    ("M16", "mean_abs_acceleration_px_s2"),
    ("M17", "mean_abs_jerk_px_s3"),
    ("M18", "economy_of_motion"),
    ("M19", "mean_speed_blunt_dissector_px_s"),
    ("M20", "mean_speed_cup_forceps_px_s"),
    ("M21", "mean_speed_kerrisons_px_s"),
    ("M22", "mean_speed_pituitary_rongeurs_px_s"),
    ("M23", "mean_box_area_px2"),
    ("M24", "box_area_std_px2"),
    ("M25", "mean_abs_heading_change_rate_rad_s"),
    ("M26", "compensated_path_length_px"),
    ("M27", "instrument_switches"),
    ("M28", "switches_per_minute"),
    ("M29", "insertion_count"),
    ("M30", "segments_blunt_dissector"),
    ("M31", "segments_cup_forceps"),
    ("M32", "segments_kerrisons"),
    ("M33", "segments_pituitary_rongeurs"),
    ("M34", "distinct_classes_used"),
)

METRIC_CODES = tuple(code for code, _ in METRIC_NAMES)


@dataclass(frozen=True)
class VideoMeta:
    video_id: str
    fps: float
    frame_count: int
    class_registry: tuple[str, ...] = DEFAULT_CLASS_REGISTRY

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.frame_count <= 0:
            raise ValueError(f"frame_count must be positive, got {self.frame_count}")


@dataclass(frozen=True)
class VisibilitySegment:
    class_id: str
    start_frame: int
    end_frame: int  # inclusive
    duration_s: float

    def __post_init__(self):
        if self.start_frame > self.end_frame:
            raise ValueError("segment start must not exceed end")


@dataclass(frozen=True)
class SkillMetricVector:
    """The 34 named scalars of one video, ordered M01..M34."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(METRIC_CODES):
            raise ValueError(f"expected {len(METRIC_CODES)} metrics, got {len(self.values)}")
        vals = tuple(float(v) for v in self.values)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("all metric values must be finite")
        object.__setattr__(self, "values", vals)

    def __getitem__(self, code: str) -> float:
        return self.values[METRIC_CODES.index(code)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(METRIC_CODES, self.values))


def visibility_segments(
    tracks: TrackSet, meta: VideoMeta, gap_tolerance: int = DEFAULT_GAP_TOLERANCE
) -> list[VisibilitySegment]:
    """Per-class maximal visible runs, with gaps <= gap_tolerance bridged."""
    frames_by_class: dict[str, set[int]] = {}
    for tr in tracks.tracks:
        dst = frames_by_class.setdefault(tr.class_id, set())
        for p in tr.points:
            if not (0 <= p.frame_index < meta.frame_count):
                raise ValueError(
                    f"track frame {p.frame_index} outside [0, {meta.frame_count})"
                )
            dst.add(p.frame_index)
    segments = []
    for class_id in sorted(frames_by_class):
        frames = sorted(frames_by_class[class_id])
        start = prev = frames[0]
        for f in frames[1:]:
            if f - prev - 1 > gap_tolerance:
                segments.append(_segment(class_id, start, prev, meta.fps))
                start = f
            prev = f
        segments.append(_segment(class_id, start, prev, meta.fps))
    segments.sort(key=lambda s: (s.start_frame, s.class_id))
    return segments


def _segment(class_id: str, start: int, end: int, fps: float) -> VisibilitySegment:
    return VisibilitySegment(class_id, start, end, (end - start + 1) / fps)


@dataclass(frozen=True)
class KinematicsSeries:
    """Centroid derivatives of one track, in per-second units.

    Each order is a central difference of the previous one, so two samples
    are lost per order; too-short histories yield empty arrays.
    """

    times: np.ndarray
    velocity: np.ndarray  # (n-2, 2)
    velocity_times: np.ndarray
    accel: np.ndarray  # (n-4, 2)
    accel_times: np.ndarray
    jerk: np.ndarray  # (n-6, 2)
    jerk_times: np.ndarray

    @property
    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.velocity, axis=1) if self.velocity.size else np.empty(0)

    @property
    def accel_mag(self) -> np.ndarray:
        return np.linalg.norm(self.accel, axis=1) if self.accel.size else np.empty(0)

    @property
    def jerk_mag(self) -> np.ndarray:
        return np.linalg.norm(self.jerk, axis=1) if self.jerk.size else np.empty(0)


def _smooth(pos: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; the window shrinks symmetrically at the
    boundaries so straight-line motion is preserved exactly."""
    if window <= 1 or len(pos) <= 2:
        return pos
    half = window // 2
    out = np.empty_like(pos)
    n = len(pos)
    for i in range(n):
        k = min(half, i, n - 1 - i)
        out[i] = pos[i - k : i + k + 1].mean(axis=0)
    return out


def _central_diff(series: np.ndarray, times: np.ndarray):
    if len(series) < 3:
        return np.empty((0, series.shape[1] if series.ndim == 2 else 0)), np.empty(0)
    dt = (times[2:] - times[:-2])[:, None]
    return (series[2:] - series[:-2]) / dt, times[1:-1]


def kinematics(
    points: Sequence[TrackPoint],
    meta: VideoMeta,
    smoothing_window: int = DEFAULT_SMOOTHING_WINDOW,
) -> KinematicsSeries:
    """Speed/acceleration/jerk series of one track's centroid trajectory."""
    idx = np.array([p.frame_index for p in points], dtype=np.float64)
    pos = np.array([p.box.center for p in points], dtype=np.float64).reshape(-1, 2)
    times = idx / meta.fps
    smoothed = _smooth(pos, smoothing_window)
    vel, vt = _central_diff(smoothed, times)
    acc, at = _central_diff(vel, vt)
    jer, jt = _central_diff(acc, at)
    return KinematicsSeries(times, vel, vt, acc, at, jer, jt)


def _path_length(pos: np.ndarray) -> float:
    if len(pos) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pos, axis=0), axis=1).sum())


def _mean(samples: list[float]) -> float:
    return float(np.mean(samples)) if samples else 0.0


def _std(samples: list[float]) -> float:
    return float(np.std(samples)) if samples else 0.0


def _inverse_cumulative_transforms(
    transforms: dict[int, CameraTransform], max_frame: int
) -> list[CameraTransform]:
    """inv_cum[f] maps frame-f coordinates back into frame-0 coordinates."""
    out = []
    current = CameraTransform.identity()
    for f in range(max_frame + 1):
        t = transforms.get(f)
        if t is not None:
            current = current.compose(t.inverse())
        out.append(current)
    return out


def extract_metrics(
    tracks: TrackSet,
    meta: VideoMeta,
    gap_tolerance: int = DEFAULT_GAP_TOLERANCE,
    smoothing_window: int = DEFAULT_SMOOTHING_WINDOW,
) -> SkillMetricVector:
    """Fill the full 34-metric catalogue for one video.

    Degenerate conventions: with no visible instrument the time ratio M03 is
    the sentinel frame_count (the maximum possible ratio) instead of
    infinity; motion and usage metrics of absent classes are 0; economy of
    motion is 0 with no segments and 1 for zero-length paths.
    """
    fps = meta.fps
    segments = visibility_segments(tracks, meta, gap_tolerance)

    m = dict.fromkeys(METRIC_CODES, 0.0)
    m01 = meta.frame_count / fps
    m["M01"] = m01

    visible_frames: set[int] = set()
    class_frames: dict[str, set[int]] = {}
    for seg in segments:
        rng = range(seg.start_frame, seg.end_frame + 1)
        visible_frames.update(rng)
        class_frames.setdefault(seg.class_id, set()).update(rng)
    m02 = len(visible_frames) / fps
    m["M02"] = m02
    m["M04"] = m01 - m02
    m["M03"] = (m01 / m02) if m02 > 0 else float(meta.frame_count)
    m["M12"] = m["M04"] / m01

    for slot, class_id in zip(("M05", "M06", "M07", "M08"), _CLASS_SLOTS):
        m[slot] = len(class_frames.get(class_id, ())) / fps

    durations = [seg.duration_s for seg in segments]
    m["M09"] = _mean(durations)
    m["M11"] = float(np.median(durations)) if durations else 0.0

    # idle gaps: maximal runs of frames outside every segment
    longest_idle = 0
    run = 0
    for f in range(meta.frame_count):
        if f in visible_frames:
            run = 0
        else:
            run += 1
            longest_idle = max(longest_idle, run)
    m["M10"] = longest_idle / fps

    # motion family
    speed_samples: list[float] = []
    accel_samples: list[float] = []
    jerk_samples: list[float] = []
    heading_samples: list[float] = []
    class_speed: dict[str, list[float]] = {c: [] for c in _CLASS_SLOTS}
    areas: list[float] = []
    path_total = 0.0
    raw_positions: list[tuple[str | None, np.ndarray, np.ndarray]] = []
    for tr in tracks.tracks:
        pos = np.array([p.box.center for p in tr.points], dtype=np.float64).reshape(-1, 2)
        idx = np.array([p.frame_index for p in tr.points], dtype=np.int64)
        raw_positions.append((tr.class_id, idx, pos))
        path_total += _path_length(pos)
        areas.extend(p.box.area for p in tr.points)
        kin = kinematics(tr.points, meta, smoothing_window)
        sp = kin.speed
        speed_samples.extend(sp.tolist())
        if tr.class_id in class_speed:
            class_speed[tr.class_id].extend(sp.tolist())
        accel_samples.extend(kin.accel_mag.tolist())
        jerk_samples.extend(kin.jerk_mag.tolist())
        heading_samples.extend(_heading_rates(kin))
    m["M13"] = path_total
    m["M14"] = _mean(speed_samples)
    m["M15"] = _std(speed_samples)
    m["M16"] = _mean(accel_samples)
    m["M17"] = _mean(jerk_samples)
    m["M18"] = _economy_of_motion(segments, tracks)
    for slot, class_id in zip(("M19", "M20", "M21", "M22"), _CLASS_SLOTS):
        m[slot] = _mean(class_speed[class_id])
    m["M23"] = _mean(areas)
    m["M24"] = _std(areas)
    m["M25"] = _mean(heading_samples)
    m["M26"] = _compensated_path_length(raw_positions, tracks.transforms, path_total)

    # usage family
    ordered = segments
    switches = sum(
        1 for a, b in zip(ordered, ordered[1:]) if a.class_id != b.class_id
    )
    m["M27"] = float(switches)
    m["M28"] = switches / (m01 / 60.0)
    m["M29"] = float(len(segments))
    seg_counts: dict[str, int] = {}
    for seg in segments:
        seg_counts[seg.class_id] = seg_counts.get(seg.class_id, 0) + 1
    for slot, class_id in zip(("M30", "M31", "M32", "M33"), _CLASS_SLOTS):
        m[slot] = float(seg_counts.get(class_id, 0))
    m["M34"] = float(len({seg.class_id for seg in segments}))

    return SkillMetricVector(tuple(m[c] for c in METRIC_CODES))


def _heading_rates(kin: KinematicsSeries) -> list[float]:
    vel = kin.velocity
    if len(vel) < 2:
        return []
    speeds = kin.speed
    out = []
    for i in range(len(vel) - 1):
        if speeds[i] <= 1e-9 or speeds[i + 1] <= 1e-9:
            continue
        h0 = math.atan2(vel[i, 1], vel[i, 0])
        h1 = math.atan2(vel[i + 1, 1], vel[i + 1, 0])
        dh = (h1 - h0 + math.pi) % (2.0 * math.pi) - math.pi
        dt = kin.velocity_times[i + 1] - kin.velocity_times[i]
        out.append(abs(dh) / dt)
    return out


def _economy_of_motion(segments: list[VisibilitySegment], tracks: TrackSet) -> float:
    """Mean over segments of net displacement / path length (1 when parked)."""
    if not segments:
        return 0.0
    by_frame_class: dict[tuple[int, str], list[tuple[float, float]]] = {}
    for tr in tracks.tracks:
        for p in tr.points:
            by_frame_class.setdefault((p.frame_index, tr.class_id), []).append(p.box.center)
    ratios = []
    for seg in segments:
        pts = []
        for f in range(seg.start_frame, seg.end_frame + 1):
            centers = by_frame_class.get((f, seg.class_id))
            if centers:
                arr = np.array(centers, dtype=np.float64)
                pts.append(arr.mean(axis=0))
        if len(pts) < 2:
            ratios.append(1.0)
            continue
        pos = np.array(pts)
        path = _path_length(pos)
        if path <= 0.0:
            ratios.append(1.0)
        else:
            net = float(np.linalg.norm(pos[-1] - pos[0]))
            ratios.append(net / path)
    return _mean(ratios)


def _compensated_path_length(
    raw_positions: list[tuple[str | None, np.ndarray, np.ndarray]],
    transforms: dict[int, CameraTransform],
    raw_total: float,
) -> float:
    """Path length with global camera motion removed (frame-0 coordinates)."""
    if not transforms:
        return raw_total
    max_frame = max(
        (int(idx.max()) for _, idx, _ in raw_positions if len(idx)), default=-1
    )
    max_frame = max(max_frame, max(transforms))
    inv_cum = _inverse_cumulative_transforms(transforms, max_frame)
    total = 0.0
    for _, idx, pos in raw_positions:
        if len(pos) < 2:
            continue
        comp = np.empty_like(pos)
        for i, f in enumerate(idx):
            comp[i] = inv_cum[int(f)].apply_point(pos[i, 0], pos[i, 1])
        total += _path_length(comp)
    return total
