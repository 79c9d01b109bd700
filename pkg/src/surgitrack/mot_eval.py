"""CLEAR-MOT style tracking evaluation and throughput measurement.

MOTA is computed on every frame: annotated frames use class-aware optimal
IoU matching, unannotated frames inherit the most recent annotated
classification (forward fill) and contribute classification-only FN/FP
counts. MOTP is the mean matched box IoU on annotated frames only. mIoU is
per-class mask overlap with misclassified frames scoring zero for the
ground-truth class.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .assignment import assign
from .geometry import BoundingBox, MaskRLE, iou_box, iou_mask, rle_complement
from .tracking import Tracker, TrackerConfig, TrackOutput, TrackSet

BACKGROUND = "NoInstrument"
ALL_INSTRUMENTS = "AllInstruments"


@dataclass(frozen=True)
class GroundTruthFrame:
    """Per-frame annotation unit; ``class_id`` None means no instrument."""

    frame_index: int
    annotated: bool
    class_id: str | None = None
    box: BoundingBox | None = None
    mask: MaskRLE | None = None
    filled: bool = False

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")
        if self.annotated and self.class_id is not None:
            if self.box is None:
                raise ValueError(
                    f"annotated instrument frame {self.frame_index} carries no box"
                )

    @property
    def classification_known(self) -> bool:
        return self.annotated or self.filled


@dataclass
class EvalReport:
    mota: float | None = None
    motp: float | None = None
    miou_per_class: dict[str, float | None] = field(default_factory=dict)
    miou_all: float | None = None
    miou_background: float | None = None
    fps_mean: float | None = None
    fps_std: float | None = None
    false_positives: int = 0
    false_negatives: int = 0
    id_switches: int = 0
    matches: int = 0
    gt_count: int = 0

    def to_dict(self) -> dict:
        return {
            "mota": self.mota,
            "motp": self.motp,
            "miou_per_class": dict(self.miou_per_class),
            "miou_all": self.miou_all,
            "miou_background": self.miou_background,
            "fps_mean": self.fps_mean,
            "fps_std": self.fps_std,
            "counts": {
                "false_positives": self.false_positives,
                "false_negatives": self.false_negatives,
                "id_switches": self.id_switches,
                "matches": self.matches,
                "gt_count": self.gt_count,
            },
        }


def forward_fill_gt(frames: Sequence[GroundTruthFrame]) -> list[GroundTruthFrame]:
    """Propagate the last annotated classification onto unannotated frames.

    Frames before the first annotation carry no-instrument. Only the
    classification is filled; boxes and masks stay absent. Idempotent.
    """
    frames = sorted(frames, key=lambda f: f.frame_index)
    if not frames:
        raise ValueError("cannot forward-fill an empty ground-truth sequence")
    if not any(f.annotated for f in frames):
        raise ValueError("ground truth contains no annotated frames")
    seen = set()
    for f in frames:
        if f.frame_index in seen:
            raise ValueError(f"duplicate ground-truth frame {f.frame_index}")
        seen.add(f.frame_index)
    out = []
    last_class: str | None = None
    for f in frames:
        if f.annotated:
            last_class = f.class_id
            out.append(f)
        else:
            out.append(replace(f, class_id=last_class, box=None, mask=None, filled=True))
    return out


def _match_frame(
    gt: GroundTruthFrame, preds: list[TrackOutput], iou_threshold: float
) -> tuple[list[tuple[int, float]], list[int]]:
    """Optimal class-aware matching on one annotated frame.

    Returns ([(pred_index, iou)] for matched ground truth, unmatched pred
    indices). The single-instrument data keeps this a 1 x n problem but the
    assignment is solved generally.
    """
    if gt.class_id is None or gt.box is None:
        return [], list(range(len(preds)))
    if not preds:
        return [], []
    cost = np.ones((1, len(preds)), dtype=np.float64)
    gates = np.zeros((1, len(preds)), dtype=bool)
    ious = []
    for j, p in enumerate(preds):
        v = iou_box(gt.box, p.box)
        ious.append(v)
        if p.class_id == gt.class_id and v >= iou_threshold:
            gates[0, j] = True
            cost[0, j] = 1.0 - v
    result = assign(cost, gates)
    matched = [(j, ious[j]) for _, j in result.matches]
    matched_set = {j for j, _ in matched}
    return matched, [j for j in range(len(preds)) if j not in matched_set]


@dataclass
class _TrackingTally:
    fn: int = 0
    fp: int = 0
    idsw: int = 0
    matches: int = 0
    gt_count: int = 0
    iou_sum: float = 0.0


def _tally_tracking(
    predictions: TrackSet,
    gt_frames: Sequence[GroundTruthFrame],
    iou_threshold: float,
) -> _TrackingTally:
    unknown = [f.frame_index for f in gt_frames if not f.classification_known]
    if unknown:
        raise ValueError(
            f"ground truth not forward-filled: classification unknown on frames {unknown[:5]}"
        )
    frames = sorted(gt_frames, key=lambda f: f.frame_index)
    preds_by_frame = predictions.by_frame()
    tally = _TrackingTally()
    last_matched_id: dict[str, int] = {}
    for gt in frames:
        preds = preds_by_frame.get(gt.frame_index, [])
        if gt.annotated:
            if gt.class_id is not None:
                tally.gt_count += 1
            matched, unmatched_preds = _match_frame(gt, preds, iou_threshold)
            if gt.class_id is not None and not matched:
                tally.fn += 1
            tally.fp += len(unmatched_preds)
            for j, iou in matched:
                tally.matches += 1
                tally.iou_sum += iou
                tid = preds[j].track_id
                prev = last_matched_id.get(gt.class_id)
                if prev is not None and prev != tid:
                    tally.idsw += 1
                last_matched_id[gt.class_id] = tid
        else:
            # filled frame: classification-only agreement, identity undefined
            if gt.class_id is None:
                tally.fp += len(preds)
            else:
                tally.gt_count += 1
                same = [p for p in preds if p.class_id == gt.class_id]
                if same:
                    tally.fp += len(preds) - 1
                else:
                    tally.fn += 1
                    tally.fp += len(preds)
    return tally


def mota(
    predictions: TrackSet,
    gt_frames: Sequence[GroundTruthFrame],
    iou_threshold: float = 0.5,
) -> float | None:
    """Percent MOTA: 100 * (1 - (FN + FP + IDSW) / GT). May be negative.

    With zero ground-truth objects the score is 100.0 when there are no
    errors and undefined (None) otherwise.
    """
    t = _tally_tracking(predictions, gt_frames, iou_threshold)
    errors = t.fn + t.fp + t.idsw
    if t.gt_count == 0:
        return 100.0 if errors == 0 else None
    return 100.0 * (1.0 - errors / t.gt_count)


def motp(
    predictions: TrackSet,
    gt_frames: Sequence[GroundTruthFrame],
    iou_threshold: float = 0.5,
) -> float | None:
    """Percent mean matched IoU on annotated frames; None when no matches."""
    t = _tally_tracking(predictions, gt_frames, iou_threshold)
    if t.matches == 0:
        return None
    return 100.0 * t.iou_sum / t.matches


def evaluate_tracking(
    predictions: TrackSet,
    gt_frames: Sequence[GroundTruthFrame],
    iou_threshold: float = 0.5,
) -> EvalReport:
    """One-pass MOTA + MOTP + error counts."""
    t = _tally_tracking(predictions, gt_frames, iou_threshold)
    errors = t.fn + t.fp + t.idsw
    if t.gt_count == 0:
        mota_val = 100.0 if errors == 0 else None
    else:
        mota_val = 100.0 * (1.0 - errors / t.gt_count)
    motp_val = None if t.matches == 0 else 100.0 * t.iou_sum / t.matches
    return EvalReport(
        mota=mota_val,
        motp=motp_val,
        false_positives=t.fp,
        false_negatives=t.fn,
        id_switches=t.idsw,
        matches=t.matches,
        gt_count=t.gt_count,
    )


def miou(
    pred_frames: dict[int, tuple[str, MaskRLE] | None],
    gt_frames: Sequence[GroundTruthFrame],
    class_registry: Sequence[str],
) -> dict[str, float | None]:
    """Per-class mask mIoU over annotated frames, in percent.

    For each instrument class the mean runs over annotated frames where the
    ground truth or the prediction carries that class; a class mismatch
    contributes 0 on both sides. Background (no instrument) is scored as its
    own class via mask complements; "all instruments" averages the defined
    instrument classes.
    """
    scores: dict[str, list[float]] = {c: [] for c in class_registry}
    bg_scores: list[float] = []
    for gt in sorted(gt_frames, key=lambda f: f.frame_index):
        if not gt.annotated:
            continue
        pred = pred_frames.get(gt.frame_index)
        pred_class, pred_mask = pred if pred is not None else (None, None)
        if gt.class_id is not None and gt.mask is None:
            raise ValueError(f"annotated frame {gt.frame_index} has no ground-truth mask")
        for c in class_registry:
            gt_is_c = gt.class_id == c
            pred_is_c = pred_class == c
            if gt_is_c and pred_is_c:
                scores[c].append(iou_mask(pred_mask, gt.mask))
            elif gt_is_c or pred_is_c:
                scores[c].append(0.0)
        # background: complement overlap, defined on every annotated frame
        gt_bg = rle_complement(gt.mask) if gt.mask is not None else None
        pred_bg = rle_complement(pred_mask) if pred_mask is not None else None
        if gt_bg is None and pred_bg is None:
            bg_scores.append(1.0)
        elif gt_bg is None:
            bg_scores.append(pred_bg.area / (pred_bg.width * pred_bg.height))
        elif pred_bg is None:
            bg_scores.append(gt_bg.area / (gt_bg.width * gt_bg.height))
        else:
            bg_scores.append(iou_mask(pred_bg, gt_bg))
    report: dict[str, float | None] = {}
    for c in class_registry:
        report[c] = 100.0 * float(np.mean(scores[c])) if scores[c] else None
    defined = [report[c] for c in class_registry if report[c] is not None]
    report[ALL_INSTRUMENTS] = float(np.mean(defined)) if defined else None
    report[BACKGROUND] = 100.0 * float(np.mean(bg_scores)) if bg_scores else None
    return report


@dataclass(frozen=True)
class FpsReport:
    fps_mean: float
    fps_std: float
    latency_p50_ms: float
    latency_p95_ms: float
    latency_p99_ms: float
    n_frames: int
    total_s: float

    def to_dict(self) -> dict:
        return {
            "fps_mean": self.fps_mean,
            "fps_std": self.fps_std,
            "latency_p50_ms": self.latency_p50_ms,
            "latency_p95_ms": self.latency_p95_ms,
            "latency_p99_ms": self.latency_p99_ms,
            "n_frames": self.n_frames,
            "total_s": self.total_s,
        }


def fps_benchmark(
    config: TrackerConfig,
    stream: Iterable[tuple],
    clock: Callable[[], float] = time.perf_counter,
    kernels=None,
) -> FpsReport:
    """Measure end-to-end step throughput of a pre-parsed stream.

    I/O and parsing are excluded by design: the stream is materialized
    up front and ``total_s`` sums only per-frame processing time.
    ``fps_std`` is the population std of the per-frame instantaneous rates.
    """
    frames = list(stream)
    if not frames:
        raise ValueError("cannot benchmark an empty stream")
    tracker = Tracker(config, kernels=kernels)
    latencies = np.empty(len(frames), dtype=np.float64)
    for i, (frame_index, detections, transform) in enumerate(frames):
        t0 = clock()
        tracker.step(frame_index, detections, transform)
        latencies[i] = clock() - t0
    total = float(latencies.sum())
    safe = np.maximum(latencies, 1e-9)
    rates = 1.0 / safe
    return FpsReport(
        fps_mean=len(frames) / max(total, 1e-9),
        fps_std=float(np.std(rates)),
        latency_p50_ms=float(np.percentile(latencies, 50) * 1e3),
        latency_p95_ms=float(np.percentile(latencies, 95) * 1e3),
        latency_p99_ms=float(np.percentile(latencies, 99) * 1e3),
        n_frames=len(frames),
        total_s=total,
    )
