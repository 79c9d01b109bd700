"""SORT / DeepSORT / StrongSORT style multi-object tracking.

A tracker consumes a stream of per-frame detections (plus optional camera
transforms) and maintains identity-stable tracks: constant-velocity Kalman
prediction, appearance matching, optimal assignment, lifecycle management
and detection-interval coasting. One tracker instance is single-writer;
run separate instances for separate videos.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from . import _kernels, kalman
from .assignment import assign
from .geometry import BoundingBox, CameraTransform, MaskRLE

DEFAULT_CLASS_REGISTRY = (
    "BluntDissector",
    "CupForceps",
    "Kerrisons",
    "PituitaryRongeurs",
)

TENTATIVE = "tentative"
CONFIRMED = "confirmed"
DELETED = "deleted"

# chi-square 0.95 quantile, 4 degrees of freedom
GATE_MAHALANOBIS_DEFAULT = 9.4877

_VARIANT_DEFAULTS = {
    "sort": {"appearance_weight": 0.0, "confidence_noise_scaling": False, "motion_compensation": False},
    "deepsort": {"appearance_weight": 0.25, "confidence_noise_scaling": False, "motion_compensation": False},
    "strongsort": {"appearance_weight": 0.25, "confidence_noise_scaling": True, "motion_compensation": True},
}


@dataclass(frozen=True, eq=False)
class Detection:
    """One observed instrument instance in one frame."""

    frame_index: int
    class_id: str
    box: BoundingBox
    confidence: float = 1.0
    mask: MaskRLE | None = None
    embedding: np.ndarray | None = None

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        if self.embedding is not None:
            emb = np.asarray(self.embedding, dtype=np.float64)
            norm = float(np.linalg.norm(emb))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"embedding must be unit-norm (got norm {norm:.8f})")
            object.__setattr__(self, "embedding", emb / norm)


@dataclass(frozen=True)
class TrackerConfig:
    """Tracker behavior knobs; unset variant-dependent fields get defaults.

    ``sort`` ignores appearance entirely; ``deepsort`` matches against a
    bounded FIFO gallery of past features; ``strongsort`` keeps a single
    EMA-updated feature, scales measurement noise by detection confidence
    and compensates for camera motion when transforms are supplied.
    """

    variant: str = "strongsort"
    detection_interval: int = 5
    max_age: int = 30
    n_init: int = 3
    gate_iou_min: float = 0.1
    gate_mahalanobis_max: float = GATE_MAHALANOBIS_DEFAULT
    appearance_weight: float | None = None
    ema_alpha: float = 0.9
    gallery_size: int = 100
    confidence_noise_scaling: bool | None = None
    motion_compensation: bool | None = None
    class_registry: tuple[str, ...] = DEFAULT_CLASS_REGISTRY
    seed: int = 0

    def __post_init__(self):
        if self.variant not in _VARIANT_DEFAULTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        defaults = _VARIANT_DEFAULTS[self.variant]
        for name, value in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)
        if self.detection_interval < 1:
            raise ValueError("detection_interval must be >= 1")
        if self.max_age < 0 or self.n_init < 1:
            raise ValueError("max_age must be >= 0 and n_init >= 1")
        if not (0.0 <= self.gate_iou_min <= 1.0):
            raise ValueError("gate_iou_min must be in [0, 1]")
        if not (0.0 <= self.appearance_weight <= 1.0):
            raise ValueError("appearance_weight must be in [0, 1]")
        if not (0.0 <= self.ema_alpha <= 1.0):
            raise ValueError("ema_alpha must be in [0, 1]")
        if self.gallery_size < 1:
            raise ValueError("gallery_size must be >= 1")
        object.__setattr__(self, "class_registry", tuple(self.class_registry))

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "detection_interval": self.detection_interval,
            "max_age": self.max_age,
            "n_init": self.n_init,
            "gate_iou_min": self.gate_iou_min,
            "gate_mahalanobis_max": self.gate_mahalanobis_max,
            "appearance_weight": self.appearance_weight,
            "ema_alpha": self.ema_alpha,
            "gallery_size": self.gallery_size,
            "confidence_noise_scaling": self.confidence_noise_scaling,
            "motion_compensation": self.motion_compensation,
            "class_registry": list(self.class_registry),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrackerConfig":
        kwargs = dict(data)
        if "class_registry" in kwargs:
            kwargs["class_registry"] = tuple(kwargs["class_registry"])
        return cls(**kwargs)


class TrackPoint(NamedTuple):
    frame_index: int
    box: BoundingBox
    coasted: bool


class TrackOutput(NamedTuple):
    track_id: int
    class_id: str
    box: BoundingBox
    coasted: bool


class Track:
    """Mutable per-object tracking state; owned by one Tracker."""

    __slots__ = (
        "track_id",
        "class_id",
        "state",
        "feature",
        "gallery",
        "status",
        "hits",
        "time_since_update",
        "history",
    )

    def __init__(self, track_id: int, class_id: str, state: kalman.KalmanState, gallery_size: int):
        self.track_id = track_id
        self.class_id = class_id
        self.state = state
        self.feature: np.ndarray | None = None
        self.gallery: deque = deque(maxlen=gallery_size)
        self.status = TENTATIVE
        self.hits = 0
        self.time_since_update = 0
        self.history: list[TrackPoint] = []

    def predicted_box(self) -> BoundingBox:
        return kalman.state_box(self.state)


def ema_update(feature: np.ndarray, new: np.ndarray, alpha: float) -> np.ndarray:
    """Exponential moving average of unit features, renormalized to unit norm.

    If the blend cancels to (numerically) zero, the previous feature is kept.
    """
    blended = alpha * feature + (1.0 - alpha) * new
    norm = float(np.linalg.norm(blended))
    if norm < 1e-12:
        return feature
    return blended / norm


def motion_cost(
    track: Track,
    detection: Detection,
    gate_iou_min: float = 0.1,
    gate_mahalanobis_max: float = GATE_MAHALANOBIS_DEFAULT,
    kernels=None,
) -> tuple[float, bool]:
    """(1 - IoU) of the predicted box vs the detection, plus the gate flag."""
    k = kernels if kernels is not None else _kernels
    pred = track.predicted_box()
    iou = float(
        k.iou_matrix(
            np.array([pred.as_tuple()], dtype=np.float64),
            np.array([detection.box.as_tuple()], dtype=np.float64),
        )[0, 0]
    )
    in_gate = iou >= gate_iou_min
    if in_gate:
        maha = kalman.gating_distance(track.state, detection.box, kernels=k)
        in_gate = maha <= gate_mahalanobis_max
    return 1.0 - iou, in_gate


def appearance_cost(track: Track, detection: Detection, variant: str) -> float:
    """Cosine distance in [0, 2]; neutral 0 when either side has no feature.

    sort ignores appearance; deepsort takes the minimum distance over its
    FIFO gallery; strongsort compares against the single EMA feature.
    """
    if variant == "sort":
        return 0.0
    emb = detection.embedding
    if emb is None:
        return 0.0
    if variant == "deepsort":
        if not track.gallery:
            return 0.0
        best = 2.0
        for feat in track.gallery:
            if feat.shape != emb.shape:
                raise ValueError(
                    f"embedding dimension mismatch: {feat.shape[0]} vs {emb.shape[0]}"
                )
            d = 1.0 - float(np.dot(feat, emb))
            if d < best:
                best = d
        return best
    if track.feature is None:
        return 0.0
    if track.feature.shape != emb.shape:
        raise ValueError(
            f"embedding dimension mismatch: {track.feature.shape[0]} vs {emb.shape[0]}"
        )
    return 1.0 - float(np.dot(track.feature, emb))


@dataclass(frozen=True)
class TrackHistory:
    """Immutable emitted trajectory of one confirmed track."""

    track_id: int
    class_id: str
    points: tuple[TrackPoint, ...]

    def frame_indices(self) -> list[int]:
        return [p.frame_index for p in self.points]


@dataclass(frozen=True)
class TrackSet:
    """All confirmed-track trajectories of one video, plus stream metadata."""

    tracks: tuple[TrackHistory, ...]
    transforms: dict[int, CameraTransform] = field(default_factory=dict)
    last_frame_index: int | None = None

    def by_frame(self) -> dict[int, list[TrackOutput]]:
        frames: dict[int, list[TrackOutput]] = {}
        for tr in self.tracks:
            for p in tr.points:
                frames.setdefault(p.frame_index, []).append(
                    TrackOutput(tr.track_id, tr.class_id, p.box, p.coasted)
                )
        return frames

    @property
    def frame_count(self) -> int:
        return 0 if self.last_frame_index is None else self.last_frame_index + 1


class Tracker:
    """Single-stream tracker; ``step`` must be called with increasing frames."""

    def __init__(self, config: TrackerConfig, kernels=None):
        self.config = config
        self._k = kernels if kernels is not None else _kernels
        self._tracks: list[Track] = []
        self._next_id = 1
        self._last_frame: int | None = None
        self._embed_dim: int | None = None
        self._transforms: dict[int, CameraTransform] = {}

    # -- per-frame step -----------------------------------------------------

    def step(
        self,
        frame_index: int,
        detections: Iterable[Detection] = (),
        transform: CameraTransform | None = None,
    ) -> list[TrackOutput]:
        cfg = self.config
        if self._last_frame is not None and frame_index <= self._last_frame:
            raise ValueError(
                f"out-of-order frame {frame_index} (previous was {self._last_frame})"
            )
        gap = 1 if self._last_frame is None else frame_index - self._last_frame
        self._last_frame = frame_index
        if transform is not None and not transform.is_identity():
            self._transforms[frame_index] = transform

        live = [t for t in self._tracks if t.status != DELETED]
        for step_i in range(gap):
            tr = transform if (step_i == 0 and cfg.motion_compensation) else None
            for t in live:
                t.state = kalman.predict(t.state, tr, kernels=self._k)
                t.time_since_update += 1

        if frame_index % cfg.detection_interval == 0:
            dets = self._validate(frame_index, detections)
            self._associate(live, dets)

        for t in live:
            if t.time_since_update > cfg.max_age:
                t.status = DELETED

        outputs: list[TrackOutput] = []
        for t in self._tracks:
            if t.status != CONFIRMED:
                continue
            box = kalman.state_box(t.state)
            coasted = t.time_since_update > 0
            t.history.append(TrackPoint(frame_index, box, coasted))
            outputs.append(TrackOutput(t.track_id, t.class_id, box, coasted))
        return outputs

    # -- internals ------------------------------------------------------------

    def _validate(self, frame_index: int, detections: Iterable[Detection]) -> list[Detection]:
        dets = list(detections)
        for d in dets:
            if d.frame_index != frame_index:
                raise ValueError(
                    f"detection frame {d.frame_index} does not match step frame {frame_index}"
                )
            if d.class_id not in self.config.class_registry:
                raise ValueError(f"class {d.class_id!r} not in the class registry")
            if d.embedding is not None:
                if self._embed_dim is None:
                    self._embed_dim = d.embedding.shape[0]
                elif d.embedding.shape[0] != self._embed_dim:
                    raise ValueError(
                        f"embedding dimension changed mid-stream: "
                        f"{d.embedding.shape[0]} vs {self._embed_dim}"
                    )
        return dets

    def _associate(self, live: list[Track], dets: list[Detection]) -> None:
        cfg = self.config
        matches: list[tuple[int, int]] = []
        unmatched_tracks = list(range(len(live)))
        unmatched_dets = list(range(len(dets)))
        if live and dets:
            track_boxes = np.array(
                [t.predicted_box().as_tuple() for t in live], dtype=np.float64
            )
            det_boxes = np.array([d.box.as_tuple() for d in dets], dtype=np.float64)
            iou = self._k.iou_matrix(track_boxes, det_boxes)
            means = np.stack([t.state.mean for t in live])
            covs = np.stack([t.state.covariance for t in live])
            r_diags = np.stack([kalman.measurement_noise(t.state.mean[3]) for t in live])
            zs = np.stack([kalman.box_to_measurement(d.box) for d in dets])
            maha = self._k.gating_matrix(means, covs, r_diags, zs)
            class_ok = np.array(
                [[t.class_id == d.class_id for d in dets] for t in live], dtype=bool
            )
            gates = class_ok & (iou >= cfg.gate_iou_min) & (maha <= cfg.gate_mahalanobis_max)
            lam = cfg.appearance_weight
            if lam > 0.0 and cfg.variant != "sort":
                app = np.zeros_like(iou)
                for ti, t in enumerate(live):
                    for dj, d in enumerate(dets):
                        if gates[ti, dj]:
                            app[ti, dj] = appearance_cost(t, d, cfg.variant)
                cost = lam * app + (1.0 - lam) * (1.0 - iou)
            else:
                cost = 1.0 - iou
            result = assign(cost, gates, kernels=self._k)
            matches = result.matches
            unmatched_tracks = result.unmatched_rows
            unmatched_dets = result.unmatched_cols

        for ti, dj in matches:
            self._update_track(live[ti], dets[dj])
        for ti in unmatched_tracks:
            live[ti].hits = 0
        for dj in unmatched_dets:
            self._spawn(dets[dj])

    def _update_track(self, track: Track, det: Detection) -> None:
        cfg = self.config
        track.state = kalman.update(
            track.state,
            det.box,
            confidence=det.confidence,
            confidence_scaling=cfg.confidence_noise_scaling,
            kernels=self._k,
        )
        if det.embedding is not None and cfg.variant != "sort":
            if cfg.variant == "deepsort":
                track.gallery.append(det.embedding)
            else:
                if track.feature is None:
                    track.feature = det.embedding
                else:
                    track.feature = ema_update(track.feature, det.embedding, cfg.ema_alpha)
        track.hits += 1
        track.time_since_update = 0
        if track.status == TENTATIVE and track.hits >= cfg.n_init:
            track.status = CONFIRMED

    def _spawn(self, det: Detection) -> None:
        track = Track(
            self._next_id, det.class_id, kalman.init_state(det.box), self.config.gallery_size
        )
        self._next_id += 1
        if det.embedding is not None and self.config.variant != "sort":
            if self.config.variant == "deepsort":
                track.gallery.append(det.embedding)
            else:
                track.feature = det.embedding
        self._tracks.append(track)

    # -- results ----------------------------------------------------------------

    def trackset(self) -> TrackSet:
        """Immutable snapshot of every track that was ever confirmed."""
        histories = tuple(
            TrackHistory(t.track_id, t.class_id, tuple(t.history))
            for t in self._tracks
            if t.history
        )
        return TrackSet(
            tracks=histories,
            transforms=dict(self._transforms),
            last_frame_index=self._last_frame,
        )


def run(
    config: TrackerConfig,
    stream: Iterable[tuple[int, list[Detection], CameraTransform | None]],
    kernels=None,
) -> TrackSet:
    """Track a whole stream of (frame_index, detections, transform) triples.

    Deterministic for a fixed config and input; per-frame outputs are
    identical to calling ``Tracker.step`` repeatedly.
    """
    tracker = Tracker(config, kernels=kernels)
    for frame_index, detections, transform in stream:
        tracker.step(frame_index, detections, transform)
    return tracker.trackset()
