"""JSONL wire formats for detections and tracks, plus provenance headers.

Detections: one JSON object per line, e.g.

    {"video_id": "v01", "frame": 17, "class": "Kerrisons", "score": 0.97,
     "box": [l, t, r, b], "mask_rle": {"width": w, "height": h, "counts": [...]},
     "embedding": [...], "transform": [a, b, c, d, tx, ty]}

Frames are nondecreasing per video within a file; several lines may share a
frame (one per instrument). A line with ``"class": null`` marks a frame
with no detections so coasting output is still emitted for it.

Tracks: a header line ``{"header": {...}}`` with provenance (config hash,
seed, input digests) followed by one line per frame:

    {"video_id": "v01", "frame": 17, "tracks": [
        {"id": 3, "class": "Kerrisons", "box": [...], "coasted": false}]}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from ..geometry import BoundingBox, CameraTransform, MaskRLE
from ..tracking import Detection, TrackHistory, TrackPoint, TrackSet
from . import InputError

TRACKS_FORMAT = "surgitrack-tracks-v1"


@dataclass
class FrameBatch:
    video_id: str
    frame_index: int
    detections: list[Detection] = field(default_factory=list)
    transform: CameraTransform | None = None


def config_hash(config_dict: dict) -> str:
    blob = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def build_header(config_dict: dict, seed: int, inputs: dict[str, str] | None = None) -> dict:
    return {
        "header": {
            "format": TRACKS_FORMAT,
            "config": config_dict,
            "config_hash": config_hash(config_dict),
            "seed": seed,
            "inputs": dict(inputs or {}),
        }
    }


# -- detections -----------------------------------------------------------------


def _require(obj: dict, key: str, line_no: int):
    if key not in obj:
        raise InputError(f"line {line_no}: missing required key {key!r}")
    return obj[key]


def _parse_box(values, line_no: int) -> BoundingBox:
    try:
        l, t, r, b = (float(v) for v in values)
        return BoundingBox(l, t, r, b)
    except (TypeError, ValueError) as exc:
        raise InputError(f"line {line_no}: bad box {values!r}: {exc}") from exc


def _parse_mask(obj, line_no: int) -> MaskRLE:
    try:
        return MaskRLE(
            width=int(obj["width"]),
            height=int(obj["height"]),
            counts=tuple(int(c) for c in obj["counts"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"line {line_no}: bad mask_rle: {exc}") from exc


def parse_detection_line(
    line: str, line_no: int
) -> tuple[str, int, Detection | None, CameraTransform | None]:
    """One wire line -> (video_id, frame, detection-or-None, transform-or-None)."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise InputError(f"line {line_no}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise InputError(f"line {line_no}: expected a JSON object")
    video_id = str(_require(obj, "video_id", line_no))
    try:
        frame = int(_require(obj, "frame", line_no))
    except (TypeError, ValueError) as exc:
        raise InputError(f"line {line_no}: bad frame index: {exc}") from exc
    if frame < 0:
        raise InputError(f"line {line_no}: frame index must be >= 0")
    transform = None
    if obj.get("transform") is not None:
        values = obj["transform"]
        if not isinstance(values, (list, tuple)) or len(values) != 6:
            raise InputError(f"line {line_no}: transform must be [a, b, c, d, tx, ty]")
        try:
            transform = CameraTransform.from_flat(values)
        except (TypeError, ValueError) as exc:
            raise InputError(f"line {line_no}: bad transform: {exc}") from exc
    if obj.get("class") is None:
        return video_id, frame, None, transform
    class_id = str(obj["class"])
    box = _parse_box(_require(obj, "box", line_no), line_no)
    try:
        score = float(obj.get("score", 1.0))
    except (TypeError, ValueError) as exc:
        raise InputError(f"line {line_no}: bad score: {exc}") from exc
    mask = _parse_mask(obj["mask_rle"], line_no) if obj.get("mask_rle") is not None else None
    embedding = obj.get("embedding")
    try:
        det = Detection(
            frame_index=frame,
            class_id=class_id,
            box=box,
            confidence=score,
            mask=mask,
            embedding=None if embedding is None else embedding,
        )
    except ValueError as exc:
        raise InputError(f"line {line_no}: {exc}") from exc
    return video_id, frame, det, transform


def read_detections(path) -> dict[str, list[FrameBatch]]:
    """Batch-read a detections file, grouped per video in frame order."""
    videos: dict[str, list[FrameBatch]] = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            video_id, frame, det, transform = parse_detection_line(line, line_no)
            batches = videos.setdefault(video_id, [])
            if batches and frame < batches[-1].frame_index:
                raise InputError(
                    f"line {line_no}: decreasing frame {frame} for video {video_id!r} "
                    f"(previous {batches[-1].frame_index})"
                )
            if batches and batches[-1].frame_index == frame:
                batch = batches[-1]
            else:
                batch = FrameBatch(video_id, frame)
                batches.append(batch)
            if det is not None:
                batch.detections.append(det)
            if transform is not None:
                if batch.transform is not None and batch.transform != transform:
                    raise InputError(
                        f"line {line_no}: conflicting transforms for frame {frame}"
                    )
                batch.transform = transform
    return videos


def detection_to_obj(
    video_id: str,
    det: Detection | None,
    frame_index: int | None = None,
    transform: CameraTransform | None = None,
) -> dict:
    obj: dict = {"video_id": video_id}
    if det is None:
        obj["frame"] = int(frame_index)
        obj["class"] = None
    else:
        obj["frame"] = det.frame_index
        obj["class"] = det.class_id
        obj["score"] = det.confidence
        obj["box"] = list(det.box.as_tuple())
        if det.mask is not None:
            obj["mask_rle"] = {
                "width": det.mask.width,
                "height": det.mask.height,
                "counts": list(det.mask.counts),
            }
        if det.embedding is not None:
            obj["embedding"] = det.embedding.tolist()
    if transform is not None:
        obj["transform"] = list(transform.to_flat())
    return obj


def write_detections(path, rows: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for obj in rows:
            fh.write(json.dumps(obj) + "\n")


# -- tracks -----------------------------------------------------------------------


def trackset_to_lines(video_id: str, trackset: TrackSet) -> Iterator[dict]:
    """Sparse per-frame lines (frames with output, a transform, or the last)."""
    by_frame = trackset.by_frame()
    frames = set(by_frame) | set(trackset.transforms)
    if trackset.last_frame_index is not None:
        frames.add(trackset.last_frame_index)
    for f in sorted(frames):
        obj: dict = {"video_id": video_id, "frame": f, "tracks": []}
        for out in by_frame.get(f, []):
            obj["tracks"].append(
                {
                    "id": out.track_id,
                    "class": out.class_id,
                    "box": list(out.box.as_tuple()),
                    "coasted": out.coasted,
                }
            )
        tr = trackset.transforms.get(f)
        if tr is not None:
            obj["transform"] = list(tr.to_flat())
        yield obj


def write_tracks(path, tracksets: dict[str, TrackSet], header: dict) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for video_id in tracksets:
            for obj in trackset_to_lines(video_id, tracksets[video_id]):
                fh.write(json.dumps(obj) + "\n")


def parse_track_line(line: str, line_no: int):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise InputError(f"line {line_no}: invalid JSON: {exc}") from exc
    if "header" in obj:
        return ("header", obj["header"])
    video_id = str(_require(obj, "video_id", line_no))
    frame = int(_require(obj, "frame", line_no))
    outs = []
    for entry in obj.get("tracks", []):
        outs.append(
            (
                int(_require(entry, "id", line_no)),
                str(_require(entry, "class", line_no)),
                _parse_box(_require(entry, "box", line_no), line_no),
                bool(entry.get("coasted", False)),
            )
        )
    transform = None
    if obj.get("transform") is not None:
        transform = CameraTransform.from_flat(obj["transform"])
    return ("frame", (video_id, frame, outs, transform))


def read_tracks(path) -> tuple[dict[str, TrackSet], dict]:
    """Rebuild per-video TrackSets; inverse of ``write_tracks``."""
    header: dict = {}
    acc: dict[str, dict] = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            kind, payload = parse_track_line(line, line_no)
            if kind == "header":
                header = payload
                continue
            video_id, frame, outs, transform = payload
            video = acc.setdefault(
                video_id, {"points": {}, "transforms": {}, "last": None}
            )
            if video["last"] is not None and frame <= video["last"]:
                raise InputError(
                    f"line {line_no}: non-increasing frame {frame} for video {video_id!r}"
                )
            video["last"] = frame
            if transform is not None:
                video["transforms"][frame] = transform
            for tid, class_id, box, coasted in outs:
                video["points"].setdefault(tid, (class_id, []))
                cls, pts = video["points"][tid]
                if cls != class_id:
                    raise InputError(
                        f"line {line_no}: track {tid} changes class {cls!r} -> {class_id!r}"
                    )
                pts.append(TrackPoint(frame, box, coasted))
    tracksets: dict[str, TrackSet] = {}
    for video_id, video in acc.items():
        histories = tuple(
            TrackHistory(tid, cls, tuple(pts))
            for tid, (cls, pts) in sorted(video["points"].items())
        )
        tracksets[video_id] = TrackSet(
            tracks=histories,
            transforms=video["transforms"],
            last_frame_index=video["last"],
        )
    return tracksets, header
