"""Ingestion of PNG index-map annotation bundles.

Expected layout::

    root/
      manifest.json            {"classes": [...], "fps": 25,
                                "frame_counts": {"v01": 1500, ...}}  (fps and
                                frame_counts optional)
      <video_id>/<frame>.png   palette/grayscale index maps, 0 = background,
                               k = classes[k-1]; at most one instrument class
                               per image

Decoded masks are stored run-length encoded; boxes are derived from the
masks. An all-background image is an annotated no-instrument frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..geometry import mask_to_box, rle_encode
from ..mot_eval import GroundTruthFrame
from . import InputError


@dataclass
class DatasetSummary:
    total_images: int = 0
    per_class: dict[str, int] = field(default_factory=dict)
    no_instrument_images: int = 0
    per_video: dict[str, dict[str, int]] = field(default_factory=dict)
    classes: tuple[str, ...] = ()
    fps: float | None = None
    frame_counts: dict[str, int] = field(default_factory=dict)

    @property
    def video_count(self) -> int:
        return len(self.per_video)

    def to_dict(self) -> dict:
        return {
            "total_images": self.total_images,
            "video_count": self.video_count,
            "per_class": dict(self.per_class),
            "no_instrument_images": self.no_instrument_images,
            "per_video": {v: dict(c) for v, c in self.per_video.items()},
            "classes": list(self.classes),
            "fps": self.fps,
            "frame_counts": dict(self.frame_counts),
        }


def _load_index_map(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode not in ("P", "L"):
                img = img.convert("L")
            return np.asarray(img, dtype=np.int64)
    except (UnidentifiedImageError, OSError) as exc:
        raise InputError(f"corrupt PNG {path}: {exc}") from exc


def ingest_annotations(root) -> tuple[dict[str, list[GroundTruthFrame]], DatasetSummary]:
    """Decode an annotation bundle into per-video ground-truth frames."""
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"annotation root {root} is not a directory")
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise InputError(f"missing manifest.json under {root}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid manifest.json: {exc}") from exc
    classes = tuple(manifest.get("classes", ()))
    if not classes:
        raise InputError("manifest.json must list the class registry under 'classes'")
    summary = DatasetSummary(
        classes=classes,
        fps=manifest.get("fps"),
        frame_counts={k: int(v) for k, v in manifest.get("frame_counts", {}).items()},
        per_class={c: 0 for c in classes},
    )
    gt: dict[str, list[GroundTruthFrame]] = {}
    for video_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        video_id = video_dir.name
        frames: list[GroundTruthFrame] = []
        video_counts: dict[str, int] = {}
        for png in sorted(video_dir.glob("*.png"), key=lambda p: int(p.stem)):
            try:
                frame_index = int(png.stem)
            except ValueError as exc:
                raise InputError(f"{png}: filename must be a frame number") from exc
            index_map = _load_index_map(png)
            values = sorted(int(v) for v in np.unique(index_map) if v != 0)
            if len(values) > 1:
                raise InputError(
                    f"{png}: multiple instrument classes in one image: {values}"
                )
            if not values:
                frames.append(GroundTruthFrame(frame_index, annotated=True, class_id=None))
                summary.no_instrument_images += 1
            else:
                idx = values[0]
                if idx > len(classes):
                    raise InputError(
                        f"{png}: unknown palette index {idx} (registry has {len(classes)} classes)"
                    )
                class_id = classes[idx - 1]
                mask = rle_encode(index_map == idx)
                frames.append(
                    GroundTruthFrame(
                        frame_index,
                        annotated=True,
                        class_id=class_id,
                        box=mask_to_box(mask),
                        mask=mask,
                    )
                )
                summary.per_class[class_id] = summary.per_class.get(class_id, 0) + 1
                video_counts[class_id] = video_counts.get(class_id, 0) + 1
            summary.total_images += 1
        gt[video_id] = frames
        summary.per_video[video_id] = video_counts
    return gt, summary


def expand_gt_timeline(
    annotated: list[GroundTruthFrame], frame_count: int | None = None
) -> list[GroundTruthFrame]:
    """Full per-frame timeline with unannotated placeholder frames."""
    if not annotated:
        raise ValueError("no annotated frames to expand")
    by_index = {f.frame_index: f for f in annotated}
    if frame_count is None:
        frame_count = max(by_index) + 1
    if frame_count <= max(by_index):
        raise ValueError(
            f"frame_count {frame_count} does not cover annotated frame {max(by_index)}"
        )
    return [
        by_index.get(i, GroundTruthFrame(i, annotated=False)) for i in range(frame_count)
    ]
