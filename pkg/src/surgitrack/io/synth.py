"""Synthetic detection streams and datasets for demos, benchmarks and tests.

Two generators live here: ``synthetic_stream`` produces a dense multi-object
bouncing-box stream for throughput benchmarks, and ``generate_dataset``
writes a full novice/expert demo dataset (detections JSONL, mOSATS CSV,
optional PNG annotation bundle) whose skill labels are learnable from the
extracted metrics: experts idle less, switch instruments less often and
move more smoothly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..geometry import BoundingBox
from ..tracking import DEFAULT_CLASS_REGISTRY, Detection
from .jsonl import detection_to_obj
from .mosats import write_mosats
from ..stats import MosatsAssessment


def _clip_box(cx, cy, w, h, width, height) -> BoundingBox:
    w = min(w, width - 2.0)
    h = min(h, height - 2.0)
    cx = min(max(cx, w / 2 + 1.0), width - w / 2 - 1.0)
    cy = min(max(cy, h / 2 + 1.0), height - h / 2 - 1.0)
    return BoundingBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


def _class_embedding(class_index: int, rng, dim: int = 16, noise: float = 0.05) -> np.ndarray:
    base = np.zeros(dim)
    base[class_index % dim] = 1.0
    vec = base + noise * rng.normal(0.0, 1.0, dim)
    return vec / np.linalg.norm(vec)


def synthetic_stream(
    n_frames: int,
    n_objects: int = 4,
    seed: int = 0,
    width: float = 1080.0,
    height: float = 720.0,
    embed_dim: int = 16,
    with_embeddings: bool = True,
    classes: tuple[str, ...] = DEFAULT_CLASS_REGISTRY,
):
    """Dense stream of bouncing constant-velocity objects, one per class slot."""
    rng = np.random.default_rng(seed)
    pos = rng.uniform([100, 100], [width - 100, height - 100], (n_objects, 2))
    vel = rng.uniform(-4, 4, (n_objects, 2))
    sizes = rng.uniform(60, 120, (n_objects, 2))
    object_classes = [classes[i % len(classes)] for i in range(n_objects)]
    embeddings = [
        _class_embedding(i, rng, embed_dim) if with_embeddings else None
        for i in range(n_objects)
    ]
    stream = []
    for f in range(n_frames):
        dets = []
        for i in range(n_objects):
            box = _clip_box(pos[i, 0], pos[i, 1], sizes[i, 0], sizes[i, 1], width, height)
            dets.append(
                Detection(
                    frame_index=f,
                    class_id=object_classes[i],
                    box=box,
                    confidence=1.0,
                    embedding=embeddings[i],
                )
            )
        stream.append((f, dets, None))
        pos += vel
        for i in range(n_objects):
            for d in range(2):
                limit = width if d == 0 else height
                if pos[i, d] < 80 or pos[i, d] > limit - 80:
                    vel[i, d] = -vel[i, d]
                    pos[i, d] = min(max(pos[i, d], 80), limit - 80)
    return stream


@dataclass
class VideoScript:
    """Ground-truth script of one synthetic video."""

    video_id: str
    skill_label: str
    fps: float
    frame_count: int
    idle_fraction: float
    segments: list[tuple[str, int, int]]  # (class_id, start_frame, end_frame)
    frames: list[tuple[int, Detection | None]]  # per-frame clean detections


def generate_video_script(
    video_id: str,
    skill_label: str,
    rng,
    fps: float = 25.0,
    duration_s: float = 60.0,
    width: float = 1080.0,
    height: float = 720.0,
    embed_dim: int = 16,
    jitter_px: float = 1.0,
    classes: tuple[str, ...] = DEFAULT_CLASS_REGISTRY,
) -> VideoScript:
    n_frames = int(round(duration_s * fps))
    if skill_label == "expert":
        idle_fraction = float(rng.uniform(0.05, 0.15))
        n_segments = int(rng.integers(2, 5))
        accel_sigma = 0.2
        speed = float(rng.uniform(1.0, 2.5))
    else:
        idle_fraction = float(rng.uniform(0.25, 0.45))
        n_segments = int(rng.integers(5, 9))
        accel_sigma = 0.9
        speed = float(rng.uniform(2.0, 5.0))

    active_frames = int(round(n_frames * (1.0 - idle_fraction)))
    seg_weights = rng.dirichlet(np.ones(n_segments)) * active_frames
    seg_lengths = np.maximum(seg_weights.astype(int), int(fps))  # >= 1 s each
    idle_total = n_frames - int(seg_lengths.sum())
    idle_weights = rng.dirichlet(np.ones(n_segments + 1)) * max(idle_total, 0)
    idle_lengths = idle_weights.astype(int)

    segments: list[tuple[str, int, int]] = []
    frames: list[tuple[int, Detection | None]] = []
    cursor = 0

    def idle_until(target):
        nonlocal cursor
        while cursor < target and cursor < n_frames:
            frames.append((cursor, None))
            cursor += 1

    prev_class = None
    for s in range(n_segments):
        idle_until(min(cursor + int(idle_lengths[s]), n_frames))
        if cursor >= n_frames:
            break
        choices = [c for c in classes if c != prev_class]
        class_id = choices[int(rng.integers(0, len(choices)))]
        prev_class = class_id
        class_index = classes.index(class_id)
        length = min(int(seg_lengths[s]), n_frames - cursor)
        if length <= 0:
            break
        start = cursor
        h = float(rng.uniform(70, 130))
        w = h * float(rng.uniform(0.5, 0.8))
        cx = float(rng.uniform(150, width - 150))
        cy = float(rng.uniform(150, height - 150))
        v = rng.uniform(-1.0, 1.0, 2)
        v = v / (np.linalg.norm(v) + 1e-9) * speed
        for _ in range(length):
            v = v + rng.normal(0.0, accel_sigma, 2)
            norm = np.linalg.norm(v)
            if norm > 2.0 * speed:
                v = v / norm * 2.0 * speed
            cx, cy = cx + v[0], cy + v[1]
            cx = min(max(cx, 120.0), width - 120.0)
            cy = min(max(cy, 120.0), height - 120.0)
            jcx = cx + rng.normal(0.0, jitter_px)
            jcy = cy + rng.normal(0.0, jitter_px)
            det = Detection(
                frame_index=cursor,
                class_id=class_id,
                box=_clip_box(jcx, jcy, w, h, width, height),
                confidence=float(rng.uniform(0.9, 1.0)),
                embedding=_class_embedding(class_index, rng, embed_dim),
            )
            frames.append((cursor, det))
            cursor += 1
        segments.append((class_id, start, cursor - 1))
    idle_until(n_frames)
    return VideoScript(
        video_id=video_id,
        skill_label=skill_label,
        fps=fps,
        frame_count=n_frames,
        idle_fraction=idle_fraction,
        segments=segments,
        frames=frames,
    )


def _aspects_for(script: VideoScript, rng) -> tuple[int, ...]:
    """Aspect scores planted to track (low) idle fraction plus noise."""
    base = 5.0 - 9.0 * script.idle_fraction
    scores = []
    for _ in range(10):
        v = int(round(base + rng.normal(0.0, 0.4)))
        scores.append(min(max(v, 1), 5))
    return tuple(scores)


def generate_dataset(
    out_dir,
    n_videos: int = 15,
    n_expert: int = 5,
    seed: int = 0,
    fps: float = 25.0,
    duration_s: float = 60.0,
    with_annotations: bool = False,
    width: int = 1080,
    height: int = 720,
) -> dict:
    """Write a demo dataset under ``out_dir``; returns its manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    labels = ["expert"] * n_expert + ["novice"] * (n_videos - n_expert)
    scripts: list[VideoScript] = []
    assessments: list[MosatsAssessment] = []
    rows = []
    for i in range(n_videos):
        video_id = f"v{i+1:02d}"
        script = generate_video_script(
            video_id, labels[i], rng, fps=fps, duration_s=duration_s,
            width=float(width), height=float(height),
        )
        scripts.append(script)
        assessments.append(
            MosatsAssessment(video_id, _aspects_for(script, rng), script.skill_label)
        )
        for frame_index, det in script.frames:
            rows.append(detection_to_obj(video_id, det, frame_index=frame_index))
    det_path = out / "detections.jsonl"
    with open(det_path, "w") as fh:
        for obj in rows:
            fh.write(json.dumps(obj) + "\n")
    write_mosats(out / "mosats.csv", assessments)
    manifest = {
        "fps": fps,
        "frame_counts": {s.video_id: s.frame_count for s in scripts},
        "videos": [s.video_id for s in scripts],
        "skill_labels": {s.video_id: s.skill_label for s in scripts},
        "seed": seed,
        "segments": {s.video_id: s.segments for s in scripts},
    }
    (out / "meta.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    if with_annotations:
        _write_annotation_bundle(out / "annotations", scripts, width, height)
    return manifest


def _write_annotation_bundle(root: Path, scripts: list[VideoScript], width: int, height: int) -> None:
    from PIL import Image

    root.mkdir(parents=True, exist_ok=True)
    classes = list(DEFAULT_CLASS_REGISTRY)
    manifest = {
        "classes": classes,
        "fps": scripts[0].fps if scripts else 25.0,
        "frame_counts": {s.video_id: s.frame_count for s in scripts},
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    for script in scripts:
        video_dir = root / script.video_id
        video_dir.mkdir(exist_ok=True)
        step = int(round(script.fps))
        dets = dict(script.frames)
        for f in range(0, script.frame_count, step):
            arr = np.zeros((height, width), dtype=np.uint8)
            det = dets.get(f)
            if det is not None:
                idx = classes.index(det.class_id) + 1
                b = det.box
                arr[int(b.top) : int(b.bottom), int(b.left) : int(b.right)] = idx
            Image.fromarray(arr, mode="L").save(video_dir / f"{f}.png")
