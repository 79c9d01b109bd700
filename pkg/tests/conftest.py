import numpy as np
import pytest

from surgitrack.geometry import BoundingBox
from surgitrack.tracking import Detection, TrackHistory, TrackPoint, TrackSet


def box_at(cx, cy, w=40.0, h=40.0) -> BoundingBox:
    return BoundingBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


def make_detection(frame, cls="Kerrisons", cx=100.0, cy=100.0, w=40.0, h=40.0,
                   confidence=1.0, embedding=None):
    return Detection(frame, cls, box_at(cx, cy, w, h), confidence, embedding=embedding)


def make_trackset(specs, transforms=None, last_frame=None):
    """specs: list of (track_id, class_id, [(frame, box, coasted), ...])."""
    tracks = []
    max_frame = -1
    for tid, cls, points in specs:
        pts = tuple(TrackPoint(f, b, c) for f, b, c in points)
        tracks.append(TrackHistory(tid, cls, pts))
        if pts:
            max_frame = max(max_frame, pts[-1].frame_index)
    if last_frame is None:
        last_frame = max_frame if max_frame >= 0 else None
    return TrackSet(tracks=tuple(tracks), transforms=transforms or {}, last_frame_index=last_frame)


def random_bitmap(rng, height, width, density=0.3):
    return rng.random((height, width)) < density


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
