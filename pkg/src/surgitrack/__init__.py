"""Detector-agnostic multi-object instrument tracking and skill analytics.

The package turns per-frame instrument detections into identity-stable
tracks (SORT / DeepSORT / StrongSORT family), scores tracking quality with
CLEAR-MOT conventions, extracts a 34-metric time/motion/usage profile per
video, and correlates/classifies those profiles against mOSATS skill
assessments. All ingestion, serialization and the CLI live in
``surgitrack.io`` and ``surgitrack.cli``.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .geometry import BoundingBox, CameraTransform, MaskRLE, iou_box, iou_mask
from .tracking import (
    DEFAULT_CLASS_REGISTRY,
    Detection,
    Track,
    TrackerConfig,
    Tracker,
    TrackSet,
    run,
)

__all__ = [
    "KERNEL_BACKEND",
    "BoundingBox",
    "CameraTransform",
    "MaskRLE",
    "iou_box",
    "iou_mask",
    "DEFAULT_CLASS_REGISTRY",
    "Detection",
    "Track",
    "TrackerConfig",
    "Tracker",
    "TrackSet",
    "run",
    "__version__",
]
