"""Constant-velocity Kalman filtering over box states.

The state is the 8-vector (cx, cy, aspect, height, vcx, vcy, va, vh); the
measurement is its first four components. Process and measurement noise are
diagonal and scale with the state height so behavior is invariant to
instrument size; the dimensionless aspect-ratio components use small fixed
constants instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import BoundingBox, CameraTransform

POSITION_STD_WEIGHT = 1.0 / 20.0
VELOCITY_STD_WEIGHT = 1.0 / 160.0
ASPECT_STD = 1e-2
ASPECT_VEL_STD = 1e-5
# floor for the confidence-driven measurement-noise factor (fraction of nominal)
MIN_NOISE_FACTOR = 1e-4
# keep height/aspect strictly positive after linear updates
_MEAN_FLOOR = 1e-6


@dataclass
class KalmanState:
    mean: np.ndarray  # shape (8,)
    covariance: np.ndarray  # shape (8, 8)

    def copy(self) -> "KalmanState":
        return KalmanState(self.mean.copy(), self.covariance.copy())


def box_to_measurement(box: BoundingBox) -> np.ndarray:
    cx, cy = box.center
    h = box.height
    return np.array([cx, cy, box.width / h, h], dtype=np.float64)


def measurement_to_box(z) -> BoundingBox:
    cx, cy, aspect, h = (float(v) for v in z)
    w = aspect * h
    return BoundingBox(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)


def state_box(state: KalmanState) -> BoundingBox:
    return measurement_to_box(state.mean[:4])


def init_state(box: BoundingBox) -> KalmanState:
    """State from a first observation: zero velocity, diagonal covariance."""
    z = box_to_measurement(box)
    mean = np.zeros(8, dtype=np.float64)
    mean[:4] = z
    h = z[3]
    std = np.array(
        [
            2 * POSITION_STD_WEIGHT * h,
            2 * POSITION_STD_WEIGHT * h,
            ASPECT_STD,
            2 * POSITION_STD_WEIGHT * h,
            10 * VELOCITY_STD_WEIGHT * h,
            10 * VELOCITY_STD_WEIGHT * h,
            ASPECT_VEL_STD,
            10 * VELOCITY_STD_WEIGHT * h,
        ],
        dtype=np.float64,
    )
    return KalmanState(mean, np.diag(std * std))


def process_noise(height: float) -> np.ndarray:
    """Per-step process noise variances for a state of the given height."""
    h = max(float(height), _MEAN_FLOOR)
    std = np.array(
        [
            POSITION_STD_WEIGHT * h,
            POSITION_STD_WEIGHT * h,
            ASPECT_STD,
            POSITION_STD_WEIGHT * h,
            VELOCITY_STD_WEIGHT * h,
            VELOCITY_STD_WEIGHT * h,
            ASPECT_VEL_STD,
            VELOCITY_STD_WEIGHT * h,
        ],
        dtype=np.float64,
    )
    return std * std


def measurement_noise(height: float, confidence: float = 1.0, confidence_scaling: bool = False) -> np.ndarray:
    """Measurement noise variances, optionally scaled by detection confidence.

    With scaling enabled the nominal variances are multiplied by
    ``max(1 - confidence, MIN_NOISE_FACTOR)`` so confident detections are
    trusted almost exactly and low-confidence ones barely move the state.
    """
    h = max(float(height), _MEAN_FLOOR)
    std = np.array(
        [POSITION_STD_WEIGHT * h, POSITION_STD_WEIGHT * h, ASPECT_STD, POSITION_STD_WEIGHT * h],
        dtype=np.float64,
    )
    var = std * std
    if confidence_scaling:
        var = var * max(1.0 - float(confidence), MIN_NOISE_FACTOR)
    return var


def _transform_matrix(transform: CameraTransform) -> np.ndarray:
    """8x8 linear map applying the camera motion to the state.

    The affine linear part acts on the center and its velocity; height (and
    its velocity) scale with sqrt(|det|); the dimensionless aspect ratio is
    untouched. Exactness beyond similarity transforms is not required, the
    tracker only uses this for gating.
    """
    (a, b), (c, d) = transform.linear
    s = np.sqrt(abs(transform.det))
    m = np.eye(8, dtype=np.float64)
    m[0, 0], m[0, 1], m[1, 0], m[1, 1] = a, b, c, d
    m[4, 4], m[4, 5], m[5, 4], m[5, 5] = a, b, c, d
    m[3, 3] = s
    m[7, 7] = s
    return m


def predict(
    state: KalmanState,
    transform: CameraTransform | None = None,
    noise: np.ndarray | None = None,
    kernels=None,
) -> KalmanState:
    """Camera-motion compensation (optional) followed by one CV step.

    ``noise`` overrides the per-step process-noise variances (length 8);
    by default they are derived from the current state height.
    """
    k = kernels if kernels is not None else _kernels
    mean, cov = state.mean, state.covariance
    if transform is not None and not transform.is_identity():
        m8 = _transform_matrix(transform)
        mean = m8 @ mean
        mean[0] += transform.translation[0]
        mean[1] += transform.translation[1]
        cov = m8 @ cov @ m8.T
    if noise is None:
        noise = process_noise(mean[3])
    new_mean, new_cov = k.kf_predict(mean, cov, noise)
    new_mean[2] = max(new_mean[2], _MEAN_FLOOR)
    new_mean[3] = max(new_mean[3], _MEAN_FLOOR)
    return KalmanState(new_mean, new_cov)


def update(
    state: KalmanState,
    box: BoundingBox,
    confidence: float = 1.0,
    confidence_scaling: bool = False,
    noise: np.ndarray | None = None,
    kernels=None,
) -> KalmanState:
    """Joseph-form measurement update; posterior covariance stays PSD."""
    k = kernels if kernels is not None else _kernels
    z = box_to_measurement(box)
    if not np.all(np.isfinite(z)):
        raise ValueError(f"non-finite measurement derived from box {box}")
    if noise is None:
        noise = measurement_noise(state.mean[3], confidence, confidence_scaling)
    new_mean, new_cov = k.kf_update(state.mean, state.covariance, z, noise)
    new_mean[2] = max(new_mean[2], _MEAN_FLOOR)
    new_mean[3] = max(new_mean[3], _MEAN_FLOOR)
    return KalmanState(new_mean, new_cov)


def gating_distance(state: KalmanState, box: BoundingBox, kernels=None) -> float:
    """Squared Mahalanobis distance of a box measurement from the state."""
    k = kernels if kernels is not None else _kernels
    z = box_to_measurement(box)
    noise = measurement_noise(state.mean[3])
    return float(k.kf_gating(state.mean, state.covariance, z, noise))
