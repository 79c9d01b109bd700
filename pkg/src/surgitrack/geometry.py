"""Bounding-box, RLE-mask and camera-transform arithmetic.

Conventions used throughout the package:

* Boxes are half-open pixel rectangles ``[left, right) x [top, bottom)``
  with continuous (sub-pixel) coordinates.
* Masks are run-length encoded in column-major order, alternating
  background/foreground run lengths and always starting with a background
  run (which may be zero). This matches common annotation exports.
* Camera transforms are affine maps ``(x, y) -> A (x, y) + t`` with an
  invertible 2x2 linear part.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class BoundingBox:
    left: float
    top: float
    right: float
    bottom: float

    def __post_init__(self):
        vals = (self.left, self.top, self.right, self.bottom)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"box coordinates must be finite, got {vals}")
        if not (self.left < self.right and self.top < self.bottom):
            raise ValueError(f"degenerate box {vals}: need left < right and top < bottom")

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def height(self) -> float:
        return self.bottom - self.top

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.left + self.right), 0.5 * (self.top + self.bottom))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.left, self.top, self.right, self.bottom)


@dataclass(frozen=True)
class MaskRLE:
    """Column-major run-length encoded binary mask."""

    width: int
    height: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"mask dimensions must be positive, got {self.width}x{self.height}")
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if any(c < 0 for c in counts):
            raise ValueError("run lengths must be non-negative")
        if any(c == 0 for c in counts[1:]):
            raise ValueError("only the leading background run may be zero")
        total = sum(counts)
        if total != self.width * self.height:
            raise ValueError(
                f"run lengths sum to {total}, expected {self.width * self.height} "
                f"for a {self.width}x{self.height} mask"
            )

    @property
    def area(self) -> int:
        """Number of foreground pixels."""
        return sum(self.counts[1::2])


@dataclass(frozen=True)
class CameraTransform:
    """Affine frame-to-frame map ``(x, y) -> A (x, y) + t``.

    ``linear`` is row-major ``((a, b), (c, d))`` so a point maps to
    ``(a x + b y + tx, c x + d y + ty)``; on the wire this is the flat
    ``[a, b, c, d, tx, ty]``.
    """

    linear: tuple[tuple[float, float], tuple[float, float]]
    translation: tuple[float, float]

    def __post_init__(self):
        (a, b), (c, d) = self.linear
        object.__setattr__(self, "linear", ((float(a), float(b)), (float(c), float(d))))
        tx, ty = self.translation
        object.__setattr__(self, "translation", (float(tx), float(ty)))
        if abs(self.det) <= 1e-9:
            raise ValueError(f"degenerate camera transform, |det| = {abs(self.det):g}")

    @property
    def det(self) -> float:
        (a, b), (c, d) = self.linear
        return a * d - b * c

    @classmethod
    def identity(cls) -> "CameraTransform":
        return cls(((1.0, 0.0), (0.0, 1.0)), (0.0, 0.0))

    @classmethod
    def translate(cls, tx: float, ty: float) -> "CameraTransform":
        return cls(((1.0, 0.0), (0.0, 1.0)), (tx, ty))

    @classmethod
    def from_flat(cls, values) -> "CameraTransform":
        a, b, c, d, tx, ty = (float(v) for v in values)
        return cls(((a, b), (c, d)), (tx, ty))

    def to_flat(self) -> tuple[float, float, float, float, float, float]:
        (a, b), (c, d) = self.linear
        return (a, b, c, d, *self.translation)

    def is_identity(self) -> bool:
        return self.linear == ((1.0, 0.0), (0.0, 1.0)) and self.translation == (0.0, 0.0)

    def apply_point(self, x: float, y: float) -> tuple[float, float]:
        (a, b), (c, d) = self.linear
        tx, ty = self.translation
        return (a * x + b * y + tx, c * x + d * y + ty)

    def compose(self, inner: "CameraTransform") -> "CameraTransform":
        """Transform equivalent to applying ``inner`` first, then ``self``."""
        (a1, b1), (c1, d1) = self.linear
        (a2, b2), (c2, d2) = inner.linear
        tx2, ty2 = inner.translation
        lin = (
            (a1 * a2 + b1 * c2, a1 * b2 + b1 * d2),
            (c1 * a2 + d1 * c2, c1 * b2 + d1 * d2),
        )
        tr = self.apply_point(tx2, ty2)
        return CameraTransform(lin, tr)

    def inverse(self) -> "CameraTransform":
        (a, b), (c, d) = self.linear
        det = self.det
        ia, ib, ic, id_ = d / det, -b / det, -c / det, a / det
        tx, ty = self.translation
        return CameraTransform(
            ((ia, ib), (ic, id_)),
            (-(ia * tx + ib * ty), -(ic * tx + id_ * ty)),
        )


def iou_box(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    iw = min(a.right, b.right) - max(a.left, b.left)
    if iw <= 0.0:
        return 0.0
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def iou_mask(a: MaskRLE, b: MaskRLE) -> float:
    """Mask IoU computed on runs, without materializing bitmaps.

    Two empty masks are defined to have IoU 1.0 so that per-frame averages
    stay total; empty vs non-empty is 0.0.
    """
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    inter = _kernels.rle_intersection(
        np.asarray(a.counts, dtype=np.int64), np.asarray(b.counts, dtype=np.int64)
    )
    union = a.area + b.area - inter
    if union == 0:
        return 1.0
    return inter / union


def rle_encode(bitmap) -> MaskRLE:
    """Encode a (height, width) boolean bitmap as column-major RLE."""
    arr = np.asarray(bitmap)
    if arr.ndim != 2 or arr.shape[0] <= 0 or arr.shape[1] <= 0:
        raise ValueError(f"expected a non-empty 2-d bitmap, got shape {arr.shape}")
    h, w = arr.shape
    flat = arr.astype(bool).flatten(order="F")
    # run boundaries: indices where the value changes
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return MaskRLE(width=w, height=h, counts=tuple(int(c) for c in counts))


def rle_decode(mask: MaskRLE):
    """Decode to a (height, width) boolean bitmap."""
    total = mask.width * mask.height
    flat = np.zeros(total, dtype=bool)
    pos = 0
    for idx, count in enumerate(mask.counts):
        if idx & 1:
            flat[pos : pos + count] = True
        pos += count
    return flat.reshape((mask.height, mask.width), order="F")


def rle_complement(mask: MaskRLE) -> MaskRLE:
    """Mask with foreground and background swapped."""
    counts = mask.counts
    if counts[0] == 0:
        new = counts[1:]
    else:
        new = (0,) + counts
    return MaskRLE(width=mask.width, height=mask.height, counts=new)


def mask_to_box(mask: MaskRLE) -> BoundingBox | None:
    """Tightest half-open box around the foreground; None for an empty mask."""
    h = mask.height
    min_col = min_row = None
    max_col = max_row = None
    pos = 0
    for idx, count in enumerate(mask.counts):
        if (idx & 1) and count > 0:
            first = pos
            last = pos + count - 1
            col_first, col_last = first // h, last // h
            if min_col is None or col_first < min_col:
                min_col = col_first
            if max_col is None or col_last > max_col:
                max_col = col_last
            if col_first == col_last:
                row_lo, row_hi = first % h, last % h
            else:
                # the run wraps at least one column boundary
                row_lo, row_hi = 0, h - 1
            if min_row is None or row_lo < min_row:
                min_row = row_lo
            if max_row is None or row_hi > max_row:
                max_row = row_hi
        pos += count
    if min_col is None:
        return None
    return BoundingBox(
        left=float(min_col),
        top=float(min_row),
        right=float(max_col + 1),
        bottom=float(max_row + 1),
    )


def apply_transform(transform: CameraTransform, box: BoundingBox) -> BoundingBox:
    """Map a box through an affine transform and re-axis-align via corner hull."""
    corners = (
        transform.apply_point(box.left, box.top),
        transform.apply_point(box.right, box.top),
        transform.apply_point(box.right, box.bottom),
        transform.apply_point(box.left, box.bottom),
    )
    xs = [p[0] for p in corners]
    ys = [p[1] for p in corners]
    return BoundingBox(left=min(xs), top=min(ys), right=max(xs), bottom=max(ys))
