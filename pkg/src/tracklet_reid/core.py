"""Geometry and the detection/track value types shared across the package."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .kalman import KalmanState

FEATURE_NORM_TOL = 1e-6


class ValidationError(ValueError):
    """A value violates a domain invariant."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixels, top-left origin."""

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        vals = (self.left, self.top, self.width, self.height)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError(f"non-finite box {vals}")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"box must have positive size, got {vals}")

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.left, self.top, self.width, self.height)


@dataclass(frozen=True)
class Detection:
    frame_index: int
    bbox: BBox
    confidence: float = 1.0
    feature: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.frame_index < 1:
            raise ValidationError(f"frame index must be >= 1, got {self.frame_index}")
        if not (self.confidence >= 0 and math.isfinite(self.confidence)):
            raise ValidationError(f"confidence must be finite and >= 0, got {self.confidence}")
        if self.feature is not None:
            norm = float(np.linalg.norm(self.feature))
            if abs(norm - 1.0) > FEATURE_NORM_TOL:
                raise ValidationError(f"feature must be unit length, norm is {norm}")

    def with_feature(self, feature: Optional[np.ndarray]) -> "Detection":
        return Detection(self.frame_index, self.bbox, self.confidence, feature)


class TrackState(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DELETED = "deleted"


_ALLOWED = {
    (TrackState.TENTATIVE, TrackState.CONFIRMED),
    (TrackState.TENTATIVE, TrackState.DELETED),
    (TrackState.CONFIRMED, TrackState.DELETED),
}


@dataclass(eq=False)
class Track:
    """Live tracker state for one target.

    ``history`` holds ``(frame, box)`` for every matched frame, ``detections``
    the matched detection indices per frame; both feed result writing and
    label generation.
    """

    id: int
    kalman: KalmanState
    state: TrackState = TrackState.TENTATIVE
    hits: int = 1
    age: int = 1
    time_since_update: int = 0
    gallery: list = field(default_factory=list)
    history: list = field(default_factory=list)
    detections: list = field(default_factory=list)

    def transition(self, new: TrackState) -> None:
        if new is self.state:
            return
        if (self.state, new) not in _ALLOWED:
            raise ValidationError(f"illegal track transition {self.state.name} -> {new.name}")
        self.state = new

    def add_feature(self, feature: np.ndarray, budget: int) -> None:
        self.gallery.append(feature)
        if len(self.gallery) > budget:
            del self.gallery[: len(self.gallery) - budget]

    @property
    def is_confirmed(self) -> bool:
        return self.state is TrackState.CONFIRMED

    @property
    def is_deleted(self) -> bool:
        return self.state is TrackState.DELETED


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.right, b.right) - max(a.left, b.left)
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    # rounding can push identical boxes a hair above 1
    return min(1.0, inter / (a.width * a.height + b.width * b.height - inter))


def boxes_to_array(boxes: Sequence[BBox]) -> np.ndarray:
    if not boxes:
        return np.zeros((0, 4))
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64)


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU; accepts sequences of ``BBox`` or ``(n, 4)`` ltwh arrays."""
    a = a if isinstance(a, np.ndarray) else boxes_to_array(a)
    b = b if isinstance(b, np.ndarray) else boxes_to_array(b)
    return kernels.iou_matrix(
        np.ascontiguousarray(a, dtype=np.float64), np.ascontiguousarray(b, dtype=np.float64)
    )


def bbox_to_measurement(b: BBox) -> np.ndarray:
    """``(center_x, center_y, aspect, height)`` with aspect = width / height."""
    return np.array(
        [b.left + b.width / 2.0, b.top + b.height / 2.0, b.width / b.height, b.height]
    )


def measurement_to_bbox(z) -> BBox:
    cx, cy, aspect, height = (float(v) for v in z[:4])
    width = aspect * height
    return BBox(cx - width / 2.0, cy - height / 2.0, width, height)
