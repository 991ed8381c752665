"""Frame-by-frame trackers on the shared Kalman + assignment substrate.

* :class:`SortTracker`   motion only: Kalman prediction and IoU matching.
* :class:`ReidTracker`   adds appearance: a matching cascade on gallery cosine
  distance under a Mahalanobis gate, then IoU matching for the rest.
* :class:`OracleTracker` resolves association by ground-truth identity.

One tracker instance serves one sequence. ``step`` consumes the detections of
one frame and returns the track id given to each detection (``0`` for
detections dropped by the confidence filter).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .assign import solve_optimal
from .core import (
    Detection,
    Track,
    TrackState,
    bbox_to_measurement,
    boxes_to_array,
    iou_matrix,
    measurement_to_bbox,
)
from .kalman import CHI2_95_4DOF, KalmanConfig, KalmanFilter
from .motio import Annotation, SequenceBundle


class TrackerInputError(ValueError):
    pass


@dataclass(frozen=True)
class SortConfig:
    iou_infeasible_above: float = 0.7
    max_age: int = 1
    min_hits: int = 3
    confidence_min: float = 0.0
    emit_raw_boxes: bool = False

    def __post_init__(self):
        if self.max_age < 1 or self.min_hits < 1:
            raise ValueError("max_age and min_hits must be >= 1")
        if not 0 <= self.iou_infeasible_above <= 1:
            raise ValueError("iou_infeasible_above must lie in [0, 1]")


# SORT settings for evaluation runs; label generation keeps the max_age=1 default
EVAL_SORT_CONFIG = SortConfig(max_age=30)


@dataclass(frozen=True)
class ReidConfig:
    # calibrated on the crowded simulator preset for normalized ReLU embeddings
    appearance_infeasible_above: float = 0.08
    gallery_budget: int = 100
    gate_threshold: float = CHI2_95_4DOF
    cascade_depth: Optional[int] = None
    iou_fallback_infeasible_above: float = 0.7
    # confirmed tracks missed for longer than this are left to appearance matching
    iou_fallback_max_gap: Optional[int] = 1
    max_age: int = 30
    min_hits: int = 3
    confidence_min: float = 0.0
    emit_raw_boxes: bool = False

    def __post_init__(self):
        if self.max_age < 1 or self.min_hits < 1 or self.gallery_budget < 1:
            raise ValueError("max_age, min_hits and gallery_budget must be >= 1")
        for name in ("appearance_infeasible_above", "gate_threshold", "iou_fallback_infeasible_above"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def depth(self) -> int:
        return self.max_age if self.cascade_depth is None else self.cascade_depth


@dataclass
class TrackingOutput:
    results: list
    tracks: list
    assignments: dict = field(default_factory=dict)


class _BaseTracker:
    def __init__(self, config, kalman_config: KalmanConfig | None = None):
        self.config = config
        self.kf = KalmanFilter(kalman_config)
        self.tracks: list[Track] = []
        self.finished: list[Track] = []
        self._next_id = 1
        self._last_frame = 0

    @property
    def all_tracks(self) -> list[Track]:
        return sorted(self.finished + self.tracks, key=lambda t: t.id)

    def _begin(self, frame: int, detections: Sequence[Detection]) -> list[int]:
        if frame <= self._last_frame:
            raise TrackerInputError(f"frame {frame} does not follow frame {self._last_frame}")
        for d in detections:
            if d.frame_index != frame:
                raise TrackerInputError(f"detection at frame {d.frame_index} passed for frame {frame}")
        self._last_frame = frame
        for t in self.tracks:
            t.kalman = self.kf.predict(t.kalman)
            t.age += 1
            t.time_since_update += 1
        return [i for i, d in enumerate(detections) if d.confidence >= self.config.confidence_min]

    def _predicted_boxes(self, tracks: Sequence[Track]) -> np.ndarray:
        if not tracks:
            return np.zeros((0, 4))
        z = np.array([t.kalman.mean[:4] for t in tracks])
        h = np.maximum(z[:, 3], 1e-6)
        w = np.maximum(z[:, 2], 1e-6) * h
        return np.column_stack([z[:, 0] - w / 2, z[:, 1] - h / 2, w, h])

    def _match(self, track: Track, frame: int, index: int, det: Detection) -> None:
        track.kalman = self.kf.update(track.kalman, bbox_to_measurement(det.bbox))
        track.hits += 1
        track.time_since_update = 0
        self._record(track, frame, index, det)
        if track.state is TrackState.TENTATIVE and track.hits >= self.config.min_hits:
            track.transition(TrackState.CONFIRMED)

    def _record(self, track: Track, frame: int, index: int, det: Detection) -> None:
        if self.config.emit_raw_boxes:
            box = det.bbox
        else:
            try:
                box = measurement_to_bbox(track.kalman.mean[:4])
            except ValueError:
                box = det.bbox
        track.history.append((frame, box))
        track.detections.append((frame, index))
        if det.feature is not None and hasattr(self.config, "gallery_budget"):
            track.add_feature(det.feature, self.config.gallery_budget)

    def _spawn(self, frame: int, index: int, det: Detection) -> Track:
        track = Track(id=self._next_id, kalman=self.kf.initiate(bbox_to_measurement(det.bbox)))
        self._next_id += 1
        self._record(track, frame, index, det)
        if self.config.min_hits <= 1:
            track.transition(TrackState.CONFIRMED)
        self.tracks.append(track)
        return track

    def _finish(self) -> None:
        live = []
        for t in self.tracks:
            if t.time_since_update > self.config.max_age:
                t.transition(TrackState.DELETED)
                self.finished.append(t)
            else:
                live.append(t)
        self.tracks = live

    def _iou_associate(self, tracks, detections, det_idx, threshold, out):
        """IoU matching of ``tracks`` against ``detections[det_idx]``; returns leftovers."""
        if not tracks or not det_idx:
            return list(tracks), list(det_idx)
        cost = 1.0 - iou_matrix(
            self._predicted_boxes(tracks), boxes_to_array([detections[i].bbox for i in det_idx])
        )
        res = solve_optimal(cost, threshold)
        frame = self._last_frame
        for r, c in res.matches:
            i = det_idx[c]
            self._match(tracks[r], frame, i, detections[i])
            out[i] = tracks[r].id
        return [tracks[r] for r in res.unmatched_rows], [det_idx[c] for c in res.unmatched_columns]

    def _spawn_rest(self, detections, det_idx, out) -> None:
        for i in det_idx:
            out[i] = self._spawn(self._last_frame, i, detections[i]).id

    def results(self) -> list[Annotation]:
        """Boxes of every track that reached Confirmed, including its tentative frames."""
        out = []
        for t in self.all_tracks:
            if t.state is TrackState.CONFIRMED or (t.is_deleted and t.hits >= self.config.min_hits):
                out.extend(Annotation(frame, t.id, box) for frame, box in t.history)
        out.sort(key=lambda a: (a.frame, a.identity))
        return out


class SortTracker(_BaseTracker):
    def __init__(self, config: SortConfig | None = None, kalman_config: KalmanConfig | None = None):
        super().__init__(config or SortConfig(), kalman_config)

    def step(self, frame: int, detections: Sequence[Detection]) -> list[int]:
        keep = self._begin(frame, detections)
        out = [0] * len(detections)
        _, rest = self._iou_associate(
            self.tracks, detections, keep, self.config.iou_infeasible_above, out
        )
        self._spawn_rest(detections, rest, out)
        self._finish()
        return out


class ReidTracker(_BaseTracker):
    def __init__(self, config: ReidConfig | None = None, kalman_config: KalmanConfig | None = None):
        super().__init__(config or ReidConfig(), kalman_config)

    def _appearance_cost(self, tracks, features: np.ndarray, measurements: np.ndarray) -> np.ndarray:
        cfg = self.config
        infeasible = cfg.appearance_infeasible_above + 1.0
        cost = np.empty((len(tracks), len(features)))
        for r, t in enumerate(tracks):
            gallery = np.asarray(t.gallery)
            if gallery.size:
                cost[r] = np.maximum(1.0 - (gallery @ features.T).max(axis=0), 0.0)
            else:
                cost[r] = infeasible
            gate = self.kf.gating_distance(t.kalman, measurements)
            cost[r, gate > cfg.gate_threshold] = infeasible
        return cost

    def step(self, frame: int, detections: Sequence[Detection]) -> list[int]:
        for d in detections:
            if d.feature is None:
                raise TrackerInputError(f"detection at frame {d.frame_index} has no appearance feature")
        keep = self._begin(frame, detections)
        out = [0] * len(detections)
        cfg = self.config
        unmatched = list(keep)
        matched_ids = set()
        confirmed = [t for t in self.tracks if t.is_confirmed]
        for level in range(cfg.depth):
            if not unmatched:
                break
            group = [t for t in confirmed if t.time_since_update == 1 + level]
            if not group:
                continue
            feats = np.array([detections[i].feature for i in unmatched])
            meas = np.array([bbox_to_measurement(detections[i].bbox) for i in unmatched])
            cost = self._appearance_cost(group, feats, meas)
            res = solve_optimal(cost, cfg.appearance_infeasible_above)
            taken = set()
            for r, c in res.matches:
                i = unmatched[c]
                self._match(group[r], frame, i, detections[i])
                out[i] = group[r].id
                matched_ids.add(group[r].id)
                taken.add(i)
            unmatched = [i for i in unmatched if i not in taken]
        gap = cfg.iou_fallback_max_gap
        rest_tracks = [
            t
            for t in self.tracks
            if t.id not in matched_ids
            and (not t.is_confirmed or gap is None or t.time_since_update <= gap)
        ]
        _, rest = self._iou_associate(
            rest_tracks, detections, unmatched, cfg.iou_fallback_infeasible_above, out
        )
        self._spawn_rest(detections, rest, out)
        self._finish()
        return out


class OracleTracker(_BaseTracker):
    """Associates by ground-truth identity; detections without one fall back to IoU.

    Tracks spawned from unidentified detections only ever match through IoU, so
    false positives never take over an identified target.
    """

    def __init__(self, config: SortConfig | None = None, kalman_config: KalmanConfig | None = None):
        super().__init__(config or EVAL_SORT_CONFIG, kalman_config)
        self._identity: dict[int, Optional[int]] = {}

    def step(self, frame: int, detections: Sequence[Detection], identities: Sequence[Optional[int]]):
        if len(identities) != len(detections):
            raise TrackerInputError("one identity (or None) is required per detection")
        keep = self._begin(frame, detections)
        out = [0] * len(detections)
        by_identity = {}
        for t in self.tracks:
            gid = self._identity.get(t.id)
            if gid is not None:
                by_identity[gid] = t
        anonymous = []
        for i in keep:
            gid = identities[i]
            if gid is None:
                anonymous.append(i)
            elif gid in by_identity:
                t = by_identity.pop(gid)
                self._match(t, frame, i, detections[i])
                out[i] = t.id
            else:
                t = self._spawn(frame, i, detections[i])
                self._identity[t.id] = gid
                out[i] = t.id
        pool = [t for t in self.tracks if self._identity.get(t.id) is None and t.time_since_update > 0]
        _, rest = self._iou_associate(pool, detections, anonymous, self.config.iou_infeasible_above, out)
        for i in rest:
            t = self._spawn(frame, i, detections[i])
            self._identity[t.id] = None
            out[i] = t.id
        self._finish()
        return out


def annotate_identities(bundle: SequenceBundle, iou_min: float = 0.5) -> list[Optional[int]]:
    """Ground-truth identity per detection (in ``bundle.detections`` order), or None.

    Detections and ground-truth boxes of each frame are paired one-to-one by
    optimal IoU matching; pairs below ``iou_min`` stay unidentified.
    """
    if bundle.ground_truth is None:
        raise TrackerInputError(f"sequence {bundle.name!r} has no ground truth")
    gt_by_frame: dict[int, list] = {}
    for g in bundle.ground_truth:
        gt_by_frame.setdefault(g.frame, []).append(g)
    out: list[Optional[int]] = [None] * len(bundle.detections)
    det_by_frame: dict[int, list[int]] = {}
    for pos, d in enumerate(bundle.detections):
        det_by_frame.setdefault(d.frame_index, []).append(pos)
    for frame, positions in det_by_frame.items():
        gts = gt_by_frame.get(frame)
        if not gts:
            continue
        cost = 1.0 - iou_matrix([bundle.detections[p].bbox for p in positions], [g.bbox for g in gts])
        for r, c in solve_optimal(cost, 1.0 - iou_min + 1e-12).matches:
            out[positions[r]] = gts[c].identity
    return out


def run_tracker(tracker, bundle: SequenceBundle, identities=None) -> TrackingOutput:
    """Drive ``tracker`` over every frame of ``bundle``."""
    by_frame: dict[int, list[int]] = {}
    for pos, d in enumerate(bundle.detections):
        by_frame.setdefault(d.frame_index, []).append(pos)
    oracle = isinstance(tracker, OracleTracker)
    if oracle and identities is None:
        identities = annotate_identities(bundle)
    assignments = {}
    for frame in range(1, bundle.frame_count + 1):
        positions = by_frame.get(frame, [])
        dets = [bundle.detections[p] for p in positions]
        if oracle:
            ids = tracker.step(frame, dets, [identities[p] for p in positions])
        else:
            ids = tracker.step(frame, dets)
        for p, tid in zip(positions, ids):
            assignments[p] = tid
    return TrackingOutput(tracker.results(), tracker.all_tracks, assignments)
