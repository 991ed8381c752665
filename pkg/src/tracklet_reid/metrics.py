"""CLEAR-MOT (MOTA, FP, FN, IDSW) and identity (IDF1, IDP, IDR) metrics.

Ground truth and predictions are lists of :class:`~tracklet_reid.motio.Annotation`.
Boxes correspond when their IoU is at least ``iou_min``.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .assign import solve_optimal
from .core import iou_matrix, boxes_to_array

REPORT_COLUMNS = ("MOTA", "IDF1", "IDP", "IDR", "FP", "FN", "IDSW")
# slack so that IoU exactly at the threshold counts as a match
_EPS = 1e-12


class MetricsInputError(ValueError):
    pass


@dataclass(frozen=True)
class Counts:
    """Raw counts; sequences aggregate by summation before ratios are taken."""

    gt_count: int = 0
    pred_count: int = 0
    false_positives: int = 0
    false_negatives: int = 0
    id_switches: int = 0
    matched_count: int = 0
    idtp: int = 0
    idfp: int = 0
    idfn: int = 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))


@dataclass(frozen=True)
class EvalReport:
    mota: float
    idf1: float
    idp: float
    idr: float
    false_positives: int
    false_negatives: int
    id_switches: int
    gt_count: int
    matched_count: int
    counts: Counts

    @classmethod
    def from_counts(cls, c: Counts) -> "EvalReport":
        mota = 1.0 - (c.false_negatives + c.false_positives + c.id_switches) / c.gt_count if c.gt_count else 0.0
        denom = 2 * c.idtp + c.idfp + c.idfn
        return cls(
            mota=mota,
            idf1=2 * c.idtp / denom if denom else 0.0,
            idp=c.idtp / (c.idtp + c.idfp) if c.idtp + c.idfp else 0.0,
            idr=c.idtp / (c.idtp + c.idfn) if c.idtp + c.idfn else 0.0,
            false_positives=c.false_positives,
            false_negatives=c.false_negatives,
            id_switches=c.id_switches,
            gt_count=c.gt_count,
            matched_count=c.matched_count,
            counts=c,
        )

    def row(self) -> dict:
        return {
            "MOTA": self.mota,
            "IDF1": self.idf1,
            "IDP": self.idp,
            "IDR": self.idr,
            "FP": self.false_positives,
            "FN": self.false_negatives,
            "IDSW": self.id_switches,
        }


@dataclass(frozen=True)
class ClearMotResult:
    false_positives: int
    false_negatives: int
    id_switches: int
    mota: float
    gt_count: int
    matched_count: int
    trace: list  # per frame: list of (gt_id, pred_id)


@dataclass(frozen=True)
class IdentityResult:
    idf1: float
    idp: float
    idr: float
    idtp: int
    idfp: int
    idfn: int


def _by_frame(records, what: str) -> dict:
    out = defaultdict(list)
    for r in records:
        out[r.frame].append(r)
    for frame, rows in out.items():
        ids = [r.identity for r in rows]
        if len(ids) != len(set(ids)):
            raise MetricsInputError(f"duplicate {what} ids in frame {frame}")
    return out


def clear_mot(gt: Sequence, predictions: Sequence, iou_min: float = 0.5) -> ClearMotResult:
    gt_frames = _by_frame(gt, "ground-truth")
    pr_frames = _by_frame(predictions, "prediction")
    last_match: dict[int, int] = {}  # gt id -> pred id of its latest match
    fp = fn = idsw = matched = 0
    trace = []
    for frame in sorted(set(gt_frames) | set(pr_frames)):
        g_rows, p_rows = gt_frames.get(frame, []), pr_frames.get(frame, [])
        sim = iou_matrix(boxes_to_array([g.bbox for g in g_rows]), boxes_to_array([p.bbox for p in p_rows]))
        p_col = {p.identity: j for j, p in enumerate(p_rows)}
        pairs = []
        used_g, used_p = set(), set()
        # keep last frame's correspondences that are still valid
        for i, g in enumerate(g_rows):
            j = p_col.get(last_match.get(g.identity))
            if j is not None and j not in used_p and sim[i, j] >= iou_min - _EPS:
                pairs.append((i, j))
                used_g.add(i)
                used_p.add(j)
        free_g = [i for i in range(len(g_rows)) if i not in used_g]
        free_p = [j for j in range(len(p_rows)) if j not in used_p]
        if free_g and free_p:
            cost = 1.0 - sim[np.ix_(free_g, free_p)]
            for r, c in solve_optimal(cost, 1.0 - iou_min + _EPS).matches:
                pairs.append((free_g[r], free_p[c]))
        frame_trace = []
        for i, j in sorted(pairs):
            gid, pid = g_rows[i].identity, p_rows[j].identity
            prev = last_match.get(gid)
            if prev is not None and prev != pid:
                idsw += 1
            last_match[gid] = pid
            frame_trace.append((gid, pid))
        trace.append((frame, frame_trace))
        matched += len(pairs)
        fn += len(g_rows) - len(pairs)
        fp += len(p_rows) - len(pairs)
    gt_count = len(gt)
    mota = 1.0 - (fn + fp + idsw) / gt_count if gt_count else 0.0
    return ClearMotResult(fp, fn, idsw, mota, gt_count, matched, trace)


def overlap_counts(gt: Sequence, predictions: Sequence, iou_min: float = 0.5):
    """Frames in which each (gt trajectory, predicted trajectory) pair overlaps.

    Returns ``(gt_ids, pred_ids, overlap, gt_lengths, pred_lengths)``.
    """
    gt_frames = _by_frame(gt, "ground-truth")
    pr_frames = _by_frame(predictions, "prediction")
    gt_ids = sorted({g.identity for g in gt})
    pr_ids = sorted({p.identity for p in predictions})
    gi = {k: n for n, k in enumerate(gt_ids)}
    pi = {k: n for n, k in enumerate(pr_ids)}
    overlap = np.zeros((len(gt_ids), len(pr_ids)), dtype=np.int64)
    for frame, g_rows in gt_frames.items():
        p_rows = pr_frames.get(frame)
        if not p_rows:
            continue
        sim = iou_matrix(boxes_to_array([g.bbox for g in g_rows]), boxes_to_array([p.bbox for p in p_rows]))
        rr, cc = np.nonzero(sim >= iou_min - _EPS)
        for r, c in zip(rr, cc):
            overlap[gi[g_rows[r].identity], pi[p_rows[c].identity]] += 1
    gt_len = np.array([0] * len(gt_ids), dtype=np.int64)
    for g in gt:
        gt_len[gi[g.identity]] += 1
    pr_len = np.array([0] * len(pr_ids), dtype=np.int64)
    for p in predictions:
        pr_len[pi[p.identity]] += 1
    return gt_ids, pr_ids, overlap, gt_len, pr_len


def identity_metrics(gt: Sequence, predictions: Sequence, iou_min: float = 0.5) -> IdentityResult:
    """IDF1 from the one-to-one trajectory matching that maximizes overlapping frames."""
    _, _, overlap, gt_len, pr_len = overlap_counts(gt, predictions, iou_min)
    idtp = 0
    if overlap.size:
        n = max(overlap.shape)
        # zero-overlap dummies make unmatched trajectories representable
        square = np.zeros((n, n))
        square[: overlap.shape[0], : overlap.shape[1]] = -overlap
        res = solve_optimal(square)
        idtp = int(sum(overlap[r, c] for r, c in res.matches if r < overlap.shape[0] and c < overlap.shape[1]))
    n_gt, n_pr = int(gt_len.sum()), int(pr_len.sum())
    idfp, idfn = n_pr - idtp, n_gt - idtp
    denom = 2 * idtp + idfp + idfn
    return IdentityResult(
        idf1=2 * idtp / denom if denom else 0.0,
        idp=idtp / n_pr if n_pr else 0.0,
        idr=idtp / n_gt if n_gt else 0.0,
        idtp=idtp,
        idfp=idfp,
        idfn=idfn,
    )


def sequence_counts(gt: Sequence, predictions: Sequence, iou_min: float = 0.5) -> Counts:
    cm = clear_mot(gt, predictions, iou_min)
    idm = identity_metrics(gt, predictions, iou_min)
    return Counts(
        gt_count=cm.gt_count,
        pred_count=len(predictions),
        false_positives=cm.false_positives,
        false_negatives=cm.false_negatives,
        id_switches=cm.id_switches,
        matched_count=cm.matched_count,
        idtp=idm.idtp,
        idfp=idm.idfp,
        idfn=idm.idfn,
    )


def evaluate(gt: Sequence, predictions: Sequence, iou_min: float = 0.5) -> EvalReport:
    return EvalReport.from_counts(sequence_counts(gt, predictions, iou_min))


def evaluate_many(pairs: Iterable[tuple], iou_min: float = 0.5) -> EvalReport:
    """Aggregate over sequences by summing raw counts (MOT Challenge convention)."""
    total = Counts()
    for gt, pred in pairs:
        total = total + sequence_counts(gt, pred, iou_min)
    return EvalReport.from_counts(total)


def format_report(rows: dict) -> str:
    """CSV table: one row per sequence name plus whatever the caller adds (e.g. OVERALL)."""
    lines = ["name," + ",".join(REPORT_COLUMNS)]
    for name, report in rows.items():
        r = report.row()
        vals = [f"{r[c]:.4f}" if isinstance(r[c], float) else str(r[c]) for c in REPORT_COLUMNS]
        lines.append(f"{name}," + ",".join(vals))
    return "\n".join(lines) + "\n"
