"""Readers and writers for MOT Challenge text files and the package's own formats.

Formats (one record per line, comma separated):

* detections  ``frame,id,left,top,width,height,conf,x,y,z`` (id, x, y, z are -1)
* ground truth ``frame,id,left,top,width,height,flag,class,visibility``
* results     ``frame,id,left,top,width,height,1,-1,-1,-1``
* features    header ``dim=<d>`` then ``frame,detection_index,f1,...,fd``
* labels      ``video_id,label,frame,left,top,width,height[,f1,...,fd]``

Sequences live in MOT-style directories: ``seqinfo.ini``, ``det/det.txt``,
``det/features.txt`` (optional) and ``gt/gt.txt`` (optional).
"""
from __future__ import annotations

import io
import os
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .core import BBox, Detection, ValidationError

PEDESTRIAN_CLASS = 1
DEFAULT_FRAME_RATE = 30.0

TextSource = Union[str, Iterable[str]]


class ParseError(ValueError):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class Annotation:
    """One box of an identity: a ground-truth row or a tracker output row."""

    frame: int
    identity: int
    bbox: BBox
    visibility: float = 1.0


@dataclass(frozen=True)
class LabelRecord:
    video_id: str
    label: int
    frame: int
    bbox: BBox
    feature: Optional[np.ndarray] = field(default=None, compare=False, repr=False)


@dataclass
class SequenceBundle:
    name: str
    frame_count: int
    frame_rate: float = DEFAULT_FRAME_RATE
    detections: list = field(default_factory=list)
    ground_truth: Optional[list] = None

    def __post_init__(self):
        for d in self.detections:
            if not 1 <= d.frame_index <= self.frame_count:
                raise ValidationError(
                    f"detection frame {d.frame_index} outside [1, {self.frame_count}]"
                )
        for g in self.ground_truth or ():
            if not 1 <= g.frame <= self.frame_count:
                raise ValidationError(f"ground-truth frame {g.frame} outside [1, {self.frame_count}]")
            if g.identity < 1:
                raise ValidationError(f"ground-truth identity must be positive, got {g.identity}")

    def detections_by_frame(self) -> dict[int, list[Detection]]:
        out = defaultdict(list)
        for d in self.detections:
            out[d.frame_index].append(d)
        return out

    @property
    def has_features(self) -> bool:
        return bool(self.detections) and all(d.feature is not None for d in self.detections)


def _lines(src: TextSource):
    if isinstance(src, str):
        src = io.StringIO(src)
    for number, line in enumerate(src, start=1):
        line = line.strip()
        if line:
            yield number, line


def _fmt(x: float) -> str:
    return repr(float(x))


def _fields(line: str, number: int, minimum: int) -> list[str]:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) < minimum:
        raise ParseError(f"expected at least {minimum} fields, got {len(parts)}", number)
    return parts


def _box(parts: list[str], number: int) -> BBox:
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise ParseError(f"bad number in box fields {parts}", number) from exc
    try:
        return BBox(*values)
    except ValidationError as exc:
        raise ValidationError(f"line {number}: {exc}") from exc


def _int(text: str, number: int, what: str) -> int:
    try:
        value = float(text)
    except ValueError as exc:
        raise ParseError(f"bad {what} {text!r}", number) from exc
    if value != int(value):
        raise ParseError(f"{what} must be integral, got {text!r}", number)
    return int(value)


def parse_detections(src: TextSource) -> list[Detection]:
    out = []
    for number, line in _lines(src):
        parts = _fields(line, number, 7)
        frame = _int(parts[0], number, "frame")
        box = _box(parts[2:6], number)
        try:
            conf = float(parts[6])
        except ValueError as exc:
            raise ParseError(f"bad confidence {parts[6]!r}", number) from exc
        try:
            out.append(Detection(frame, box, conf))
        except ValidationError as exc:
            raise ValidationError(f"line {number}: {exc}") from exc
    return out


def write_detections(detections: Iterable[Detection]) -> str:
    return "".join(
        f"{d.frame_index},-1,{','.join(_fmt(v) for v in d.bbox.as_tuple())},{_fmt(d.confidence)},-1,-1,-1\n"
        for d in detections
    )


def parse_ground_truth(src: TextSource, classes: Optional[set] = frozenset({PEDESTRIAN_CLASS})):
    """Evaluable ground-truth rows. ``classes=None`` keeps every class."""
    out = []
    for number, line in _lines(src):
        parts = _fields(line, number, 6)
        frame = _int(parts[0], number, "frame")
        identity = _int(parts[1], number, "identity")
        box = _box(parts[2:6], number)
        flag = _int(parts[6], number, "flag") if len(parts) > 6 else 1
        cls = _int(parts[7], number, "class") if len(parts) > 7 else PEDESTRIAN_CLASS
        try:
            vis = float(parts[8]) if len(parts) > 8 else 1.0
        except ValueError as exc:
            raise ParseError(f"bad visibility {parts[8]!r}", number) from exc
        if flag == 0 or (classes is not None and cls not in classes):
            continue
        out.append(Annotation(frame, identity, box, vis))
    return out


def write_ground_truth(records: Iterable[Annotation]) -> str:
    rows = sorted(records, key=lambda a: (a.frame, a.identity))
    return "".join(
        f"{a.frame},{a.identity},{','.join(_fmt(v) for v in a.bbox.as_tuple())},1,1,{_fmt(a.visibility)}\n"
        for a in rows
    )


def write_results(records: Iterable[Annotation]) -> str:
    rows = sorted(records, key=lambda a: (a.frame, a.identity))
    out = []
    for a in rows:
        if a.identity < 1:
            raise ValidationError(f"track ids must be positive, got {a.identity}")
        b = a.bbox
        out.append(
            f"{a.frame},{a.identity},{b.left:.2f},{b.top:.2f},{b.width:.2f},{b.height:.2f},1,-1,-1,-1\n"
        )
    return "".join(out)


def parse_results(src: TextSource) -> list[Annotation]:
    out = []
    for number, line in _lines(src):
        parts = _fields(line, number, 6)
        out.append(
            Annotation(
                _int(parts[0], number, "frame"),
                _int(parts[1], number, "identity"),
                _box(parts[2:6], number),
            )
        )
    return out


def read_features(src: TextSource, detections: list[Detection]) -> list[Detection]:
    """Attach L2-normalized feature vectors to ``detections``.

    ``detection_index`` counts detections within a frame, in list order.
    Detections without a row keep ``feature=None``.
    """
    index = defaultdict(list)
    for pos, d in enumerate(detections):
        index[d.frame_index].append(pos)
    features: dict[int, np.ndarray] = {}
    dim = None
    for number, line in _lines(src):
        if dim is None:
            if not line.startswith("dim="):
                raise ParseError("feature file must start with 'dim=<d>'", number)
            dim = _int(line[4:], number, "dim")
            if dim < 1:
                raise ParseError(f"dim must be positive, got {dim}", number)
            continue
        parts = _fields(line, number, 2)
        if len(parts) != dim + 2:
            raise ParseError(f"expected {dim} feature values, got {len(parts) - 2}", number)
        frame = _int(parts[0], number, "frame")
        k = _int(parts[1], number, "detection_index")
        slots = index.get(frame, [])
        if not 0 <= k < len(slots):
            raise ParseError(f"feature row refers to missing detection {k} of frame {frame}", number)
        try:
            vec = np.array([float(p) for p in parts[2:]])
        except ValueError as exc:
            raise ParseError("bad feature value", number) from exc
        norm = np.linalg.norm(vec)
        if not np.isfinite(norm) or norm == 0:
            raise ParseError("feature vector must be finite and non-zero", number)
        features[slots[k]] = vec / norm
    return [d.with_feature(features.get(pos)) for pos, d in enumerate(detections)]


def write_features(detections: list[Detection]) -> str:
    with_feat = [d for d in detections if d.feature is not None]
    if not with_feat:
        return ""
    dim = len(with_feat[0].feature)
    lines = [f"dim={dim}\n"]
    counter: dict[int, int] = defaultdict(int)
    for d in detections:
        k = counter[d.frame_index]
        counter[d.frame_index] += 1
        if d.feature is None:
            continue
        if len(d.feature) != dim:
            raise ValidationError(f"feature dimension {len(d.feature)} != {dim}")
        lines.append(f"{d.frame_index},{k},{','.join(_fmt(v) for v in d.feature)}\n")
    return "".join(lines)


def validate_labels(records: list[LabelRecord]) -> None:
    labels = sorted({r.label for r in records})
    if labels != list(range(len(labels))):
        raise ValidationError(f"labels must form a contiguous range from 0, got {labels[:10]}")
    owner: dict[int, str] = {}
    for r in records:
        if owner.setdefault(r.label, r.video_id) != r.video_id:
            raise ValidationError(f"label {r.label} appears in videos {owner[r.label]!r} and {r.video_id!r}")


def write_labels(records: list[LabelRecord]) -> str:
    validate_labels(records)
    out = []
    for r in records:
        if "," in r.video_id or not r.video_id:
            raise ValidationError(f"invalid video id {r.video_id!r}")
        row = [r.video_id, str(r.label), str(r.frame)] + [_fmt(v) for v in r.bbox.as_tuple()]
        if r.feature is not None:
            row.extend(_fmt(v) for v in r.feature)
        out.append(",".join(row) + "\n")
    return "".join(out)


def read_labels(src: TextSource) -> list[LabelRecord]:
    out = []
    for number, line in _lines(src):
        parts = _fields(line, number, 7)
        label = _int(parts[1], number, "label")
        if label < 0:
            raise ParseError(f"label must be non-negative, got {label}", number)
        feature = None
        if len(parts) > 7:
            try:
                feature = np.array([float(p) for p in parts[7:]])
            except ValueError as exc:
                raise ParseError("bad feature value", number) from exc
        out.append(
            LabelRecord(parts[0], label, _int(parts[2], number, "frame"), _box(parts[3:7], number), feature)
        )
    validate_labels(out)
    return out


def read_seqinfo(src: TextSource) -> dict[str, str]:
    info = {}
    for _, line in _lines(src):
        if line.startswith(("[", "#", ";")) or "=" not in line:
            continue
        key, value = line.split("=", 1)
        info[key.strip()] = value.strip()
    return info


def write_seqinfo(bundle: SequenceBundle) -> str:
    return (
        "[Sequence]\n"
        f"name={bundle.name}\n"
        f"frameRate={bundle.frame_rate:g}\n"
        f"seqLength={bundle.frame_count}\n"
    )


def read_sequence(directory: Union[str, os.PathLike]) -> SequenceBundle:
    """Load a MOT-style sequence directory; features and ground truth are optional."""
    root = Path(directory)
    det_path = root / "det" / "det.txt"
    if not det_path.is_file():
        raise FileNotFoundError(f"no detections at {det_path}")
    detections = parse_detections(det_path.read_text())
    feat_path = root / "det" / "features.txt"
    if feat_path.is_file():
        detections = read_features(feat_path.read_text(), detections)
    gt = None
    gt_path = root / "gt" / "gt.txt"
    if gt_path.is_file():
        gt = parse_ground_truth(gt_path.read_text())
    info_path = root / "seqinfo.ini"
    info = read_seqinfo(info_path.read_text()) if info_path.is_file() else {}
    frames = [d.frame_index for d in detections] + [g.frame for g in gt or ()]
    frame_count = int(info.get("seqLength", max(frames, default=0)))
    return SequenceBundle(
        name=info.get("name", root.name),
        frame_count=frame_count,
        frame_rate=float(info.get("frameRate", DEFAULT_FRAME_RATE)),
        detections=detections,
        ground_truth=gt,
    )


def write_sequence(bundle: SequenceBundle, directory: Union[str, os.PathLike]) -> Path:
    root = Path(directory)
    (root / "det").mkdir(parents=True, exist_ok=True)
    (root / "seqinfo.ini").write_text(write_seqinfo(bundle))
    (root / "det" / "det.txt").write_text(write_detections(bundle.detections))
    features = write_features(bundle.detections)
    if features:
        (root / "det" / "features.txt").write_text(features)
    if bundle.ground_truth is not None:
        (root / "gt").mkdir(exist_ok=True)
        (root / "gt" / "gt.txt").write_text(write_ground_truth(bundle.ground_truth))
    return root
