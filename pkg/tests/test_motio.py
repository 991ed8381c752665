import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tracklet_reid.core import BBox, Detection, ValidationError
from tracklet_reid.motio import (
    Annotation,
    LabelRecord,
    ParseError,
    SequenceBundle,
    parse_detections,
    parse_ground_truth,
    parse_results,
    read_features,
    read_labels,
    read_seqinfo,
    read_sequence,
    validate_labels,
    write_detections,
    write_features,
    write_ground_truth,
    write_labels,
    write_results,
    write_seqinfo,
    write_sequence,
)


def test_parse_detection_example():
    (d,) = parse_detections("1,-1,10,20,30,40,0.9,-1,-1,-1\n")
    assert d == Detection(1, BBox(10, 20, 30, 40), 0.9)
    assert parse_detections("") == []
    with pytest.raises(ValidationError):
        parse_detections("1,-1,10,20,0,40,0.9,-1,-1,-1")


def test_parse_errors_carry_line_number():
    with pytest.raises(ParseError) as exc:
        parse_detections("1,-1,10,20,30,40,0.9\n\n2,-1,x,20,30,40,0.9\n")
    assert exc.value.line_number == 3
    with pytest.raises(ParseError) as exc:
        parse_ground_truth("1,3,10,20\n")
    assert exc.value.line_number == 1


def test_parse_ground_truth_examples():
    (r,) = parse_ground_truth("1,3,10,20,30,40,1,1,1.0")
    assert r == Annotation(1, 3, BBox(10, 20, 30, 40), 1.0)
    assert parse_ground_truth("1,3,10,20,30,40,0,1,1.0") == []
    text = "1,3,10,20,30,40,1,1,1.0\n2,3,10,20,30,40,0,1,1.0\n2,4,1,2,3,4,1,1,0.5\n"
    assert len(parse_ground_truth(text)) == 2
    # non-pedestrian class is not evaluated
    assert parse_ground_truth("1,3,10,20,30,40,1,7,1.0") == []


def test_write_results_example():
    out = write_results([Annotation(1, 1, BBox(10, 20, 30, 40))])
    assert out == "1,1,10.00,20.00,30.00,40.00,1,-1,-1,-1\n"
    assert write_results([]) == ""


def test_features_example():
    dets = parse_detections("1,-1,10,20,30,40,0.9\n")
    (d,) = read_features("dim=2\n1,0,3,4\n", dets)
    np.testing.assert_allclose(d.feature, [0.6, 0.8])
    assert all(x.feature is None for x in read_features("dim=2\n", dets))
    three = parse_detections("1,-1,1,1,5,5,1\n1,-1,9,1,5,5,1\n1,-1,20,1,5,5,1\n")
    with pytest.raises(ParseError):
        read_features("dim=2\n1,7,3,4\n", three)
    with pytest.raises(ParseError):
        read_features("dim=2\n1,0,3,4,5\n", three)


def _record(video, label):
    return LabelRecord(video, label, 1, BBox(0, 0, 1, 1), None)


def test_label_validation():
    validate_labels([_record("a", k) for k in range(3)] + [_record("b", 3), _record("b", 4)])
    with pytest.raises(ValidationError):
        validate_labels([_record("a", 0), _record("a", 2)])
    with pytest.raises(ValidationError):
        validate_labels([_record("a", 0), _record("b", 0)])


floats = st.floats(-1e4, 1e4, allow_nan=False)
sizes = st.floats(0.01, 1e4, allow_nan=False)
boxes = st.builds(BBox, floats, floats, sizes, sizes)
frames = st.integers(1, 10_000)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.builds(Detection, frames, boxes, st.floats(0, 1)), max_size=40))
def test_detection_round_trip(dets):
    assert parse_detections(write_detections(dets)) == dets


@settings(max_examples=25, deadline=None)
@given(st.lists(st.builds(Annotation, frames, st.integers(1, 500), boxes, st.floats(0, 1)), max_size=40))
def test_ground_truth_round_trip(rows):
    parsed = parse_ground_truth(write_ground_truth(rows))
    assert parsed == sorted(rows, key=lambda a: (a.frame, a.identity))


def random_records(rng, n):
    """Randomized inputs shared by the 1000-record round-trip checks."""
    dets, gt, res = [], [], []
    for _ in range(n):
        frame = int(rng.integers(1, 200))
        box = BBox(*rng.uniform(-100, 1000, 2), *rng.uniform(0.5, 300, 2))
        feat = rng.standard_normal(8)
        dets.append(Detection(frame, box, float(rng.uniform()), feat / np.linalg.norm(feat)))
        gt.append(Annotation(frame, int(rng.integers(1, 50)), box, float(rng.uniform())))
        cents = rng.integers(1, 100_000, 4)
        res.append(Annotation(frame, int(rng.integers(1, 50)), BBox(*(cents[:2] - 50_000) / 100, *cents[2:] / 100)))
    return dets, gt, res


def test_round_trips_1000_records(rng):
    dets, gt, res = random_records(rng, 1000)
    assert parse_detections(write_detections(dets)) == dets
    text = write_ground_truth(gt)
    assert write_ground_truth(parse_ground_truth(text)) == text
    text = write_results(res)
    assert write_results(parse_results(text)) == text
    assert parse_results(text) == sorted(res, key=lambda a: (a.frame, a.identity))
    back = read_features(write_features(dets), [d.with_feature(None) for d in dets])
    np.testing.assert_allclose([d.feature for d in back], [d.feature for d in dets], atol=1e-12)


def test_label_round_trip(rng):
    records = []
    for label in range(1000):
        video = f"vid{label // 100}"
        feature = rng.standard_normal(4) if label % 2 else None
        records.append(LabelRecord(video, label, label + 1, BBox(*rng.uniform(0, 50, 2), 3.5, 7.25), feature))
    back = read_labels(io.StringIO(write_labels(records)))
    assert len(back) == 1000
    for a, b in zip(records, back):
        assert (a.video_id, a.label, a.frame, a.bbox) == (b.video_id, b.label, b.frame, b.bbox)
        if a.feature is None:
            assert b.feature is None
        else:
            np.testing.assert_array_equal(a.feature, b.feature)


def test_sequence_round_trip(tmp_path, rng):
    dets, gt, _ = random_records(rng, 200)
    bundle = SequenceBundle("seq-a", 200, 25.0, dets, gt)
    write_sequence(bundle, tmp_path / "seq-a")
    info = read_seqinfo((tmp_path / "seq-a" / "seqinfo.ini").read_text())
    assert info == {"name": "seq-a", "frameRate": "25", "seqLength": "200"}
    back = read_sequence(tmp_path / "seq-a")
    assert (back.name, back.frame_count, back.frame_rate) == ("seq-a", 200, 25.0)
    assert back.detections == dets
    assert back.ground_truth == sorted(gt, key=lambda a: (a.frame, a.identity))
    assert write_seqinfo(back) == write_seqinfo(bundle)


def test_sequence_without_seqinfo(tmp_path):
    (tmp_path / "s" / "det").mkdir(parents=True)
    (tmp_path / "s" / "det" / "det.txt").write_text("3,-1,1,2,3,4,0.5\n7,-1,1,2,3,4,0.5\n")
    b = read_sequence(tmp_path / "s")
    assert (b.name, b.frame_count, b.frame_rate, b.ground_truth) == ("s", 7, 30.0, None)
    assert not b.has_features
