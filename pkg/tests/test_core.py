import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tracklet_reid.core import (
    BBox,
    Detection,
    Track,
    TrackState,
    ValidationError,
    bbox_to_measurement,
    iou,
    iou_matrix,
    measurement_to_bbox,
)
from tracklet_reid.kalman import initiate

coords = st.floats(-500, 500, allow_nan=False)
sizes = st.floats(0.5, 300, allow_nan=False)
boxes = st.builds(BBox, coords, coords, sizes, sizes)


def test_iou_examples():
    a = BBox(0, 0, 10, 10)
    assert iou(a, BBox(0, 0, 10, 10)) == 1.0
    assert iou(a, BBox(20, 20, 5, 5)) == 0.0
    # intersection 50, union 150
    assert iou(a, BBox(5, 0, 10, 10)) == pytest.approx(50 / 150, abs=1e-12)


def test_touching_boxes_do_not_overlap():
    assert iou(BBox(0, 0, 10, 10), BBox(10, 0, 10, 10)) == 0.0


@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


@given(boxes)
def test_iou_self_is_one(a):
    assert iou(a, a) == pytest.approx(1.0, abs=1e-12)


@given(st.lists(boxes, max_size=5), st.lists(boxes, max_size=5))
def test_iou_matrix_matches_scalar(a, b):
    m = iou_matrix(a, b)
    assert m.shape == (len(a), len(b))
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            assert m[i, j] == pytest.approx(iou(x, y), abs=1e-12)


def test_measurement_examples():
    np.testing.assert_allclose(bbox_to_measurement(BBox(0, 0, 10, 10)), [5, 5, 1, 10])
    np.testing.assert_allclose(bbox_to_measurement(BBox(0, 0, 10, 20)), [5, 10, 0.5, 20])


@given(boxes)
def test_measurement_round_trip(b):
    back = measurement_to_bbox(bbox_to_measurement(b))
    for x, y in zip(back.as_tuple(), b.as_tuple()):
        assert math.isclose(x, y, rel_tol=1e-9, abs_tol=1e-9)


@pytest.mark.parametrize("args", [(0, 0, 0, 10), (0, 0, 10, -1), (math.nan, 0, 1, 1), (0, math.inf, 1, 1)])
def test_invalid_boxes(args):
    with pytest.raises(ValidationError):
        BBox(*args)


def test_detection_invariants():
    box = BBox(0, 0, 1, 1)
    with pytest.raises(ValidationError):
        Detection(0, box)
    with pytest.raises(ValidationError):
        Detection(1, box, feature=np.array([1.0, 1.0]))
    d = Detection(1, box, 0.5, np.array([0.6, 0.8]))
    assert d.feature is not None


def test_track_transitions():
    t = Track(id=1, kalman=initiate([5, 5, 1, 10]))
    t.transition(TrackState.CONFIRMED)
    t.transition(TrackState.DELETED)
    with pytest.raises(ValidationError):
        t.transition(TrackState.CONFIRMED)
    t2 = Track(id=2, kalman=initiate([5, 5, 1, 10]))
    t2.transition(TrackState.DELETED)
    with pytest.raises(ValidationError):
        t2.transition(TrackState.TENTATIVE)


def test_gallery_budget_evicts_oldest():
    t = Track(id=1, kalman=initiate([5, 5, 1, 10]))
    for k in range(5):
        t.add_feature(np.array([float(k)]), budget=3)
    assert [float(g[0]) for g in t.gallery] == [2.0, 3.0, 4.0]
