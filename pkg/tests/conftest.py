import numpy as np
import pytest

from tracklet_reid.core import BBox, Detection


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def det(frame, left, top, width=20.0, height=40.0, feature=None, conf=1.0):
    return Detection(frame, BBox(left, top, width, height), conf, None if feature is None else unit(feature))
