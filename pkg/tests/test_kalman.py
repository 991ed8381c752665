import numpy as np
import pytest

from tracklet_reid.kalman import KalmanError, KalmanFilter, KalmanState, initiate, predict, update

kf = KalmanFilter()


def random_measurement(rng):
    return np.array([rng.uniform(0, 1000), rng.uniform(0, 600), rng.uniform(0.3, 0.6), rng.uniform(40, 200)])


def test_initiate():
    s = initiate([5, 5, 1, 10])
    np.testing.assert_array_equal(s.mean, [5, 5, 1, 10, 0, 0, 0, 0])
    np.testing.assert_array_equal(s.covariance, s.covariance.T)
    assert np.all(np.linalg.eigvalsh(s.covariance) > 0)
    with pytest.raises(KalmanError):
        initiate([5, 5, 1, 0])


def test_predict_constant_velocity():
    s = initiate([10, 20, 0.5, 100])
    s = KalmanState(s.mean + np.array([0, 0, 0, 0, 1, -1, 0, 0]), s.covariance)
    p = predict(s)
    np.testing.assert_allclose(p.mean[:2], [11, 19])
    p0 = predict(initiate([10, 20, 0.5, 100]))
    np.testing.assert_array_equal(p0.mean[:4], [10, 20, 0.5, 100])


def test_predict_grows_trace(rng):
    for _ in range(100):
        s = predict(initiate(random_measurement(rng)))
        assert np.trace(predict(s).covariance) > np.trace(s.covariance)


def test_zero_innovation_keeps_mean(rng):
    s = predict(predict(initiate(random_measurement(rng))))
    u = update(s, s.mean[:4])
    np.testing.assert_allclose(u.mean, s.mean, atol=1e-9)


def test_update_does_not_grow_trace(rng):
    for _ in range(200):
        s = predict(initiate(random_measurement(rng)))
        u = update(s, random_measurement(rng))
        assert np.trace(u.covariance) <= np.trace(s.covariance) + 1e-9


def test_repeated_updates_converge():
    s = initiate([100, 100, 0.5, 100])
    target = np.array([120, 90, 0.45, 110])
    errors = []
    for _ in range(60):
        s = update(predict(s), target)
        errors.append(np.abs(s.mean[:4] - target).max())
    assert errors[-1] < 0.1 * errors[0]
    assert errors[-1] < 0.5


def test_gating_distance():
    s = predict(initiate([100, 100, 0.5, 100]))
    mean, cov = kf.project(s)
    assert kf.gating_distance(s, [mean])[0] == pytest.approx(0.0, abs=1e-12)
    # S is diagonal here, so a 2-sigma offset in one coordinate contributes 4
    assert np.count_nonzero(cov - np.diag(np.diag(cov))) == 0
    z = mean.copy()
    z[0] += 2 * np.sqrt(cov[0, 0])
    assert kf.gating_distance(s, [z])[0] == pytest.approx(4.0, rel=1e-9)


def test_gating_distance_non_negative(rng):
    s = initiate(random_measurement(rng))
    for _ in range(5):
        s = update(predict(s), random_measurement(rng))
    d = kf.gating_distance(s, np.array([random_measurement(rng) for _ in range(50)]))
    assert d.shape == (50,) and np.all(d >= 0)


def test_pure_functions(rng):
    s = initiate(random_measurement(rng))
    before = s.covariance.copy()
    a, b = predict(s), predict(s)
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.covariance, b.covariance)
    np.testing.assert_array_equal(s.covariance, before)
