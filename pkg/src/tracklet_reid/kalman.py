"""Constant-velocity Kalman filter in ``(cx, cy, aspect, height)`` measurement space.

The state is the measurement plus its per-frame velocity. Process and
measurement noise scale with the box height so the filter behaves the same for
near and far targets.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# chi-square 0.95 quantile, 4 degrees of freedom
CHI2_95_4DOF = 9.4877
NOISE_FLOOR = 1e-9


class KalmanError(ValueError):
    pass


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    def measurement(self) -> np.ndarray:
        return self.mean[:4].copy()


@dataclass(frozen=True)
class KalmanConfig:
    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160
    std_aspect: float = 1e-2
    std_aspect_velocity: float = 1e-5
    std_aspect_measurement: float = 1e-1


_F = np.eye(8)
for _i in range(4):
    _F[_i, 4 + _i] = 1.0
_H = np.eye(4, 8)


class KalmanFilter:
    """Filter operations as pure functions of ``KalmanState``."""

    def __init__(self, config: KalmanConfig | None = None):
        self.config = config or KalmanConfig()

    def _std(self, height, pos_scale, vel_scale, aspect, aspect_vel):
        c = self.config
        p = pos_scale * c.std_weight_position * height
        v = vel_scale * c.std_weight_velocity * height
        std = np.array([p, p, aspect, p, v, v, aspect_vel, v])
        return np.maximum(np.square(std), NOISE_FLOOR)

    def initiate(self, measurement) -> KalmanState:
        z = np.asarray(measurement, dtype=np.float64)
        if not z[3] > 0:
            raise KalmanError(f"measurement height must be positive, got {z[3]}")
        mean = np.concatenate([z, np.zeros(4)])
        c = self.config
        var = self._std(z[3], 2.0, 10.0, c.std_aspect, c.std_aspect_velocity)
        return KalmanState(mean, np.diag(var))

    def process_noise(self, state: KalmanState) -> np.ndarray:
        c = self.config
        return np.diag(self._std(state.mean[3], 1.0, 1.0, c.std_aspect, c.std_aspect_velocity))

    def measurement_noise(self, state: KalmanState) -> np.ndarray:
        c = self.config
        p = c.std_weight_position * state.mean[3]
        std = np.array([p, p, c.std_aspect_measurement, p])
        return np.diag(np.maximum(np.square(std), NOISE_FLOOR))

    def predict(self, state: KalmanState) -> KalmanState:
        mean = _F @ state.mean
        cov = _F @ state.covariance @ _F.T + self.process_noise(state)
        return KalmanState(mean, _symmetrize(cov))

    def project(self, state: KalmanState) -> tuple[np.ndarray, np.ndarray]:
        """Predicted measurement and innovation covariance."""
        mean = _H @ state.mean
        cov = _H @ state.covariance @ _H.T + self.measurement_noise(state)
        return mean, _symmetrize(cov)

    def _factor(self, cov):
        try:
            return scipy.linalg.cho_factor(cov, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise KalmanError("innovation covariance is not positive definite") from exc

    def update(self, state: KalmanState, measurement) -> KalmanState:
        z = np.asarray(measurement, dtype=np.float64)
        proj_mean, proj_cov = self.project(state)
        factor = self._factor(proj_cov)
        pht = state.covariance @ _H.T
        gain = scipy.linalg.cho_solve(factor, pht.T, check_finite=False).T
        mean = state.mean + gain @ (z - proj_mean)
        # Joseph form keeps the posterior PSD under rounding
        ikh = np.eye(8) - gain @ _H
        cov = ikh @ state.covariance @ ikh.T + gain @ self.measurement_noise(state) @ gain.T
        return KalmanState(mean, _symmetrize(cov))

    def gating_distance(self, state: KalmanState, measurements) -> np.ndarray:
        """Squared Mahalanobis distance of each measurement to the predicted one."""
        z = np.atleast_2d(np.asarray(measurements, dtype=np.float64))
        if z.size == 0:
            return np.zeros(0)
        proj_mean, proj_cov = self.project(state)
        try:
            chol = np.linalg.cholesky(proj_cov)
        except np.linalg.LinAlgError as exc:
            raise KalmanError("innovation covariance is not positive definite") from exc
        d = z - proj_mean
        w = scipy.linalg.solve_triangular(chol, d.T, lower=True, check_finite=False)
        return np.sum(w * w, axis=0)


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


_DEFAULT = KalmanFilter()
initiate = _DEFAULT.initiate
predict = _DEFAULT.predict
update = _DEFAULT.update
gating_distance = _DEFAULT.gating_distance
