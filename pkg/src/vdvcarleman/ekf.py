"""Continuous-time EKF prediction for the reactor SDE.

The benchmark estimator: between observations the extended Kalman filter
propagates the mean through the nonlinear drift and the covariance
through the Jacobian-linearized Lyapunov equation,

    dm/dt = f(m),      dP/dt = F(m) P + P F(m)^T + G G^T,

with F the drift Jacobian and G the constant diffusion column.  The full
3-state vector is estimated, including the flow rate, so the information
set matches the Carleman moment path.  No measurement updates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model
from .model import ReactorParams
from .moments import MomentSeries, integrate


@dataclass(frozen=True)
class EkfState:
    """Predicted mean and covariance of the 3-state reactor."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.shape != (3,) or cov.shape != (3, 3):
            raise ValueError("EkfState needs a 3-vector mean and 3x3 covariance")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("EKF state must be finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))


def _ekf_rhs_flat(y: np.ndarray, p: ReactorParams) -> np.ndarray:
    m = y[:3]
    cov = y[3:].reshape(3, 3)
    f = model.drift(m, p)
    jac = model.jacobian(m, p)
    g = model.diffusion(p)
    dcov = jac @ cov + cov @ jac.T + np.outer(g, g)
    return np.concatenate([f, dcov.ravel()])


def ekf_rhs(s: EkfState, p: ReactorParams) -> EkfState:
    """Time derivative of the EKF prediction state (same container)."""
    dy = _ekf_rhs_flat(np.concatenate([s.mean, s.cov.ravel()]), p)
    return EkfState(mean=dy[:3], cov=dy[3:].reshape(3, 3))


def ekf_predict(p: ReactorParams, x0: np.ndarray, cov0: np.ndarray, dt: float, t_end: float) -> MomentSeries:
    """Deterministic EKF prediction series on the shared fixed-step grid."""
    x0 = np.asarray(x0, dtype=float)
    cov0 = np.asarray(cov0, dtype=float)
    y0 = np.concatenate([x0, cov0.ravel()])

    def symmetrize(y):
        cov = y[3:].reshape(3, 3)
        y[3:] = (0.5 * (cov + cov.T)).ravel()
        return y

    t, ys = integrate(lambda y: _ekf_rhs_flat(y, p), y0, dt, t_end, post_step=symmetrize)
    return MomentSeries(dt=dt, t=t, mean=ys[:, :3], cov=ys[:, 3:].reshape(t.size, 3, 3))
