import numpy as np
import pytest

from vdvcarleman.ekf import EkfState, ekf_predict, ekf_rhs
from vdvcarleman.model import PARAM_SET1, ReactorParams, X0_SET1, drift
from vdvcarleman.moments import PhysicalMoments, integrate, integrate_physical, ou_mean

P0_SET1 = np.diag([1.0, 1.0, 0.01])


def test_ekf_state_symmetrizes_and_validates():
    s = EkfState(mean=np.zeros(3), cov=np.array([[1.0, 0.4, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    assert s.cov[0, 1] == s.cov[1, 0] == 0.2
    with pytest.raises(ValueError):
        EkfState(mean=np.zeros(2), cov=np.eye(3))


def test_flow_rate_row_decouples():
    # dP33 depends only on P33: the OU coordinate is linear, the EKF is exact there.
    rng = np.random.default_rng(8)
    p = PARAM_SET1
    for _ in range(10):
        c = rng.normal(size=(3, 3))
        cov = c @ c.T
        d = ekf_rhs(EkfState(mean=rng.normal(size=3), cov=cov), p)
        assert np.isclose(d.cov[2, 2], p.beta**2 - 2 * p.alpha * cov[2, 2], rtol=1e-12)


def test_ekf_rhs_initial_variance_rate():
    d = ekf_rhs(EkfState(mean=X0_SET1.as_array(), cov=P0_SET1), PARAM_SET1)
    # 2*F11*P11 with F13 contribution zero because P13(0) = 0.
    assert np.isclose(d.cov[0, 0], 2 * (-0.0315008) * 1.0, rtol=1e-10)
    assert np.isclose(d.cov[0, 0], -0.0630016, rtol=1e-10)


def test_zero_noise_zero_cov_stays_zero():
    p = ReactorParams(k1=0.01388, k2=0.02778, k3=0.002778, caf=0.0027, v=10.0, alpha=0.1, beta=0.0)
    series = ekf_predict(p, X0_SET1.as_array(), np.zeros((3, 3)), 0.01, 50.0)
    assert np.abs(series.cov).max() == 0.0


def test_ekf_mean_equals_deterministic_ode_solution():
    # Mean propagation is independent of the covariance, so it must match
    # the plain RK4 solution of the drift ODE on the same grid.
    p = PARAM_SET1
    series = ekf_predict(p, X0_SET1.as_array(), P0_SET1, 0.01, 20.0)
    _, ode = integrate(lambda y: drift(y, p), X0_SET1.as_array(), 0.01, 20.0)
    assert np.abs(series.mean - ode).max() <= 1e-12


def test_ekf_flow_mean_and_stationary_variance():
    p = PARAM_SET1
    series = ekf_predict(p, X0_SET1.as_array(), P0_SET1, 0.01, 200.0)
    exact = ou_mean(0.009528, p.alpha, series.t)
    assert np.max(np.abs(series.mean[:, 2] - exact) / np.abs(exact)) <= 1e-8
    # Riccati fixed point of the linear coordinate: b^2/(2a)
    assert np.isclose(series.at_time(200.0)[1][2, 2], 0.00968, atol=1e-9)


def test_ekf_p33_identical_to_moment_path():
    p = PARAM_SET1
    ekf = ekf_predict(p, X0_SET1.as_array(), P0_SET1, 0.01, 20.0)
    phys = integrate_physical(
        p, PhysicalMoments.from_mean_cov(X0_SET1.as_array(), P0_SET1), 0.01, 20.0
    )
    assert np.abs(ekf.cov[:, 2, 2] - phys.cov[:, 2, 2]).max() <= 1e-12


def test_t_end_zero_returns_initial_state_only():
    series = ekf_predict(PARAM_SET1, X0_SET1.as_array(), P0_SET1, 0.01, 0.0)
    assert series.t.shape == (1,)
    assert np.array_equal(series.mean[0], X0_SET1.as_array())
    assert np.array_equal(series.cov[0], P0_SET1)


def test_ekf_covariance_symmetric_along_path():
    series = ekf_predict(PARAM_SET1, X0_SET1.as_array(), P0_SET1, 0.01, 10.0)
    assert np.abs(series.cov - series.cov.transpose(0, 2, 1)).max() == 0.0
