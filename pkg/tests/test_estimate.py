import numpy as np
import pytest

from cointqml import get_model, simulate_exact_gaussian
from cointqml.estimate import (EstimationError, EstimatorOptions, qml_estimate,
                               short_run_covariance)
from cointqml.kalman import quasi_log_likelihood
from cointqml.model import build_realization


@pytest.fixture(scope="module")
def fit2d(spec2d, path2d):
    return qml_estimate(spec2d, path2d, init=spec2d.theta0)


@pytest.fixture(scope="module")
def car1_path():
    spec = get_model("car1")
    r = build_realization(spec, spec.theta0)
    return spec, simulate_exact_gaussian(r, n=2000, rng=np.random.default_rng(8))


def test_estimate_improves_on_truth(spec2d, path2d, fit2d):
    L0 = quasi_log_likelihood(spec2d, spec2d.theta0, path2d).value
    assert fit2d.loglik <= L0
    assert fit2d.loglik == quasi_log_likelihood(spec2d, fit2d.theta, path2d).value
    assert spec2d.in_box(fit2d.theta)


def test_long_run_parameter_is_precise(fit2d):
    assert abs(fit2d.theta_long[0] - 3.0) < 0.05


def test_trace_is_monotone(fit2d):
    vals = [v for _, v in fit2d.trace]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == fit2d.loglik


def test_fixed_cointegration_space_is_worse(spec2d, path2d, fit2d):
    theta = fit2d.theta.copy()
    theta[12] = 2.0
    assert quasi_log_likelihood(spec2d, theta, path2d).value > fit2d.loglik


def test_sandwich_covariance(spec2d, path2d, fit2d):
    out = short_run_covariance(spec2d, fit2d.theta, path2d)
    assert out.cov.shape == (12, 12)
    np.testing.assert_array_equal(out.cov, out.cov.T)
    assert np.linalg.eigvalsh(out.cov)[0] > -1e-12
    assert out.hessian_asymmetry <= 1e-4 * np.linalg.norm(out.hessian)
    assert out.bandwidth == 12


def test_sandwich_rejects_boundary(spec2d, path2d):
    theta = spec2d.theta0.copy()
    theta[6] = spec2d.lower[6]
    with pytest.raises(EstimationError):
        short_run_covariance(spec2d, theta, path2d)


def test_too_short_series(spec2d, path2d):
    with pytest.raises(EstimationError):
        qml_estimate(spec2d, path2d.Y[:10], init=spec2d.theta0)


def test_all_starts_infeasible(spec2d, path2d):
    theta = spec2d.theta0.copy()
    theta[9:12] = [0.05, -1.0, 0.05]
    with pytest.raises(EstimationError):
        qml_estimate(spec2d, path2d, init=[theta, theta])


def test_init_outside_box(spec2d, path2d):
    with pytest.raises(ValueError):
        qml_estimate(spec2d, path2d, init=spec2d.upper + 1)


def test_car1_optimizers_agree(car1_path):
    spec, y = car1_path
    nm = qml_estimate(spec, y, starts=2, rng=np.random.default_rng(0))
    lb = qml_estimate(spec, y, starts=2, rng=np.random.default_rng(0),
                      options=EstimatorOptions(method="l-bfgs-b"))
    assert nm.converged
    np.testing.assert_allclose(lb.theta, nm.theta, atol=1e-3)
    assert abs(lb.loglik - nm.loglik) < 1e-7
    np.testing.assert_allclose(nm.theta, spec.theta0, atol=0.15)


def test_reproducible(car1_path):
    spec, y = car1_path
    a = qml_estimate(spec, y, starts=2, rng=np.random.default_rng(4))
    b = qml_estimate(spec, y, starts=2, rng=np.random.default_rng(4))
    np.testing.assert_array_equal(a.theta, b.theta)
    assert a.evaluations == b.evaluations


def test_car1_sandwich_matches_spread(car1_path):
    spec, y = car1_path
    fit = qml_estimate(spec, y, init=spec.theta0)
    out = short_run_covariance(spec, fit.theta, y)
    # asymptotic sd of the mean-reversion rate for an OU sampled at h = 1: about 0.05 at n = 2000
    assert 0.02 < out.se[0] < 0.1


def test_sign_flip_invariance(spec2d, path2d):
    # Y -> -Y leaves the Gaussian likelihood unchanged at every parameter
    for theta in (spec2d.theta0, spec2d.theta0 + 0.05):
        a = quasi_log_likelihood(spec2d, theta, path2d).value
        b = quasi_log_likelihood(spec2d, theta, -path2d.Y).value
        assert a == pytest.approx(b, abs=1e-12)
