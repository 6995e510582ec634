import numpy as np
import pytest

from cointqml.catalog import DELTA_2D, nig_driver_2d, nig_driver_3d
from cointqml.levy import (NIG, Brownian, levy_covariance, levy_from_dict, levy_mean,
                           levy_to_dict, sample_increments)
from cointqml.model import vech


def test_nig_2d_covariance_and_mean():
    cfg = nig_driver_2d()
    np.testing.assert_allclose(vech(levy_covariance(cfg)), [0.4751, -0.1622, 0.3708], atol=5e-5)
    np.testing.assert_allclose(cfg.mu, -np.array([3.0, 2.0]) / (2 * np.sqrt(31)), atol=1e-10)
    np.testing.assert_allclose(levy_mean(cfg), 0.0, atol=1e-14)


def test_nig_3d_covariance():
    S = levy_covariance(nig_driver_3d())
    np.testing.assert_allclose(vech(S), [0.5310, -0.1934, 0.1678, 0.3784, -0.2227, 0.5632],
                               atol=5e-5)


def test_nig_closed_form_covariance():
    # Sigma = delta / kappa * (Delta + Delta beta beta' Delta / kappa^2)
    cfg = NIG.centered(3.0, [1.0, 1.0], 1.0, DELTA_2D)
    b = cfg.Delta @ cfg.beta
    kappa = np.sqrt(9.0 - cfg.beta @ b)
    ref = (cfg.Delta + np.outer(b, b) / kappa**2) / kappa
    np.testing.assert_allclose(levy_covariance(cfg), ref, rtol=1e-14)


def test_nig_sample_moments():
    cfg = nig_driver_2d()
    x = sample_increments(cfg, 1.0, 200_000, np.random.default_rng(0))
    se = np.sqrt(np.diag(levy_covariance(cfg)) / len(x))
    assert np.all(np.abs(x.mean(axis=0)) < 5 * se)
    np.testing.assert_allclose(np.cov(x.T), levy_covariance(cfg), atol=0.01)


def test_nig_convolution_in_time():
    # two increments of length 1/2 have the law of one increment of length 1
    cfg = nig_driver_2d()
    rng = np.random.default_rng(1)
    half = sample_increments(cfg, 0.5, 400_000, rng).reshape(200_000, 2, 2).sum(axis=1)
    full = sample_increments(cfg, 1.0, 200_000, rng)
    np.testing.assert_allclose(np.cov(half.T), np.cov(full.T), atol=0.012)
    # third moments reflect the skewness and must agree as well
    m3h = np.mean((half - half.mean(0)) ** 3, axis=0)
    m3f = np.mean((full - full.mean(0)) ** 3, axis=0)
    np.testing.assert_allclose(m3h, m3f, atol=0.03)


def test_brownian_increments():
    S = np.array([[1.0, 0.3], [0.3, 0.5]])
    x = sample_increments(Brownian(S), 0.25, 100_000, np.random.default_rng(2))
    np.testing.assert_allclose(np.cov(x.T), 0.25 * S, atol=0.005)


@pytest.mark.parametrize("kw", [
    {"delta": -1.0},
    {"Delta": np.array([[2.0, 0.0], [0.0, 1.0]])},
    {"alpha": 0.5},
])
def test_nig_validation(kw):
    base = dict(mu=np.zeros(2), alpha=3.0, beta=np.ones(2), delta=1.0, Delta=DELTA_2D)
    base.update(kw)
    with pytest.raises(ValueError):
        NIG(**base)


def test_driver_dict_round_trip():
    cfg = nig_driver_2d()
    back = levy_from_dict(levy_to_dict(cfg))
    np.testing.assert_allclose(levy_covariance(back), levy_covariance(cfg), rtol=1e-14)
    with pytest.raises(ValueError):
        levy_from_dict({"type": "stable"})
