import numpy as np
import pytest
from scipy.integrate import quad_vec
from scipy.linalg import solve_discrete_are

from cointqml.matfun import (DAREError, dare_residual, lower_triangular_orthocomplement,
                             matrix_exponential, sampled_system, solve_dare, spectral_radius,
                             steady_state_filter)


def _taylor_expm(M, terms=60):
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


def test_expm_matches_taylor_series():
    rng = np.random.default_rng(0)
    M = 0.5 * rng.standard_normal((5, 5))
    np.testing.assert_allclose(matrix_exponential(M), _taylor_expm(M), rtol=1e-12, atol=1e-13)


def test_expm_rejects_bad_input():
    with pytest.raises(ValueError):
        matrix_exponential(np.array([[np.nan]]))
    with pytest.raises(OverflowError):
        matrix_exponential(np.array([[1000.0]]))
    with pytest.raises(ValueError):
        matrix_exponential(np.ones((2, 3)))


def test_scalar_noise_covariance_closed_form():
    Phi, S = sampled_system(np.array([[-3.0]]), np.array([[1.0]]), np.array([[1.0]]), 1.0)
    assert Phi[0, 0] == pytest.approx(np.exp(-3.0), rel=1e-14)
    assert S[0, 0] == pytest.approx((1 - np.exp(-6.0)) / 6.0, rel=1e-13)


def test_noise_covariance_matches_quadrature(real2d):
    A, B, SL = real2d.A, real2d.B, real2d.Sigma_L
    Q = B @ SL @ B.T
    _, S = sampled_system(A, B, SL, 1.0)
    ref, _ = quad_vec(lambda u: matrix_exponential(A * u) @ Q @ matrix_exponential(A * u).T,
                      0.0, 1.0, epsabs=1e-14, epsrel=1e-12)
    assert np.max(np.abs(S - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_noise_covariance_semigroup(real2d):
    A, B, SL = real2d.A, real2d.B, real2d.Sigma_L
    P1, S1 = sampled_system(A, B, SL, 0.5)
    P2, S2 = sampled_system(A, B, SL, 1.0)
    np.testing.assert_allclose(P2, P1 @ P1, atol=1e-13)
    np.testing.assert_allclose(S2, P1 @ S1 @ P1.T + S1, atol=1e-12)
    np.testing.assert_array_equal(S2, S2.T)


def test_sampled_system_validation():
    with pytest.raises(ValueError):
        sampled_system(np.eye(1), np.eye(1), np.eye(1), 0.0)
    with pytest.raises(ValueError):
        sampled_system(np.eye(2), np.eye(2), np.array([[1.0, 0.0], [0.0, -1.0]]), 1.0)


def test_dare_toy_problem():
    Phi = np.diag([0.5, 0.9])
    C = np.array([[1.0, 1.0]])
    Sigma = np.eye(2)
    Omega = solve_dare(Phi, C, Sigma)
    assert dare_residual(Omega, Phi, C, Sigma) <= 1e-10 * (1 + np.linalg.norm(Omega))
    _, K, V, F = steady_state_filter(Phi, C, Sigma)
    assert spectral_radius(F) < 1
    np.testing.assert_allclose(K, Phi @ Omega @ C.T / V[0, 0], rtol=1e-12)
    # oracle: the dual control Riccati equation with a vanishing measurement noise
    ref = solve_discrete_are(Phi.T, C.T, Sigma, 1e-12 * np.eye(1))
    np.testing.assert_allclose(Omega, ref, rtol=1e-6)


def test_dare_rejects_rank_deficient_c():
    with pytest.raises(DAREError):
        solve_dare(np.diag([0.5, 0.2]), np.array([[1.0, 1.0], [1.0, 1.0]]), np.eye(2))


def test_dare_reports_unstable_closed_loop():
    # unobservable unit root: no filter can stabilize it
    Phi = np.diag([1.0, 0.5])
    C = np.array([[0.0, 1.0]])
    with pytest.raises(DAREError):
        solve_dare(Phi, C, np.eye(2))


def test_dare_models_at_truth(real2d):
    Phi, S = sampled_system(real2d.A, real2d.B, real2d.Sigma_L, 1.0)
    Omega, K, V, F = steady_state_filter(Phi, real2d.C, S)
    assert dare_residual(Omega, Phi, real2d.C, S) <= 1e-10 * (1 + np.linalg.norm(Omega))
    assert spectral_radius(F) < 1


def test_orthocomplement_two_dim():
    P = lower_triangular_orthocomplement(np.array([[0.8], [0.6]]))
    np.testing.assert_allclose(P, [[0.6], [-0.8]], atol=1e-14)


def test_orthocomplement_three_dim():
    rng = np.random.default_rng(3)
    for c in (1, 2):
        C1 = np.linalg.qr(rng.standard_normal((3, c)))[0]
        P = lower_triangular_orthocomplement(C1)
        assert P.shape == (3, 3 - c)
        np.testing.assert_allclose(P.T @ P, np.eye(3 - c), atol=1e-12)
        np.testing.assert_allclose(P.T @ C1, 0.0, atol=1e-12)
        assert np.allclose(np.triu(P.T, 1)[:, : 3 - c], 0.0) or np.allclose(np.triu(P[:3 - c], 1), 0.0)
        for j in range(3 - c):
            assert np.all(P[:j, j] == 0.0)


def test_orthocomplement_errors():
    assert lower_triangular_orthocomplement(np.eye(2)).shape == (2, 0)
    with pytest.raises(np.linalg.LinAlgError):
        lower_triangular_orthocomplement(np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]]))
