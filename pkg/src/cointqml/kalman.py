"""
Pseudo-innovations from the steady-state Kalman recursion and the
pseudo-Gaussian likelihood built from them.

The likelihood value is ``-2/n`` times the Gaussian log-likelihood of the
pseudo-innovations,

    L(theta) = (1/n) sum_k [ d log(2 pi) + log det V + e_k' V^{-1} e_k ].
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .matfun import (DAREError, _cholesky_small, _cholesky_solve, _dare_iterate, _riccati_map,
                     van_loan)
from .model import AssumptionViolation, build_realization, discretize, kalman_bertram_gap

LOG_2PI = float(np.log(2 * np.pi))
# V is treated as singular below this ratio of extreme eigenvalues
V_COND_FLOOR = 1e-12


@njit(cache=True)
def _kalman_recursion(F, K, C, Y, x1):
    n, d = Y.shape
    N = F.shape[0]
    eps = np.empty((n, d))
    states = np.empty((n, N))
    x = x1.copy()
    xn = np.empty(N)
    for k in range(n):
        for i in range(N):
            states[k, i] = x[i]
        for i in range(d):
            acc = Y[k, i]
            for j in range(N):
                acc -= C[i, j] * x[j]
            eps[k, i] = acc
        for i in range(N):
            acc = 0.0
            for j in range(N):
                acc += F[i, j] * x[j]
            for j in range(d):
                acc += K[i, j] * Y[k, j]
            xn[i] = acc
        x, xn = xn, x
    return eps, states


@njit(cache=True)
def _quadratic_forms(eps, Linv):
    # e_k' V^{-1} e_k with V^{-1} = Linv' Linv
    n, d = eps.shape
    out = np.empty(n)
    for k in range(n):
        tot = 0.0
        for i in range(d):
            acc = 0.0
            for j in range(i + 1):
                acc += Linv[i, j] * eps[k, j]
            tot += acc * acc
        out[k] = tot
    return out


# status codes of the fused kernel
_OK, _NO_CONVERGENCE, _SINGULAR_ITERATE, _DIVERGED, _RESIDUAL, _UNSTABLE, _SINGULAR_V = range(7)
_STATUS_TAGS = {
    _NO_CONVERGENCE: "dare: no convergence",
    _SINGULAR_ITERATE: "dare: C Omega C^T is numerically singular",
    _DIVERGED: "dare: Riccati iteration diverged",
    _RESIDUAL: "dare: residual above tolerance",
    _UNSTABLE: "dare: closed loop Phi - K C is not stable",
    _SINGULAR_V: "singular V",
}


@njit(cache=True)
def _fused_likelihood(Phi, C, Sigma, Y, x1, tol, max_iter, cond_floor):
    # steady-state filter and likelihood in one pass; mirrors steady_state_filter
    n = Y.shape[0]
    d = C.shape[0]
    empty = np.empty(0)
    Omega, iters, change, status = _dare_iterate(Phi, C, Sigma, tol, max_iter, 1.0)
    if status == 2:
        return _SINGULAR_ITERATE, np.inf, 0.0, empty
    if not np.all(np.isfinite(Omega)):
        return _DIVERGED, np.inf, 0.0, empty
    if status == 1:
        return _NO_CONVERGENCE, np.inf, 0.0, empty
    nxt, ok = _riccati_map(Omega, Phi, C, Sigma)
    if not ok:
        return _SINGULAR_ITERATE, np.inf, 0.0, empty
    if np.sqrt(np.sum((nxt - Omega) ** 2)) > 1e-10 * (1.0 + np.sqrt(np.sum(Omega * Omega))):
        return _RESIDUAL, np.inf, 0.0, empty
    Ct = np.ascontiguousarray(C.T)
    V = C @ Omega @ Ct
    V = 0.5 * (V + V.T)
    w = np.linalg.eigvalsh(V)
    if not (w[0] > cond_floor * max(w[-1], 0.0) and w[0] > 0):
        return _SINGULAR_V, np.inf, 0.0, empty
    L, ok = _cholesky_small(V)
    if not ok:
        return _SINGULAR_V, np.inf, 0.0, empty
    K = np.ascontiguousarray(_cholesky_solve(L, C @ Omega @ np.ascontiguousarray(Phi.T)).T)
    F = Phi - K @ C
    if np.max(np.abs(np.linalg.eigvals(F.astype(np.complex128)))) >= 1.0:
        return _UNSTABLE, np.inf, 0.0, empty
    Linv = np.linalg.inv(L)
    eps, _ = _kalman_recursion(F, K, np.ascontiguousarray(C), Y, x1)
    quad = _quadratic_forms(eps, Linv)
    logdet = 0.0
    for i in range(d):
        logdet += 2.0 * np.log(L[i, i])
    return _OK, d * np.log(2 * np.pi) + logdet + np.sum(quad) / n, logdet, quad


@dataclass
class InnovationSeries:
    eps: np.ndarray
    states: np.ndarray
    filter: object = field(repr=False)


def _values(series):
    Y = series.Y if hasattr(series, "Y") else series
    return np.ascontiguousarray(Y, dtype=float)


def pseudo_innovations(f, series, x1=None):
    """Run ``X_k = F X_{k-1} + K Y_{k-1}``, ``e_k = Y_k - C X_k`` from ``X_1 = x1``.

    ``series`` is an :class:`~cointqml.simulate.ObservationSeries` or an
    ``(n, d)`` array of observations ``Y_1..Y_n``.
    """
    if hasattr(series, "h") and not np.isclose(series.h, f.h):
        raise ValueError(f"series step {series.h} differs from filter step {f.h}")
    Y = _values(series)
    d, N = f.C.shape
    if Y.ndim != 2 or Y.shape[1] != d:
        raise ValueError(f"observations must have shape (n, {d}), got {Y.shape}")
    x1 = np.zeros(N) if x1 is None else np.asarray(x1, dtype=float)
    if x1.shape != (N,):
        raise ValueError(f"initial state must have shape ({N},)")
    eps, states = _kalman_recursion(np.ascontiguousarray(f.F), np.ascontiguousarray(f.K),
                                    np.ascontiguousarray(f.C), Y, x1)
    return InnovationSeries(eps, states, f)


@dataclass
class LikelihoodValue:
    value: float
    n: int
    quad: Optional[np.ndarray] = None
    logdet_V: float = float("nan")
    tag: Optional[str] = None

    @property
    def feasible(self):
        return self.tag is None


def gaussian_terms(eps, V):
    """Per-observation ``(log det V, e_k' V^{-1} e_k)``; ``None`` if ``V`` is near singular."""
    w = np.linalg.eigvalsh(V)
    if not (w[0] > V_COND_FLOOR * max(w[-1], 0.0) and w[0] > 0):
        return None
    L = np.linalg.cholesky(V)
    Linv = np.linalg.inv(L)
    return 2.0 * float(np.sum(np.log(np.diag(L)))), _quadratic_forms(eps, np.tril(Linv))


def likelihood_from_filter(f, series, x1=None):
    Y = _values(series)
    inn = pseudo_innovations(f, Y, x1)
    terms = gaussian_terms(inn.eps, f.V)
    d = f.C.shape[0]
    if terms is None:
        return LikelihoodValue(np.inf, len(Y), tag="singular V")
    logdet, quad = terms
    value = d * LOG_2PI + logdet + float(np.mean(quad))
    return LikelihoodValue(value, len(Y), quad, logdet)


def quasi_log_likelihood(spec, theta, series, h=None, x1=None):
    """Pseudo-Gaussian likelihood value at ``theta``.

    Infeasible parameters (outside the box, assumption violation, Riccati
    failure, singular ``V``) give ``value = inf`` with a diagnostic ``tag``.
    Numerically identical to ``likelihood_from_filter(discretize(...))`` but
    computed in a single compiled pass.
    """
    Y = _values(series)
    n = len(Y)
    if h is None:
        h = getattr(series, "h", 1.0)
    try:
        r = build_realization(spec, theta)
        if not h > 0:
            raise ValueError("h must be positive")
        if kalman_bertram_gap(r.A2, h, r.eig_A2) <= 1e-8:
            raise AssumptionViolation("A10", "Kalman-Bertram criterion fails")
        Phi, Sigma_h = van_loan(r.A, r.B @ r.Sigma_L @ r.B.T, h)
    except AssumptionViolation as exc:
        return LikelihoodValue(np.inf, n, tag=f"assumption {exc.assumption}")
    except (ValueError, OverflowError, np.linalg.LinAlgError) as exc:
        return LikelihoodValue(np.inf, n, tag=f"infeasible: {exc}")
    C = np.ascontiguousarray(r.C)
    if Y.ndim != 2 or Y.shape[1] != C.shape[0]:
        raise ValueError(f"observations must have shape (n, {C.shape[0]}), got {Y.shape}")
    x1 = np.zeros(C.shape[1]) if x1 is None else np.asarray(x1, dtype=float)
    status, value, logdet, quad = _fused_likelihood(Phi, C, Sigma_h, Y, x1, 1e-13, 100_000,
                                                    V_COND_FLOOR)
    if status != _OK:
        return LikelihoodValue(np.inf, n, tag=_STATUS_TAGS[status])
    return LikelihoodValue(float(value), n, quad, float(logdet))


def likelihood_decomposition(spec, theta, theta_ref_long, series, h=None):
    """Split ``L(theta)`` into ``(L1, L2)`` with ``L2 = L(theta1_ref, theta2)``.

    ``L1 = L(theta1, theta2) - L(theta1_ref, theta2)`` so that ``L1 + L2`` is
    the likelihood at ``theta``.
    """
    theta = np.asarray(theta, dtype=float)
    ref = theta.copy()
    ref[list(spec.long_idx)] = np.asarray(theta_ref_long, dtype=float)
    full = quasi_log_likelihood(spec, theta, series, h).value
    L2 = quasi_log_likelihood(spec, ref, series, h).value
    if np.array_equal(ref, theta):
        return 0.0, L2
    return full - L2, L2
