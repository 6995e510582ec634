"""
Driving Levy processes: multivariate Brownian motion and the multivariate
normal inverse Gaussian (NIG) process.

The NIG increment over a step ``dt`` is drawn as a normal variance-mean
mixture,

    dL = mu*dt + z*Delta@beta + sqrt(z) * S@w,    S S^T = Delta,

with ``z`` inverse Gaussian of mean ``delta*dt/kappa`` and shape
``(delta*dt)**2``. This is exact in law because the NIG family is closed
under convolution in ``delta`` (and ``mu``).
"""

from dataclasses import dataclass, field

import numpy as np

from .matfun import is_psd


@dataclass(frozen=True)
class Brownian:
    """Brownian motion with covariance ``Sigma_L`` per unit time."""

    Sigma_L: np.ndarray

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.Sigma_L, dtype=float))
        object.__setattr__(self, "Sigma_L", S)
        if not is_psd(S):
            raise ValueError("Sigma_L must be symmetric positive semidefinite")

    @property
    def dim(self):
        return self.Sigma_L.shape[0]


@dataclass(frozen=True)
class NIG:
    """Multivariate NIG Levy process.

    Args:
        mu: location, shape ``(m,)``.
        alpha: tail heaviness, ``alpha**2 > beta' Delta beta``.
        beta: skewness, shape ``(m,)``.
        delta: scale, positive.
        Delta: positive definite structure matrix with unit determinant.
    """

    mu: np.ndarray
    alpha: float
    beta: np.ndarray
    delta: float
    Delta: np.ndarray
    kappa: float = field(init=False)

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        Delta = np.atleast_2d(np.asarray(self.Delta, dtype=float))
        m = Delta.shape[0]
        if mu.shape != (m,) or beta.shape != (m,) or Delta.shape != (m, m):
            raise ValueError("mu, beta and Delta have inconsistent dimensions")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not is_psd(Delta) or np.linalg.eigvalsh(Delta)[0] <= 0:
            raise ValueError("Delta must be symmetric positive definite")
        if abs(np.linalg.det(Delta) - 1.0) > 1e-10:
            raise ValueError(f"det(Delta) must be 1, got {np.linalg.det(Delta)!r}")
        kappa2 = self.alpha**2 - beta @ Delta @ beta
        if not kappa2 > 0:
            raise ValueError(f"kappa^2 = alpha^2 - beta' Delta beta must be > 0, got {kappa2}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "Delta", Delta)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "kappa", float(np.sqrt(kappa2)))

    @classmethod
    def centered(cls, alpha, beta, delta, Delta):
        """NIG with ``mu`` chosen so that the process has mean zero."""
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        Delta = np.atleast_2d(np.asarray(Delta, dtype=float))
        kappa = np.sqrt(alpha**2 - beta @ Delta @ beta)
        return cls(-delta * Delta @ beta / kappa, alpha, beta, delta, Delta)

    @property
    def dim(self):
        return self.Delta.shape[0]

    @property
    def is_centered(self):
        return bool(np.linalg.norm(levy_mean(self)) <= 1e-10)


def levy_covariance(cfg):
    """Covariance of ``L(1)``."""
    if isinstance(cfg, Brownian):
        return cfg.Sigma_L.copy()
    Db = cfg.Delta @ cfg.beta
    k = cfg.kappa
    S = cfg.delta / k * (cfg.Delta + np.outer(Db, Db) / k**2)
    return 0.5 * (S + S.T)


def levy_mean(cfg):
    """Mean of ``L(1)``."""
    if isinstance(cfg, Brownian):
        return np.zeros(cfg.dim)
    return cfg.mu + cfg.delta * cfg.Delta @ cfg.beta / cfg.kappa


def _psd_factor(S):
    # Cholesky when possible; eigen factor covers singular (e.g. zero) covariances
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(S)
        return U * np.sqrt(np.clip(w, 0.0, None))


def sample_increments(cfg, dt, count, rng):
    """Draw ``count`` iid increments ``L(t + dt) - L(t)``; returns ``(count, m)``."""
    if not dt > 0 or not np.isfinite(dt):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    count = int(count)
    m = cfg.dim
    if isinstance(cfg, Brownian):
        S = _psd_factor(cfg.Sigma_L * dt)
        return rng.standard_normal((count, m)) @ S.T
    scale = cfg.delta * dt
    z = rng.wald(scale / cfg.kappa, scale**2, size=count)
    w = rng.standard_normal((count, m))
    S = np.linalg.cholesky(cfg.Delta)
    Db = cfg.Delta @ cfg.beta
    return cfg.mu * dt + z[:, None] * Db + np.sqrt(z)[:, None] * (w @ S.T)


def levy_from_dict(d):
    """Build a driver from a config mapping (``{"type": "brownian"|"nig", ...}``)."""
    kind = d.get("type", "brownian").lower()
    if kind == "brownian":
        if "Sigma_L" not in d:
            raise ValueError("brownian driver needs Sigma_L")
        return Brownian(np.asarray(d["Sigma_L"], dtype=float))
    if kind == "nig":
        if d.get("center", False):
            return NIG.centered(d["alpha"], d["beta"], d["delta"], d["Delta"])
        return NIG(d["mu"], d["alpha"], d["beta"], d["delta"], d["Delta"])
    raise ValueError(f"unknown driver type {kind!r}")


def levy_to_dict(cfg):
    if isinstance(cfg, Brownian):
        return {"type": "brownian", "Sigma_L": cfg.Sigma_L.tolist()}
    return {"type": "nig", "mu": cfg.mu.tolist(), "alpha": cfg.alpha,
            "beta": cfg.beta.tolist(), "delta": cfg.delta, "Delta": cfg.Delta.tolist()}
