"""
Sample paths of the output process observed at ``h, 2h, ..., nh``.

Two generators are provided: an Euler scheme on a fine grid for any driver,
and exact simulation of the sampled state recursion for Brownian drivers.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from numba import njit
from scipy.linalg import solve_continuous_lyapunov

from .levy import Brownian, levy_covariance, sample_increments
from .matfun import sampled_system


@dataclass
class ObservationSeries:
    """Observations ``Y(kh)``, ``k = 1..n``, stored as an ``(n, d)`` array."""

    h: float
    Y: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Y = np.ascontiguousarray(self.Y, dtype=float)
        if self.Y.ndim != 2:
            raise ValueError("Y must be a 2-d array (n, d)")
        if self.Y.shape[0] < 2:
            raise ValueError("a series needs at least two observations")
        if not np.all(np.isfinite(self.Y)):
            raise ValueError("observations must be finite")
        if not self.h > 0:
            raise ValueError("h must be positive")

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def d(self):
        return self.Y.shape[1]

    def head(self, n):
        return ObservationSeries(self.h, self.Y[:n], dict(self.provenance))


@njit(cache=True)
def _linear_recursion(M, U, x0):
    # x_k = M x_{k-1} + U_k, k = 1..n; returns x_1..x_n
    n, N = U.shape
    out = np.empty((n, N))
    x = x0.copy()
    for k in range(n):
        xn = U[k].copy()
        for i in range(N):
            acc = 0.0
            for j in range(N):
                acc += M[i, j] * x[j]
            xn[i] += acc
        out[k] = xn
        x = xn
    return out


def _steps_per(h, dt, what):
    q = h / dt
    r = int(round(q))
    if r < 1 or abs(q - r) > 1e-9 * max(1.0, q):
        raise ValueError(f"{what}: {dt} does not divide {h}")
    return r


def _check_driver(r, cfg, tol=1e-8):
    if cfg.dim != r.m:
        raise ValueError(f"driver dimension {cfg.dim} differs from model noise dimension {r.m}")
    S = levy_covariance(cfg)
    if np.max(np.abs(S - r.Sigma_L)) > tol * max(1.0, np.max(np.abs(r.Sigma_L))):
        raise ValueError("driver covariance is inconsistent with the realization's Sigma_L")


def simulate_euler(r, cfg, T=2000.0, euler_dt=0.01, h=1.0, rng=None, burn_in=0):
    """Euler scheme ``X <- X + A X dt + B dL`` from ``X(0) = 0``, recorded every ``h``.

    Returns ``n = T / h`` observations ``Y(h), ..., Y(T)``; ``burn_in`` extra
    observation periods are simulated first and dropped.
    """
    rng = np.random.default_rng() if rng is None else rng
    _check_driver(r, cfg)
    per = _steps_per(h, euler_dt, "euler_dt")
    n = _steps_per(T, h, "h")
    total = n + int(burn_in)
    N, m = r.N, r.m
    M = np.eye(N) + r.A * euler_dt
    # X_k = M^per X_{k-1} + sum_j M^(per-1-j) B dL_{k,j}
    G = np.empty((per, N, m))
    P = r.B.copy()
    for j in range(per - 1, -1, -1):
        G[j] = P
        P = M @ P
    Mper = np.linalg.matrix_power(M, per)
    dL = sample_increments(cfg, euler_dt, total * per, rng).reshape(total, per, m)
    U = np.einsum("jab,kjb->ka", G, dL)
    X = _linear_recursion(Mper, U, np.zeros(N))
    Y = X[burn_in:] @ r.C.T
    prov = {"scheme": "euler", "euler_dt": euler_dt, "T": T, "burn_in": int(burn_in)}
    return ObservationSeries(h, Y, prov)


def stationary_covariance(r):
    """Stationary covariance of the ``A2``-block, ``int_0^inf e^{A2 u} B2 S B2' e^{A2' u} du``."""
    if r.A2.size == 0:
        return np.zeros((0, 0))
    Q = r.B2 @ r.Sigma_L @ r.B2.T
    G = solve_continuous_lyapunov(r.A2, -Q)
    return 0.5 * (G + G.T)


def simulate_exact_gaussian(r, h=1.0, n=2000, rng=None, stationary_init=True, cfg=None):
    """Exact sampled simulation ``X_k = e^{Ah} X_{k-1} + xi_k``, ``xi_k ~ N(0, Sigma_h)``.

    The trend block starts at zero; with ``stationary_init`` the stationary
    block is drawn from its stationary law instead of starting at zero.
    """
    if cfg is not None:
        if not isinstance(cfg, Brownian):
            raise ValueError("exact simulation requires a Brownian driver")
        _check_driver(r, cfg)
    rng = np.random.default_rng() if rng is None else rng
    n = int(n)
    Phi, Sigma_h = sampled_system(r.A, r.B, r.Sigma_L, h)
    N = r.N
    x0 = np.zeros(N)
    if stationary_init and r.A2.size:
        G = stationary_covariance(r)
        x0[r.c:] = _factor(G) @ rng.standard_normal(N - r.c)
    xi = rng.standard_normal((n, N)) @ _factor(Sigma_h).T
    X = _linear_recursion(Phi, xi, x0)
    prov = {"scheme": "exact-gaussian", "stationary_init": bool(stationary_init)}
    return ObservationSeries(h, X @ r.C.T, prov)


def _factor(S):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(S)
        return U * np.sqrt(np.clip(w, 0.0, None))


def write_series(series, path, metadata=None):
    """Write ``k,y1,...,yd`` CSV plus a ``.yaml`` sidecar with ``h`` and provenance."""
    path = Path(path)
    k = np.arange(1, series.n + 1)
    header = "k," + ",".join(f"y{i + 1}" for i in range(series.d))
    data = np.column_stack([k, series.Y])
    fmt = ["%d"] + ["%.17g"] * series.d
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=fmt)
    meta = {"h": float(series.h), **_plain(series.provenance), **_plain(metadata or {})}
    path.with_suffix(".yaml").write_text(yaml.safe_dump(meta, sort_keys=True))
    return path


def read_series(path, h=None):
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[0] != "k" or any(not c.startswith("y") for c in header[1:]):
        raise ValueError(f"{path}: expected header k,y1,...,yd")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = {}
    side = path.with_suffix(".yaml")
    if side.exists():
        meta = yaml.safe_load(side.read_text()) or {}
    if h is None:
        h = meta.pop("h", 1.0)
    else:
        meta.pop("h", None)
    return ObservationSeries(float(h), data[:, 1:], meta)


def _plain(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, np.generic):
            v = v.item()
        elif isinstance(v, np.ndarray):
            v = v.tolist()
        out[k] = v
    return out
