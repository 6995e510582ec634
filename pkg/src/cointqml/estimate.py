"""
Quasi maximum likelihood estimation on a parameter box and the sandwich
covariance of the short-run estimates.

The optimizers work in box-scaled coordinates ``u = (theta - lower) / (upper - lower)``
so the parameter tolerance is comparable across coordinates.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .kalman import LOG_2PI, gaussian_terms, pseudo_innovations, quasi_log_likelihood
from .model import build_realization, discretize


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EstimatorOptions:
    """Optimizer settings.

    Attributes:
        method: ``"nelder-mead"`` (default) or ``"l-bfgs-b"``.
        xtol: stopping tolerance on the scaled parameter change.
        ftol: stopping tolerance on the objective change.
        max_evals: evaluation budget per start.
        restarts: extra Nelder-Mead runs from the previous optimum; a fresh
            simplex guards against premature collapse.
        grad_step: relative central-difference step for L-BFGS-B gradients.
    """

    method: str = "nelder-mead"
    xtol: float = 1e-8
    ftol: float = 1e-10
    max_evals: int = 20_000
    restarts: int = 1
    grad_step: float = 1e-5

    def __post_init__(self):
        if self.method not in ("nelder-mead", "l-bfgs-b"):
            raise ValueError(f"unknown optimizer {self.method!r}")
        if self.max_evals < 1 or self.restarts < 0:
            raise ValueError("max_evals must be positive and restarts nonnegative")


@dataclass
class EstimationResult:
    theta: np.ndarray
    loglik: float
    status: str
    iterations: int
    evaluations: int
    long_idx: tuple
    short_idx: tuple
    start: Optional[np.ndarray] = None
    trace: list = field(default_factory=list, repr=False)
    cov_short: Optional[np.ndarray] = None
    se_short: Optional[np.ndarray] = None

    @property
    def theta_long(self):
        return self.theta[list(self.long_idx)]

    @property
    def theta_short(self):
        return self.theta[list(self.short_idx)]

    @property
    def converged(self):
        return self.status == "converged"


class _Objective:
    """Likelihood in scaled coordinates with an evaluation counter and a best-so-far trace."""

    def __init__(self, spec, Y, h, penalty=None):
        self.spec, self.Y, self.h = spec, Y, h
        self.lo, self.width = spec.lower, spec.upper - spec.lower
        self.penalty = penalty
        self.evals = 0
        self.best = np.inf
        self.best_theta = None
        self.trace = []

    def theta(self, u):
        return np.clip(self.lo + self.width * np.asarray(u), self.spec.lower, self.spec.upper)

    def scaled(self, theta):
        return (np.asarray(theta, dtype=float) - self.lo) / self.width

    def __call__(self, u):
        self.evals += 1
        th = self.theta(u)
        v = quasi_log_likelihood(self.spec, th, self.Y, self.h).value
        if v < self.best:
            self.best, self.best_theta = v, th
            self.trace.append((self.evals, v))
        if not np.isfinite(v) and self.penalty is not None:
            return self.penalty
        return v


def _run_nelder_mead(obj, u0, opts, budget):
    res = minimize(obj, u0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * len(u0),
                   options={"xatol": opts.xtol, "fatol": opts.ftol, "maxfev": budget,
                            "maxiter": budget, "adaptive": len(u0) > 5})
    return res.x, res.nit, res.status == 0


def _run_lbfgsb(obj, u0, opts, budget):
    step = opts.grad_step

    def grad(u):
        g = np.empty_like(u)
        for i in range(u.size):
            e = step * (1.0 + abs(u[i]))
            up, um = u.copy(), u.copy()
            up[i] = min(u[i] + e, 1.0)
            um[i] = max(u[i] - e, 0.0)
            g[i] = (obj(up) - obj(um)) / (up[i] - um[i])
        return g

    res = minimize(obj, u0, jac=grad, method="L-BFGS-B", bounds=[(0.0, 1.0)] * len(u0),
                   options={"ftol": opts.ftol, "gtol": 1e-8, "maxfun": budget})
    return res.x, res.nit, res.success


def _single_start(spec, Y, h, theta_start, opts):
    if opts.method == "l-bfgs-b":
        # gradients cannot difference through +inf; use a large finite value
        v0 = quasi_log_likelihood(spec, theta_start, Y, h).value
        obj = _Objective(spec, Y, h, penalty=(abs(v0) + 1.0) * 1e6)
    else:
        obj = _Objective(spec, Y, h)
    u = obj.scaled(theta_start)
    if not np.isfinite(obj(u)):
        return None
    iters, ok = 0, False
    runner = _run_lbfgsb if opts.method == "l-bfgs-b" else _run_nelder_mead
    for _ in range(1 + (opts.restarts if opts.method == "nelder-mead" else 0)):
        budget = opts.max_evals - obj.evals
        if budget <= 0:
            ok = False
            break
        before = obj.best
        u, it, ok = runner(obj, obj.scaled(obj.best_theta), opts, budget)
        iters += it
        if ok and before - obj.best <= opts.ftol:
            break
    status = "converged" if ok else "max-iter"
    return obj, iters, status


def multistart_points(spec, count, rng, half_width=0.1):
    """Starts at ``theta0 + U(-w, w)`` (clipped to the box) or uniform over the box."""
    if spec.theta0 is not None:
        pts = spec.theta0 + rng.uniform(-half_width, half_width, size=(count, spec.s))
        return np.clip(pts, spec.lower, spec.upper)
    return spec.lower + (spec.upper - spec.lower) * rng.random((count, spec.s))


def qml_estimate(spec, series, init=None, options=None, starts=5, rng=None):
    """Minimize the pseudo-Gaussian likelihood over the box of ``spec``.

    Args:
        series: :class:`~cointqml.simulate.ObservationSeries` or ``(n, d)`` array.
        init: a starting parameter vector; if omitted, ``starts`` points from
            :func:`multistart_points` are used and the best local minimum wins.
        options: :class:`EstimatorOptions`.
        rng: generator for the multi-start draws.

    Raises:
        EstimationError: if the series is shorter than the number of parameters
            or every start is infeasible.
    """
    opts = options or EstimatorOptions()
    Y = np.ascontiguousarray(getattr(series, "Y", series), dtype=float)
    h = float(getattr(series, "h", 1.0))
    if Y.ndim != 2 or Y.shape[0] < spec.s:
        raise EstimationError(f"need at least {spec.s} observations, got {len(Y)}")
    if init is not None:
        points = np.atleast_2d(np.asarray(init, dtype=float))
        if points.shape[1] != spec.s:
            raise ValueError(f"init must have {spec.s} coordinates")
        if not all(spec.in_box(p) for p in points):
            raise ValueError("init lies outside the parameter box")
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        points = multistart_points(spec, int(starts), rng)

    best = None
    total_evals = 0
    for p in points:
        out = _single_start(spec, Y, h, p, opts)
        if out is None:
            total_evals += 1
            continue
        obj, iters, status = out
        total_evals += obj.evals
        if best is None or obj.best < best[0].best:
            best = (obj, iters, status, p)
    if best is None:
        raise EstimationError("all starting points are infeasible")
    obj, iters, status, p = best
    theta = obj.best_theta
    return EstimationResult(theta=theta, loglik=float(obj.best), status=status, iterations=iters,
                            evaluations=total_evals, long_idx=spec.long_idx,
                            short_idx=spec.short_idx, start=p, trace=obj.trace)


def per_observation_terms(spec, theta, Y, h):
    """``l_k = d log 2pi + log det V + e_k' V^{-1} e_k``, the summands of the likelihood."""
    f = discretize(build_realization(spec, theta, check_box=False), h)
    inn = pseudo_innovations(f, Y)
    terms = gaussian_terms(inn.eps, f.V)
    if terms is None:
        raise EstimationError("V is numerically singular at the evaluation point")
    logdet, quad = terms
    return f.C.shape[0] * LOG_2PI + logdet + quad


def _bartlett_lrv(S, bandwidth):
    S = S - S.mean(axis=0)
    n = S.shape[0]
    out = S.T @ S / n
    for lag in range(1, bandwidth + 1):
        w = 1.0 - lag / (bandwidth + 1.0)
        G = S[lag:].T @ S[:-lag] / n
        out += w * (G + G.T)
    return out


@dataclass
class SandwichCovariance:
    cov: np.ndarray
    se: np.ndarray
    hessian: np.ndarray
    score_lrv: np.ndarray
    hessian_asymmetry: float
    bandwidth: int


def short_run_covariance(spec, theta_hat, series, bandwidth=None, hess_step=1e-4, grad_step=1e-5,
                         boundary_tol=1e-6):
    """Sandwich ``Z^-1 I Z^-1 / n`` for the short-run coordinates at ``theta_hat``.

    ``Z`` is a central-difference Hessian of the likelihood in the short-run
    coordinates. ``I`` is the Bartlett long-run variance (lags up to
    ``bandwidth``, default ``floor(n^(1/3))``) of the per-observation score
    contributions, each computed by central differences of ``l_k``.
    """
    theta = np.asarray(theta_hat, dtype=float)
    Y = np.ascontiguousarray(getattr(series, "Y", series), dtype=float)
    h = float(getattr(series, "h", 1.0))
    n = Y.shape[0]
    idx = list(spec.short_idx)
    margin = np.minimum(theta[idx] - spec.lower[idx], spec.upper[idx] - theta[idx])
    if np.any(margin < boundary_tol):
        raise EstimationError("estimate lies on the boundary of the short-run box")
    bw = int(np.floor(n ** (1.0 / 3.0))) if bandwidth is None else int(bandwidth)

    def total(t):
        return float(np.mean(per_observation_terms(spec, t, Y, h)))

    H_raw = _fd_hessian_raw(total, theta, idx, hess_step, grad_step)
    asym = float(np.linalg.norm(H_raw - H_raw.T))
    Z = 0.5 * (H_raw + H_raw.T)
    w = np.linalg.eigvalsh(Z)
    if w[0] <= 1e-10 * max(abs(w[-1]), 1e-300):
        raise EstimationError(f"short-run Hessian is numerically singular (eigenvalues {w})")

    scores = np.empty((n, len(idx)))
    for j, i in enumerate(idx):
        e = grad_step * (1.0 + abs(theta[i]))
        tp, tm = theta.copy(), theta.copy()
        tp[i] += e
        tm[i] -= e
        scores[:, j] = (per_observation_terms(spec, tp, Y, h) - per_observation_terms(spec, tm, Y, h)) / (2 * e)
    I = _bartlett_lrv(scores, bw)
    Zi = np.linalg.inv(Z)
    cov = Zi @ I @ Zi / n
    cov = 0.5 * (cov + cov.T)
    return SandwichCovariance(cov, np.sqrt(np.clip(np.diag(cov), 0.0, None)), Z, I, asym, bw)


def _fd_hessian_raw(fun, x, idx, hess_step, grad_step):
    """Jacobian (step ``hess_step``) of the central-difference gradient (step ``grad_step``).

    The two steps differ, so ``H - H'`` measures the finite-difference error.
    """
    idx = list(idx)

    def grad(z):
        g = np.empty(len(idx))
        for j, i in enumerate(idx):
            e = grad_step * (1.0 + abs(x[i]))
            zp, zm = z.copy(), z.copy()
            zp[i] += e
            zm[i] -= e
            g[j] = (fun(zp) - fun(zm)) / (2 * e)
        return g

    H = np.empty((len(idx), len(idx)))
    for j, i in enumerate(idx):
        e = hess_step * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += e
        xm[i] -= e
        H[:, j] = (grad(xp) - grad(xm)) / (2 * e)
    return H
