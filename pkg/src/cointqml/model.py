"""
Parametric cointegrated state space models and their sampled filters.

A model with ``c`` common trends has state ``X = (X1, X2)`` with

    A = diag(0_c, A2),   B = [B1; B2],   C = [C1, C2],

so that ``Y(t) = C1 B1 L(t) + C2 X2(t)`` with a stationary ``X2``. The long-run
parameters enter ``C1`` only; every other matrix depends on the short-run
parameters.
"""

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit

from .matfun import (
    lower_triangular_orthocomplement,
    sampled_system,
    steady_state_filter,
    spectral_radius,
)

RANK_RTOL = 1e-7
FD_REL_STEP = 1e-6


class AssumptionViolation(ValueError):
    """A realization breaks one of the structural model assumptions."""

    def __init__(self, assumption, message):
        super().__init__(f"{assumption}: {message}")
        self.assumption = assumption


def numeric_rank(M, rtol=RANK_RTOL):
    """Rank from singular values below ``rtol * s_max``; returns ``(rank, singular_values)``."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return 0, np.zeros(0)
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0, s
    return int(np.sum(s > rtol * s[0])), s


@lru_cache(maxsize=None)
def _triu(m):
    return np.triu_indices(m)


def vech_to_sym(v, m):
    """Inverse of the column-wise half vectorization of an ``m x m`` symmetric matrix."""
    S = np.zeros((m, m))
    rows, cols = _triu(m)
    # column-major lower triangle == row-major upper triangle
    S[cols, rows] = v
    S[rows, cols] = v
    return S


def vech(S):
    S = np.asarray(S)
    rows, cols = _triu(S.shape[0])
    return S.T[rows, cols].copy()


@njit(cache=True)
def _rank(M, rtol):
    if M.size == 0:
        return 0
    s = np.linalg.svd(M)[1]
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


@njit(cache=True)
def _structural_code(Sigma_L, eig_re_max, B1, C1, C, rtol):
    # 0 ok, 1 Sigma_L (A3), 2 A2 spectrum (A4), 3 B1/C1 rank (A6), 4 C rank (A9)
    m = Sigma_L.shape[0]
    for i in range(m):
        for j in range(m):
            if abs(Sigma_L[i, j] - Sigma_L[j, i]) > 1e-12:
                return 1
    if np.linalg.eigvalsh(Sigma_L)[0] <= 0.0:
        return 1
    if eig_re_max >= 0.0:
        return 2
    c = B1.shape[0]
    if c > 0 and (_rank(B1, rtol) < c or _rank(C1, rtol) < c):
        return 3
    if C.shape[0] > C.shape[1] or _rank(C, rtol) < C.shape[0]:
        return 4
    return 0


_VIOLATIONS = {
    1: ("A3", "Sigma_L is not symmetric positive definite"),
    2: ("A4", "A2 has an eigenvalue with nonnegative real part"),
    3: ("A6", "B1 or C1 is rank deficient"),
    4: ("A9", "C does not have full row rank d"),
}


@dataclass(frozen=True)
class StateSpaceRealization:
    A2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    Sigma_L: np.ndarray

    def __post_init__(self):
        for name in ("A2", "B1", "B2", "C1", "C2", "Sigma_L"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        c, m = self.B1.shape
        p = self.A2.shape[0]
        d = self.C1.shape[0] if self.C1.size else self.C2.shape[0]
        if self.C1.shape != (d, c):
            object.__setattr__(self, "C1", self.C1.reshape(d, c))
        if (self.A2.shape != (p, p) or self.B2.shape != (p, m) or self.C2.shape != (d, p)
                or self.Sigma_L.shape != (m, m)):
            raise ValueError("inconsistent realization dimensions")

    @property
    def c(self):
        return self.B1.shape[0]

    @property
    def m(self):
        return self.B1.shape[1]

    @property
    def d(self):
        return self.C2.shape[0]

    @property
    def N(self):
        return self.c + self.A2.shape[0]

    @cached_property
    def A(self):
        A = np.zeros((self.N, self.N))
        A[self.c:, self.c:] = self.A2
        return A

    @cached_property
    def B(self):
        return np.vstack([self.B1, self.B2])

    @cached_property
    def C(self):
        return np.hstack([self.C1, self.C2])

    @cached_property
    def eig_A2(self):
        return np.linalg.eigvals(self.A2) if self.A2.size else np.zeros(0, dtype=complex)

    @cached_property
    def C1_perp(self):
        return lower_triangular_orthocomplement(self.C1)

    def validate(self):
        """Raise :class:`AssumptionViolation` for a broken A3/A4/A6/A9 condition."""
        if self.c > min(self.d, self.m):
            raise AssumptionViolation("A6", "c exceeds min(d, m)")
        eig_max = float(np.max(self.eig_A2.real)) if self.A2.size else -np.inf
        code = _structural_code(self.Sigma_L, eig_max, self.B1, self.C1, self.C, RANK_RTOL)
        if code:
            raise AssumptionViolation(*_VIOLATIONS[code])
        return self


@dataclass(frozen=True)
class ModelSpec:
    """A parametric family ``theta -> StateSpaceRealization`` on a box.

    Args:
        builder: maps the full parameter vector to
            ``(A2, B1, B2, C1, C2, Sigma_L)``; ``C1`` may only depend on the
            coordinates listed in ``long_idx``.
        theta0: data-generating value, when known (used for starts and tables).
    """

    name: str
    d: int
    c: int
    N: int
    m: int
    lower: np.ndarray
    upper: np.ndarray
    long_idx: tuple
    builder: Callable
    theta0: Optional[np.ndarray] = None
    param_names: Optional[Sequence[str]] = None
    sigma_idx: tuple = ()
    source: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        up = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "long_idx", tuple(int(i) for i in self.long_idx))
        object.__setattr__(self, "sigma_idx", tuple(int(i) for i in self.sigma_idx))
        if lo.shape != up.shape or lo.ndim != 1:
            raise ValueError("lower and upper bounds must be 1-d arrays of equal length")
        if not np.all(lo < up):
            raise ValueError("every lower bound must be strictly below its upper bound")
        if not self.c <= min(self.d, self.m) <= self.N:
            raise ValueError("dimensions must satisfy c <= min(d, m) <= N")
        if any(i < 0 or i >= lo.size for i in self.long_idx):
            raise ValueError("long-run index out of range")
        if self.theta0 is not None:
            object.__setattr__(self, "theta0", np.asarray(self.theta0, dtype=float))
        if self.param_names is None:
            object.__setattr__(self, "param_names",
                               tuple(f"theta_{i + 1}" for i in range(lo.size)))

    @property
    def s(self):
        return self.lower.size

    @property
    def s1(self):
        return len(self.long_idx)

    @property
    def s2(self):
        return self.s - self.s1

    @property
    def short_idx(self):
        long = set(self.long_idx)
        return tuple(i for i in range(self.s) if i not in long)

    def in_box(self, theta):
        theta = np.asarray(theta, dtype=float)
        return theta.shape == (self.s,) and bool(np.all((theta >= self.lower) & (theta <= self.upper)))

    def build(self, theta):
        return build_realization(self, theta)

    def with_noise_covariance(self, theta, Sigma_L):
        """Copy of ``theta`` whose vech(Sigma_L) coordinates (``sigma_idx``) equal ``Sigma_L``."""
        theta = np.array(theta, dtype=float)
        if not self.sigma_idx:
            raise ValueError(f"model {self.name} does not expose its Sigma_L coordinates")
        theta[list(self.sigma_idx)] = vech(Sigma_L)
        return theta


def build_realization(spec, theta, check_box=True):
    """Fill the model matrices at ``theta`` and verify the structural assumptions."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.s,):
        raise ValueError(f"expected {spec.s} parameters, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("non-finite parameter")
    if check_box and not spec.in_box(theta):
        raise ValueError("parameter outside the box")
    A2, B1, B2, C1, C2, Sigma_L = spec.builder(theta)
    r = StateSpaceRealization(A2, np.reshape(B1, (spec.c, spec.m)), B2,
                              np.reshape(C1, (spec.d, spec.c)), C2, Sigma_L)
    if (r.d, r.c, r.N, r.m) != (spec.d, spec.c, spec.N, spec.m):
        raise ValueError("builder output does not match the declared dimensions")
    return r.validate()


def kalman_bertram_gap(A, h, eigenvalues=None):
    """Smallest distance of ``lambda - lambda'`` to the lattice ``2 pi i k / h``, ``k != 0``.

    The zero eigenvalue of the trend block is always included.
    """
    if eigenvalues is None:
        eigenvalues = np.linalg.eigvals(A) if A.size else np.zeros(0)
    lam = np.concatenate([eigenvalues, [0.0]])
    diff = (lam[:, None] - lam[None, :]).ravel()
    step = 2 * np.pi / h
    k = np.round(diff.imag / step)
    k[k == 0] = np.where(diff.imag[k == 0] >= 0, 1, -1)
    return float(np.min(np.hypot(diff.real, diff.imag - k * step)))


@dataclass(frozen=True)
class DiscreteFilter:
    """Sampled model at step ``h`` with its steady-state Kalman filter."""

    h: float
    Phi: np.ndarray
    Sigma_h: np.ndarray
    Omega: np.ndarray
    K: np.ndarray
    V: np.ndarray
    F: np.ndarray
    Pi: np.ndarray
    C: np.ndarray
    realization: StateSpaceRealization = field(repr=False, compare=False)

    @property
    def rho(self):
        return spectral_radius(self.F)

    @cached_property
    def _filter_sum(self):
        # (I - F)^{-1} K
        return np.linalg.solve(np.eye(self.F.shape[0]) - self.F, self.K)

    def k_coefficients(self, tol=1e-12, max_terms=100_000):
        """``k_j = C F^j (I - F)^{-1} K`` for ``j = 1..J`` with ``|k_J| <= tol``; shape ``(J, d, d)``."""
        out = []
        G = self.F @ self._filter_sum
        for _ in range(max_terms):
            kj = self.C @ G
            out.append(kj)
            if np.linalg.norm(kj, 2) <= tol:
                break
            G = self.F @ G
        return np.array(out)

    def psi(self, j):
        """Stack of ``vec(C F^i K)``, ``i = 0..j``, followed by ``vec(V)``."""
        blocks = []
        G = self.K
        for _ in range(j + 1):
            blocks.append((self.C @ G).ravel(order="F"))
            G = self.F @ G
        blocks.append(self.V.ravel(order="F"))
        return np.concatenate(blocks)


def discretize(r, h, **dare_options):
    """Sample ``r`` at step ``h`` and compute the steady-state filter quantities."""
    if not h > 0:
        raise ValueError("h must be positive")
    gap = kalman_bertram_gap(r.A2, h, r.eig_A2)
    if gap <= 1e-8:
        raise AssumptionViolation("A10", f"Kalman-Bertram criterion fails (gap {gap:.2e})")
    Phi, Sigma_h = sampled_system(r.A, r.B, r.Sigma_L, h)
    C = r.C
    Omega, K, V, F = steady_state_filter(Phi, C, Sigma_h, **dare_options)
    d = C.shape[0]
    Pi = C @ np.linalg.solve(np.eye(F.shape[0]) - F, K) - np.eye(d)
    return DiscreteFilter(h, Phi, Sigma_h, Omega, K, V, F, Pi, C, r)


@dataclass
class AssumptionCheck:
    passed: bool
    measured: dict


@dataclass
class AssumptionReport:
    model: str
    theta: np.ndarray
    h: float
    rank_rtol: float
    checks: dict

    @property
    def passed(self):
        return all(ch.passed for ch in self.checks.values())

    def summary(self):
        lines = [f"model {self.model}, h={self.h}, rank tolerance {self.rank_rtol:g} * s_max"]
        for name, ch in self.checks.items():
            flag = "pass" if ch.passed else "FAIL"
            detail = ", ".join(f"{k}={_fmt(v)}" for k, v in ch.measured.items())
            lines.append(f"  {name:<4} {flag}  {detail}")
        return "\n".join(lines)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{v:.4g}"
    if isinstance(v, np.ndarray):
        return np.array2string(v, precision=3, max_line_width=200)
    if isinstance(v, (list, tuple)) and v and isinstance(v[0], (float, np.floating)):
        return "[" + ", ".join(f"{x:.3g}" for x in v) + "]"
    return str(v)


def fd_jacobian(f, x, idx, rel_step=FD_REL_STEP):
    """Central-difference Jacobian of ``f`` w.r.t. the coordinates ``idx`` of ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in idx:
        step = rel_step * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        cols.append((np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * step))
    return np.column_stack(cols) if cols else np.zeros((np.asarray(f(x)).size, 0))


def check_assumptions(spec, theta, h=1.0, j_max=20, n_c_draws=2000, seed=0):
    """Numerically verify the model assumptions at ``theta``; never raises on failure."""
    theta = np.asarray(theta, dtype=float)
    checks = {}
    try:
        r = build_realization(spec, theta, check_box=False)
        built_error = None
    except AssumptionViolation as exc:
        built_error = exc
        A2, B1, B2, C1, C2, Sigma_L = spec.builder(theta)
        r = StateSpaceRealization(A2, np.reshape(B1, (spec.c, spec.m)), B2,
                                  np.reshape(C1, (spec.d, spec.c)), C2, Sigma_L)

    checks["A1"] = AssumptionCheck(bool(np.all(spec.lower < spec.upper)),
                                   {"box": "finite" if np.all(np.isfinite(spec.upper - spec.lower)) else "unbounded"})
    margin = float(np.min(np.minimum(theta - spec.lower, spec.upper - theta)))
    checks["A2"] = AssumptionCheck(margin > 0, {"min_distance_to_bound": margin})
    w = np.linalg.eigvalsh(0.5 * (r.Sigma_L + r.Sigma_L.T))
    checks["A3"] = AssumptionCheck(bool(w[0] > 0), {"min_eig_Sigma_L": float(w[0])})
    re = np.linalg.eigvals(r.A2).real if r.A2.size else np.zeros(0)
    checks["A4"] = AssumptionCheck(bool(np.all(re < 0)), {"max_real_part": float(re.max()) if re.size else -np.inf})

    p = r.A2.shape[0]
    ctrb = np.hstack([np.linalg.matrix_power(r.A2, i) @ r.B2 for i in range(p)]) if p else np.zeros((0, 0))
    obsv = np.vstack([r.C2 @ np.linalg.matrix_power(r.A2, i) for i in range(p)]) if p else np.zeros((0, 0))
    rc, _ = numeric_rank(ctrb)
    ro, _ = numeric_rank(obsv)
    checks["A5"] = AssumptionCheck(rc == p and ro == p,
                                   {"ctrb_rank": rc, "obsv_rank": ro, "required": p})
    rb, sb = numeric_rank(r.B1)
    rc1, sc1 = numeric_rank(r.C1)
    checks["A6"] = AssumptionCheck(rb == r.c and rc1 == r.c and r.c <= min(r.d, r.m),
                                   {"rank_B1": rb, "rank_C1": rc1, "c": r.c})
    rC, sC = numeric_rank(r.C)
    checks["A9"] = AssumptionCheck(rC == r.d and r.d <= r.N, {"rank_C": rC, "d": r.d,
                                                               "sv_C": sC.tolist()})
    gap = kalman_bertram_gap(r.A2, h)
    checks["A10"] = AssumptionCheck(gap > 1e-8, {"min_lattice_distance": gap})

    long_idx = list(spec.long_idx)
    if r.c < r.d and long_idx:
        C1_true = r.C1

        def perp_cross(t):
            C1 = np.reshape(spec.builder(t)[3], (spec.d, spec.c))
            return lower_triangular_orthocomplement(C1).T @ C1_true

        # Assumption C: lower bound of |C1perp(theta1)' C1| / |theta1 - theta1^0| over the box
        rng = np.random.default_rng(seed)
        lo, up = spec.lower[long_idx], spec.upper[long_idx]
        draws = lo + (up - lo) * rng.random((n_c_draws, len(long_idx)))
        ratios = []
        for t1 in draws:
            t = theta.copy()
            t[long_idx] = t1
            dist = np.linalg.norm(t1 - theta[long_idx])
            if dist > 1e-8:
                ratios.append(np.linalg.norm(perp_cross(t), 2) / dist)
        cstar = float(np.min(ratios)) if ratios else np.nan
        checks["C"] = AssumptionCheck(bool(cstar > 1e-6), {"min_ratio": cstar, "draws": len(ratios)})

        J = fd_jacobian(lambda t: perp_cross(t).ravel(order="F"), theta, long_idx)
        rank_e, sv_e = numeric_rank(J)
        checks["E"] = AssumptionCheck(rank_e == spec.s1, {"rank": rank_e, "s1": spec.s1,
                                                          "singular_values": sv_e.tolist()})
    else:
        checks["C"] = AssumptionCheck(True, {"note": "no long-run parameters"})
        checks["E"] = AssumptionCheck(True, {"note": "no long-run parameters"})

    checks["F"] = _check_psi_rank(spec, theta, h, j_max)
    if built_error is not None:
        checks.setdefault("build", AssumptionCheck(False, {"error": str(built_error)}))
    return AssumptionReport(spec.name, theta, h, RANK_RTOL, checks)


def _check_psi_rank(spec, theta, h, j_max):
    short = list(spec.short_idx)

    def psi(t):
        f = discretize(build_realization(spec, t, check_box=False), h)
        return f.psi(j_max)

    try:
        J = fd_jacobian(psi, theta, short)
    except (ValueError, np.linalg.LinAlgError, RuntimeError) as exc:
        return AssumptionCheck(False, {"error": str(exc)})
    d2 = spec.d**2
    ranks = []
    j0 = None
    last_sv = None
    for j in range(j_max + 1):
        rows = np.r_[0:(j + 1) * d2, (j_max + 1) * d2:(j_max + 2) * d2]
        rk, sv = numeric_rank(J[rows])
        ranks.append(rk)
        last_sv = sv
        if rk == len(short) and j0 is None:
            j0 = max(j, 1)
    measured = {"s2": len(short), "ranks": ranks, "j0": j0}
    if j0 is None:
        measured["singular_values"] = last_sv.tolist()
    return AssumptionCheck(j0 is not None, measured)
