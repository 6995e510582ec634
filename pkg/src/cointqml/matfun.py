"""
Dense matrix kernels: matrix exponential, the sampled noise covariance,
the filtering Riccati equation and the lower-triangular orthocomplement.

All routines are pure functions on small dense ``float64`` arrays.
"""

import numpy as np
import scipy.linalg as la
from numba import njit


class DAREError(RuntimeError):
    """Raised when the Riccati iteration fails.

    Attributes:
        residual: Frobenius norm of the last iterate's residual (``nan`` if the
            iteration broke down before a residual was available).
        iterations: number of iterations performed.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


# exp overflows beyond ~709; a norm this large is never a sampled model matrix
_EXPM_NORM_LIMIT = 700.0


def _as_finite_square(M, name="M"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def matrix_exponential(M):
    """Return ``exp(M)`` by scaling and squaring with a Pade approximant."""
    M = _as_finite_square(M)
    if M.size == 0:
        return np.zeros((0, 0))
    if np.linalg.norm(M, 1) > _EXPM_NORM_LIMIT:
        raise OverflowError("matrix norm too large for a finite exponential")
    E = la.expm(M)
    if not np.all(np.isfinite(E)):
        raise OverflowError("matrix exponential overflowed")
    return E


def symmetrize(S):
    return 0.5 * (S + S.T)


def is_psd(S, tol=1e-10):
    """Symmetry plus eigenvalue check; ``tol`` is relative to the largest |eigenvalue|."""
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        return True
    scale = max(1.0, float(np.max(np.abs(S))))
    if np.max(np.abs(S - S.T)) > 1e-12 * scale:
        return False
    w = np.linalg.eigvalsh(symmetrize(S))
    return bool(w[0] >= -tol * max(1.0, abs(w[-1])))


def sampled_system(A, B, Sigma_L, h):
    """Return ``(exp(A h), Sigma_h)`` from a single Van Loan block exponential.

    ``Sigma_h`` is the covariance of ``int_0^h exp(A u) B dL(u)``, i.e.
    ``int_0^h exp(A u) B Sigma_L B^T exp(A^T u) du``.
    """
    A = _as_finite_square(A, "A")
    B = np.asarray(B, dtype=float)
    Sigma_L = np.asarray(Sigma_L, dtype=float)
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    if not is_psd(Sigma_L):
        raise ValueError("Sigma_L must be symmetric positive semidefinite")
    return van_loan(A, B @ Sigma_L @ B.T, h)


def van_loan(A, Q, h):
    """``(exp(A h), int_0^h exp(A u) Q exp(A' u) du)`` for validated inputs."""
    n = A.shape[0]
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -A
    M[:n, n:] = Q
    M[n:, n:] = A.T
    E = matrix_exponential(M * h)
    Phi = np.ascontiguousarray(E[n:, n:].T)
    Sigma_h = np.ascontiguousarray(symmetrize(Phi @ E[:n, n:]))
    return Phi, Sigma_h


def noise_covariance_integral(A, B, Sigma_L, h):
    """``int_0^h exp(A u) B Sigma_L B^T exp(A^T u) du`` via the Van Loan identity."""
    return sampled_system(A, B, Sigma_L, h)[1]


@njit(cache=True)
def _cholesky_small(V):
    # returns (L, ok); ok is False unless V is numerically positive definite
    d = V.shape[0]
    L = np.zeros((d, d))
    vmax = 0.0
    for i in range(d):
        vmax = max(vmax, abs(V[i, i]))
    floor = 1e-14 * max(vmax, 1e-300)
    for j in range(d):
        acc = V[j, j]
        for k in range(j):
            acc -= L[j, k] * L[j, k]
        if acc <= floor:
            return L, False
        L[j, j] = np.sqrt(acc)
        for i in range(j + 1, d):
            acc = V[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / L[j, j]
    return L, True


@njit(cache=True)
def _cholesky_solve(L, B):
    # solve (L L^T) X = B in place of a copy of B
    d, q = B.shape
    X = B.copy()
    for c in range(q):
        for i in range(d):
            acc = X[i, c]
            for k in range(i):
                acc -= L[i, k] * X[k, c]
            X[i, c] = acc / L[i, i]
        for i in range(d - 1, -1, -1):
            acc = X[i, c]
            for k in range(i + 1, d):
                acc -= L[k, i] * X[k, c]
            X[i, c] = acc / L[i, i]
    return X


@njit(cache=True)
def _riccati_map(Omega, Phi, C, Sigma):
    # one step of the filtering Riccati recursion; ok False if C Omega C' is singular
    Ct = np.ascontiguousarray(C.T)
    PO = Phi @ Omega
    POCt = PO @ Ct
    V = C @ Omega @ Ct
    V = 0.5 * (V + V.T)
    L, ok = _cholesky_small(V)
    if not ok:
        return Omega, False
    G = _cholesky_solve(L, np.ascontiguousarray(POCt.T))
    new = PO @ np.ascontiguousarray(Phi.T) - POCt @ G + Sigma
    return 0.5 * (new + new.T), True


@njit(cache=True)
def _stein_solve(F, Sigma):
    # Omega = F Omega F' + Sigma via the Kronecker system; ok False if I - F (x) F is singular
    N = F.shape[0]
    M = np.eye(N * N) - np.kron(F, F)
    try:
        x = np.linalg.solve(M, np.ascontiguousarray(Sigma).ravel())
    except Exception:  # noqa: BLE001 - numba raises a generic error for singular systems
        return Sigma, False
    out = x.reshape((N, N))
    return 0.5 * (out + out.T), np.all(np.isfinite(out))


@njit(cache=True)
def _newton_step(Omega, Phi, C, Sigma):
    # Hewer step: closed loop F from the current gain, then the exact Stein solution for that F
    Ct = np.ascontiguousarray(C.T)
    V = C @ Omega @ Ct
    V = 0.5 * (V + V.T)
    L, ok = _cholesky_small(V)
    if not ok:
        return Omega, False
    K = np.ascontiguousarray(_cholesky_solve(L, C @ Omega @ np.ascontiguousarray(Phi.T)).T)
    F = Phi - K @ C
    if np.max(np.abs(np.linalg.eigvals(F.astype(np.complex128)))) >= 1.0:
        return Omega, False
    return _stein_solve(F, Sigma)


@njit(cache=True)
def _dare_iterate(Phi, C, Sigma, tol, max_iter, damping, newton_after=100):
    # status: 0 converged, 1 max_iter, 2 singular C Omega C^T.
    # Fixed-point steps contract like rho(F)^2; when that is slow, switch to
    # Newton (Hewer) steps, which converge quadratically from a stabilizing gain.
    Omega = Sigma.copy()
    change = np.inf
    newton = True
    for it in range(max_iter):
        if newton and it >= newton_after:
            new, ok = _newton_step(Omega, Phi, C, Sigma)
            if ok:
                # near rho(F) = 1 the Stein solve is ill-conditioned, so Newton steps
                # stall above tol; test the Riccati residual instead of the step size
                nxt, ok2 = _riccati_map(new, Phi, C, Sigma)
                if ok2:
                    diff = nxt - new
                    change = np.sqrt(np.sum(diff * diff))
                    if change <= tol * (1.0 + np.sqrt(np.sum(new * new))):
                        return new, it + 1, change, 0
            else:
                newton = False
                new, ok = _riccati_map(Omega, Phi, C, Sigma)
        else:
            new, ok = _riccati_map(Omega, Phi, C, Sigma)
        if not ok:
            return Omega, it, change, 2
        if damping != 1.0:
            new = damping * new + (1.0 - damping) * Omega
        diff = new - Omega
        change = np.sqrt(np.sum(diff * diff))
        Omega = new
        if change <= tol * (1.0 + np.sqrt(np.sum(Omega * Omega))):
            return Omega, it + 1, change, 0
    return Omega, max_iter, change, 1


def dare_residual(Omega, Phi, C, Sigma):
    """Frobenius norm of the filtering Riccati residual at ``Omega``."""
    new, ok = _riccati_map(np.ascontiguousarray(Omega, dtype=float), np.ascontiguousarray(Phi, dtype=float),
                           np.ascontiguousarray(C, dtype=float), np.ascontiguousarray(Sigma, dtype=float))
    if not ok:
        return float("inf")
    return float(np.linalg.norm(new - Omega))


def solve_dare(Phi, C, Sigma, tol=1e-13, max_iter=100_000, damping=1.0):
    """Solve ``Omega = Phi Omega Phi' - Phi Omega C' (C Omega C')^-1 C Omega Phi' + Sigma``.

    Fixed-point iteration of the Riccati recursion started at ``Sigma``; stops when
    the Frobenius change between iterates is below ``tol * (1 + |Omega|)``.

    Raises:
        DAREError: no convergence within ``max_iter``, a singular ``C Omega C'``
            at some iterate, a residual above ``1e-10 (1 + |Omega|)``, or a closed
            loop ``Phi - K C`` that is not stable.
    """
    return steady_state_filter(Phi, C, Sigma, tol, max_iter, damping)[0]


def steady_state_filter(Phi, C, Sigma, tol=1e-13, max_iter=100_000, damping=1.0):
    """Like :func:`solve_dare` but returns ``(Omega, K, V, F)`` with ``V = C Omega C'``,
    ``K = Phi Omega C' V^-1`` and ``F = Phi - K C``."""
    Phi = _as_finite_square(Phi, "Phi")
    Sigma = _as_finite_square(Sigma, "Sigma")
    C = np.ascontiguousarray(C, dtype=float)
    d, N = C.shape
    if d > N or Phi.shape[0] != N or Sigma.shape[0] != N:
        raise ValueError("incompatible dimensions for the Riccati equation")
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    Phi = np.ascontiguousarray(Phi)
    Sigma = np.ascontiguousarray(Sigma)
    Omega, iters, change, status = _dare_iterate(Phi, C, Sigma, float(tol), int(max_iter),
                                                 float(damping))
    if status == 2:
        if np.linalg.matrix_rank(C) < d:
            raise DAREError("C must have full row rank", iterations=iters)
        raise DAREError("C Omega C^T is numerically singular", iterations=iters)
    if not np.all(np.isfinite(Omega)):
        raise DAREError("Riccati iteration diverged", iterations=iters)
    residual = dare_residual(Omega, Phi, C, Sigma)
    if status == 1:
        raise DAREError(f"no convergence after {iters} iterations (residual {residual:.3e})",
                        residual=residual, iterations=iters)
    if residual > 1e-10 * (1.0 + np.linalg.norm(Omega)):
        raise DAREError(f"residual {residual:.3e} above tolerance", residual=residual,
                        iterations=iters)
    V = symmetrize(C @ Omega @ C.T)
    K = np.linalg.solve(V, C @ Omega @ Phi.T).T
    F = Phi - K @ C
    if spectral_radius(F) >= 1.0:
        raise DAREError("closed loop Phi - K C is not stable", residual=residual,
                        iterations=iters)
    return Omega, K, V, F


def spectral_radius(M):
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def lower_triangular_orthocomplement(C1, tol=1e-10):
    """Lower triangular ``P`` with ``P^T P = I`` and ``P^T C1 = 0``.

    Column ``j`` of ``P`` vanishes in rows ``0..j-1``; each column's first
    non-negligible entry is positive. Uniqueness of this form fixes ``P``.
    """
    C1 = np.asarray(C1, dtype=float)
    if C1.ndim != 2:
        raise ValueError("C1 must be a 2-d array")
    d, c = C1.shape
    if c > d:
        raise ValueError("C1 must have at least as many rows as columns")
    if c and np.linalg.matrix_rank(C1) < c:
        raise np.linalg.LinAlgError("C1 must have full column rank")
    k = d - c
    if k == 0:
        return np.zeros((d, 0))
    # orthonormal basis of the complement of span(C1)
    U = la.null_space(C1.T) if c else np.eye(d)
    P = np.zeros((d, k))
    # column j lies in span(U) with zeros above row j, orthogonal to later columns
    for j in reversed(range(k)):
        rows = [U[i] for i in range(j)] + [P[:, l] @ U for l in range(j + 1, k)]
        if rows:
            _, s, vt = np.linalg.svd(np.array(rows), full_matrices=True)
            coef = vt[-1]
        else:
            coef = np.ones(k)
        v = U @ coef
        v[:j] = 0.0
        v /= np.linalg.norm(v)
        lead = np.flatnonzero(np.abs(v) > tol)[0]
        if v[lead] < 0:
            v = -v
        P[:, j] = v
    return P
