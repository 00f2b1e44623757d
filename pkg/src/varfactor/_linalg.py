"""Small dense linear-algebra helpers used across the package."""

from __future__ import annotations

import numpy as np
from scipy import linalg

DIRECT_LYAPUNOV_MAX = 60


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def sym_sqrt(A: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition (negative eigenvalues clipped)."""
    w, P = np.linalg.eigh(symmetrize(A))
    return (P * np.sqrt(np.clip(w, 0.0, None))) @ P.T


def sym_inv_sqrt(A: np.ndarray) -> np.ndarray:
    w, P = np.linalg.eigh(symmetrize(A))
    if w[0] <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return (P / np.sqrt(w)) @ P.T


def is_positive_definite(A: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(symmetrize(A))
    except np.linalg.LinAlgError:
        return False
    return True


def lower_factor(V: np.ndarray, s: int | None = None) -> np.ndarray:
    """
    Lower-trapezoidal factor L (m x s) with positive diagonal and L L' = V.

    ``V`` is first truncated to its ``s`` leading eigenpairs, so a PSD input of
    numerical rank ``s`` gives the usual rank-deficient Cholesky factor.
    """
    V = symmetrize(np.asarray(V, dtype=float))
    m = V.shape[0]
    if s is None:
        s = m
    if s == 0:
        return np.zeros((m, 0))
    w, P = np.linalg.eigh(V)
    w, P = w[::-1][:s], P[:, ::-1][:, :s]
    F = P * np.sqrt(np.clip(w, 0.0, None))
    return lower_factor_of(F)


def lower_factor_of(F: np.ndarray) -> np.ndarray:
    """Lower-trapezoidal L with L L' = F F', F of full column rank."""
    _, R = np.linalg.qr(F.T)
    L = R.T
    signs = np.sign(np.diag(L))
    signs[signs == 0] = 1.0
    return L * signs


def solve_lyapunov(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve X = A X A' + Q for a Schur-stable A."""
    n = A.shape[0]
    if n <= DIRECT_LYAPUNOV_MAX:
        X = linalg.solve_discrete_lyapunov(A, Q, method="direct")
    else:
        X = _lyapunov_doubling(A, Q)
    return symmetrize(X)


def _lyapunov_doubling(A, Q, tol=1e-15, max_iter=100):
    X = Q.copy()
    Ak = A.copy()
    for _ in range(max_iter):
        step = Ak @ X @ Ak.T
        X = X + step
        Ak = Ak @ Ak
        if np.linalg.norm(step) <= tol * np.linalg.norm(X):
            break
    return X


def autocovariances(coeffs, sigma: np.ndarray | None = None, nlags: int | None = None):
    """
    Autocovariances gamma(h) = E[W_t W_{t-h}'] of the stationary recursion
    ``W_t = sum_j A_j W_{t-j} + e_t`` with Var(e_t) = ``sigma``.

    Returns a list ``[gamma(0), ..., gamma(nlags)]`` (default ``nlags = k``).
    """
    coeffs = [np.asarray(c, dtype=float) for c in coeffs]
    k = len(coeffs)
    m = coeffs[0].shape[0]
    if sigma is None:
        sigma = np.eye(m)
    if nlags is None:
        nlags = k
    C = np.zeros((m * k, m * k))
    C[:m] = np.hstack(coeffs)
    if k > 1:
        C[m:, :-m] = np.eye(m * (k - 1))
    E = np.zeros_like(C)
    E[:m, :m] = sigma
    P = solve_lyapunov(C, E)
    gam = [P[:m, h * m:(h + 1) * m] for h in range(k)]
    gam[0] = symmetrize(gam[0])
    for h in range(k, nlags + 1):
        g = np.zeros((m, m))
        for j, A in enumerate(coeffs, start=1):
            gh = gam[h - j] if h - j >= 0 else gam[j - h].T
            g = g + A @ gh
        gam.append(g)
    return gam[: nlags + 1]
