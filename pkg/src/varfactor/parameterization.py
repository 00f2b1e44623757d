"""
Unconstrained coordinates for Schur-stable, reduced-rank VAR polynomials.

The route is

    eta  <->  (F_j, Q_j), j = 1..k  ->  block Toeplitz U(0..k)  ->  Upsilon(z)

where ``F_j F_j' = V_j = C_{j-1} - C_j`` are the successive differences of
the lower Schur complements of the block Toeplitz matrix, and ``Q_j`` are the
orthogonal (j < k) or s x m semi-orthogonal (j = k) matrices linking
``F_j`` to ``B_j = (U(j) - xi' U^{-1} kappa) D_{j-1}^{-1/2}``. The rank of the
last difference ``V_k`` equals the rank of ``Upsilon_k``.

Block layout: the assembled Toeplitz matrix has U(j) in block (1, j+1) and
U(j)' in block (j+1, 1). With this layout the Yule-Walker solution
``[A_1 ... A_k] = [U(1) ... U(k)] U_{k-1}^{-1}`` yields the transposed
coefficients, ``A_j = Upsilon_j'``, so the blocks produced from a polynomial
are the autocovariances of the recursion driven by the transposed
coefficients ``Upsilon_j'``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import (autocovariances, is_positive_definite, lower_factor,
                      solve_lyapunov, sym_inv_sqrt, sym_sqrt,
                      symmetrize)
from .errors import (CayleySingular, DecodeFailure, IndefiniteResult,
                     NotSemiOrthogonal, RankMismatch, SingularLeadingBlock,
                     Unstable)
from .matpoly import RANK_TOL, MatrixPolynomial, numerical_rank, spectral_radius

ORTHO_TOL = 1e-10
CAYLEY_MIN_SV = 1e-6
SINGULAR_COND = 1e13


# --------------------------------------------------------------------------
# VAR(1): Upsilon = V1 Q (I + V1 V1')^{-1/2}
# --------------------------------------------------------------------------

def var1_from_vq(V1, Q) -> np.ndarray:
    """
    Reduced-rank stable VAR(1) matrix from an m x s factor and an s x m
    semi-orthogonal matrix.

    The result satisfies ``Gamma = Upsilon Gamma Upsilon' + I`` with
    ``Gamma = I + V1 V1'``, hence has spectral radius below one.
    """
    V1 = np.atleast_2d(np.asarray(V1, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    m = V1.shape[0]
    s = V1.shape[1] if V1.size else 0
    if s == 0:
        return np.zeros((m, m))
    if Q.shape != (s, m):
        raise NotSemiOrthogonal(f"Q has shape {Q.shape}, expected {(s, m)}")
    if np.linalg.norm(Q @ Q.T - np.eye(s)) > ORTHO_TOL:
        raise NotSemiOrthogonal("Q Q' differs from the identity")
    return V1 @ Q @ sym_inv_sqrt(np.eye(m) + V1 @ V1.T)


def var1_to_vq(Upsilon, s: int, rank_tol: float = RANK_TOL):
    """
    Invert :func:`var1_from_vq`.

    Solves the Lyapunov equation for Gamma, takes the rank-s lower factor V1
    of ``V = Gamma - I`` and the semi-orthogonal Q with
    ``V1 Q = Upsilon Gamma^{1/2}``.
    """
    Y = np.atleast_2d(np.asarray(Upsilon, dtype=float))
    m = Y.shape[0]
    if np.max(np.abs(np.linalg.eigvals(Y))) >= 1.0:
        raise Unstable("Upsilon is not Schur-stable")
    if numerical_rank(Y, rank_tol) != s:
        raise RankMismatch(f"Upsilon has rank {numerical_rank(Y, rank_tol)}, expected {s}")
    if s == 0:
        return np.zeros((m, 0)), np.zeros((0, m))
    Gamma = solve_lyapunov(Y, np.eye(m))
    V1 = lower_factor(Gamma - np.eye(m), s)
    return V1, _procrustes(V1, Y @ sym_sqrt(Gamma))


# --------------------------------------------------------------------------
# block Toeplitz matrices and their Schur complement chains
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlockToeplitz:
    """Symmetric block Toeplitz matrix given by its first block row U(0), ..., U(k)."""

    blocks: tuple[np.ndarray, ...]

    def __init__(self, blocks):
        bl = tuple(np.array(b, dtype=float) for b in blocks)
        if len(bl) < 2:
            raise ValueError("need at least U(0) and U(1)")
        m = bl[0].shape[0]
        if any(b.shape != (m, m) for b in bl):
            raise ValueError("all blocks must be m x m")
        if not np.allclose(bl[0], bl[0].T, atol=1e-10 * max(1.0, np.abs(bl[0]).max())):
            raise ValueError("U(0) must be symmetric")
        object.__setattr__(self, "blocks", (symmetrize(bl[0]),) + bl[1:])

    @property
    def dim(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def order(self) -> int:
        return len(self.blocks) - 1

    def leading(self, j: int) -> np.ndarray:
        """Assembled matrix of order j, size (j+1)m."""
        m = self.dim
        out = np.empty(((j + 1) * m, (j + 1) * m))
        for a in range(j + 1):
            for b in range(j + 1):
                blk = self.blocks[b - a] if b >= a else self.blocks[a - b].T
                out[a * m:(a + 1) * m, b * m:(b + 1) * m] = blk
        return out

    def assemble(self) -> np.ndarray:
        return self.leading(self.order)

    def is_positive_definite(self) -> bool:
        return is_positive_definite(self.assemble())


@dataclass(frozen=True, eq=False)
class SchurChain:
    """Lower (C_j) and upper (D_j) Schur complements, j = 0..k, and the B_j factors."""

    C: tuple[np.ndarray, ...]
    D: tuple[np.ndarray, ...]
    B: tuple[np.ndarray, ...]
    cross: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def V(self) -> tuple[np.ndarray, ...]:
        """Differences C_{j-1} - C_j, j = 1..k."""
        return tuple(symmetrize(self.C[j - 1] - self.C[j]) for j in range(1, len(self.C)))


def _solve_leading(T: BlockToeplitz, j: int, rhs: np.ndarray) -> np.ndarray:
    A = T.leading(j)
    if np.linalg.cond(A) > SINGULAR_COND:
        raise SingularLeadingBlock(f"leading block matrix of order {j} is singular")
    return np.linalg.solve(A, rhs)


def _xi(T: BlockToeplitz, j: int) -> np.ndarray:
    """xi_j, the (jm x m) stack U(1)', ..., U(j)'."""
    return np.vstack([T.blocks[i].T for i in range(1, j + 1)])


def _kappa(T: BlockToeplitz, j: int) -> np.ndarray:
    """kappa_j, the (jm x m) stack U(j), ..., U(1)."""
    return np.vstack([T.blocks[i] for i in range(j, 0, -1)])


def schur_chain(T: BlockToeplitz) -> SchurChain:
    """
    Schur complements of the order j-1 block in the order j block matrix,
    for both the lower and upper partitions.

    ``C_j = U(0) - xi_j' U_{j-1}^{-1} xi_j``, ``D_j = U(0) - kappa_j' U_{j-1}^{-1} kappa_j``,
    and ``B_j = (U(j) - xi_{j-1}' U_{j-2}^{-1} kappa_{j-1}) D_{j-1}^{-1/2}`` so that
    ``C_{j-1} - C_j = B_j B_j'``.
    """
    U0 = T.blocks[0]
    C, D, B, cross = [U0], [U0], [], []
    for j in range(1, T.order + 1):
        xi, kap = _xi(T, j), _kappa(T, j)
        C.append(symmetrize(U0 - xi.T @ _solve_leading(T, j - 1, xi)))
        D.append(symmetrize(U0 - kap.T @ _solve_leading(T, j - 1, kap)))
        if j == 1:
            x = np.zeros_like(U0)
        else:
            x = _xi(T, j - 1).T @ _solve_leading(T, j - 2, _kappa(T, j - 1))
        cross.append(x)
        try:
            B.append((T.blocks[j] - x) @ sym_inv_sqrt(D[j - 1]))
        except np.linalg.LinAlgError as exc:
            raise SingularLeadingBlock(f"D_{j - 1} is not positive definite") from exc
    return SchurChain(tuple(C), tuple(D), tuple(B), tuple(cross))


def yule_walker_rows(T: BlockToeplitz) -> list[np.ndarray]:
    """Row blocks of ``[U(1) ... U(k)] U_{k-1}^{-1}``."""
    k, m = T.order, T.dim
    xi = _xi(T, k)
    sol = _solve_leading(T, k - 1, xi)  # = U_{k-1}^{-1} xi_k
    rows = sol.T
    return [rows[:, j * m:(j + 1) * m] for j in range(k)]


def coeffs_from_toeplitz(T: BlockToeplitz) -> MatrixPolynomial:
    """Stable polynomial whose transposed coefficients solve the Yule-Walker system."""
    return MatrixPolynomial([A.T for A in yule_walker_rows(T)])


def toeplitz_for(poly: MatrixPolynomial) -> BlockToeplitz:
    """Unit-innovation autocovariance blocks paired with ``poly`` (see module docstring)."""
    return BlockToeplitz(autocovariances([c.T for c in poly.coeffs]))


# --------------------------------------------------------------------------
# (F_j, Q_j) parameters
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StableReducedRankParam:
    """
    Factor sequence ``(F_j, Q_j)``.

    ``F_j`` is m x m lower triangular for j < k and m x s lower trapezoidal for
    j = k; ``Q_j`` is m x m orthogonal for j < k and s x m semi-orthogonal for
    j = k. ``s`` is the rank of the last coefficient.
    """

    m: int
    k: int
    s: int
    factors: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __post_init__(self):
        if len(self.factors) != self.k:
            raise ValueError(f"expected {self.k} factor pairs, got {len(self.factors)}")
        for j, (F, Q) in enumerate(self.factors, start=1):
            cols = self.m if j < self.k else self.s
            if F.shape != (self.m, cols) or Q.shape != (cols, self.m):
                raise ValueError(f"factor {j} has shapes {F.shape}, {Q.shape}")
            if cols and np.linalg.norm(Q @ Q.T - np.eye(cols)) > 1e-8:
                raise NotSemiOrthogonal(f"Q_{j} is not semi-orthogonal")

    @property
    def V(self) -> list[np.ndarray]:
        return [F @ F.T for F, _ in self.factors]


def project_rank(V, s: int) -> np.ndarray:
    """Nearest (Frobenius) PSD matrix of rank at most s: keep the s largest eigenpairs."""
    V = symmetrize(np.asarray(V, dtype=float))
    w, P = np.linalg.eigh(V)
    w, P = w[::-1], P[:, ::-1]
    w = w.copy()
    w[s:] = 0.0
    return (P * w) @ P.T


def toeplitz_from_param(p: StableReducedRankParam, U0=None) -> BlockToeplitz:
    """
    Rebuild U(1), ..., U(k) from the factor sequence.

    ``U(j) = xi_{j-1}' U_{j-2}^{-1} kappa_{j-1} + F_j Q_j D_{j-1}^{1/2}``.
    With ``U0=None`` the diagonal block is ``I + sum_j V_j``, which makes the
    last lower Schur complement the identity (unit innovation variance) and
    keeps the chain positive definite for every input.

    Raises
    ------
    IndefiniteResult
        When an explicit ``U0`` is too small for the requested differences.
    """
    m = p.m
    if U0 is None:
        U0 = np.eye(m) + sum(p.V, np.zeros((m, m)))
    U0 = symmetrize(np.asarray(U0, dtype=float))
    if not is_positive_definite(U0):
        raise IndefiniteResult("U(0) is not positive definite")
    blocks = [U0]
    Cj = U0
    Dprev = U0
    for j, (F, Q) in enumerate(p.factors, start=1):
        partial = BlockToeplitz(blocks + [np.zeros((m, m))])
        if j == 1:
            cross = np.zeros((m, m))
        else:
            kap = _kappa(partial, j - 1)
            sol = _solve_leading(partial, j - 2, kap)
            cross = _xi(partial, j - 1).T @ sol
            Dprev = symmetrize(U0 - kap.T @ sol)
        blocks.append(cross + F @ Q @ sym_sqrt(Dprev))
        Cj = symmetrize(Cj - F @ F.T)
        if not is_positive_definite(Cj):
            raise IndefiniteResult(f"Schur complement C_{j} lost positive definiteness")
    return BlockToeplitz(blocks)


def param_from_coeffs(poly: MatrixPolynomial, s: int, rank_tol: float = RANK_TOL):
    """
    Factor sequence of a Schur-stable polynomial whose last coefficient has rank s.

    Returns
    -------
    param : StableReducedRankParam
    U0 : (m, m) array
        The diagonal Toeplitz block (unit-innovation variance).
    """
    m, k = poly.dim, poly.degree
    if spectral_radius(poly) >= 1.0:
        raise Unstable("polynomial is not Schur-stable")
    # measured against the whole polynomial so a rounded zero block has rank 0
    poly_scale = max(1.0, max(np.linalg.norm(c, 2) for c in poly.coeffs))
    rk = numerical_rank(poly.coeffs[-1], rank_tol, poly_scale)
    if rk != s:
        raise RankMismatch(f"last coefficient has rank {rk}, expected {s}")
    T = toeplitz_for(poly)
    chain = schur_chain(T)
    scale = np.sqrt(np.linalg.norm(T.blocks[0], 2))
    if _scaled_rank(chain.B[-1], scale, rank_tol) != s:
        raise RankMismatch(f"rank(C_{k - 1} - C_{k}) differs from {s}")
    factors = []
    for j, Bj in enumerate(chain.B, start=1):
        cols = m if j < k else s
        F = lower_factor(Bj @ Bj.T, cols)
        factors.append((F, _procrustes(F, Bj)))
    return StableReducedRankParam(m, k, s, tuple(factors)), T.blocks[0]


def _scaled_rank(B: np.ndarray, scale: float, rank_tol: float) -> int:
    # B_j is measured against the square root of U(0), not its own norm
    sv = np.linalg.svd(B, compute_uv=False)
    return int(np.sum(sv > rank_tol * scale))


def _procrustes(F: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Semi-orthogonal Q (rows) minimizing ||F Q - B||; exact when F F' = B B'."""
    if F.shape[1] == 0:
        return np.zeros((0, B.shape[1]))
    w, _, zt = np.linalg.svd(F.T @ B, full_matrices=False)
    return w @ zt


def _last_factor(Bk: np.ndarray, s: int):
    F = lower_factor(Bk @ Bk.T, s)
    return F, _procrustes(F, Bk)


def truncated_param(poly: MatrixPolynomial, s: int) -> StableReducedRankParam:
    """
    Factor sequence of a stable polynomial with the last pair cut to rank s.

    The last difference V_k is replaced by its rank-s eigen-truncation and
    ``Q_k`` (taken relative to the eigen square root of V_k) keeps its first
    s rows, so B_k becomes ``P_s Lambda_s^{1/2} Q_k[:s]``.
    """
    m, k = poly.dim, poly.degree
    if spectral_radius(poly) >= 1.0:
        raise Unstable("polynomial is not Schur-stable")
    B = schur_chain(toeplitz_for(poly)).B
    factors = []
    for j, Bj in enumerate(B, start=1):
        if j < k:
            F = lower_factor(Bj @ Bj.T)
            factors.append((F, _procrustes(F, Bj)))
            continue
        w, P = np.linalg.eigh(symmetrize(Bj @ Bj.T))
        w, P = w[::-1], P[:, ::-1]
        root = P * np.sqrt(np.clip(w, 0.0, None))
        Qfull = _procrustes(root, Bj)
        factors.append(_last_factor(root[:, :s] @ Qfull[:s], s))
    return StableReducedRankParam(m, k, s, tuple(factors))


# --------------------------------------------------------------------------
# unconstrained coordinates
# --------------------------------------------------------------------------

def eta_length(m: int, k: int, s: int) -> int:
    return (k - 1) * m * m + s * (2 * m - s)


@dataclass(frozen=True, eq=False)
class UnconstrainedVector:
    """
    Flat coordinate vector with its shape descriptor.

    ``rotations`` holds one fixed m x m orthogonal matrix per factor; the
    Cayley chart for ``Q_j`` is taken relative to it.
    """

    values: np.ndarray
    m: int
    k: int
    s: int
    rotations: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", vals)
        if vals.size != eta_length(self.m, self.k, self.s):
            raise ValueError(
                f"length {vals.size} does not match (m={self.m}, k={self.k}, s={self.s})")

    def with_values(self, values) -> "UnconstrainedVector":
        return UnconstrainedVector(values, self.m, self.k, self.s, self.rotations)


def _cayley(S: np.ndarray) -> np.ndarray:
    n = S.shape[0]
    return np.linalg.solve((np.eye(n) + S).T, (np.eye(n) - S).T).T


def _stiefel_encode(Y: np.ndarray, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Skew block A (s x s) and B ((m-s) x s) with Cay([[A, -B'], [B, 0]])[:, :s] = Y."""
    Y1, Y2 = Y[:s], Y[s:]
    G = np.eye(s) + Y1
    if np.linalg.svd(G, compute_uv=False)[-1] < CAYLEY_MIN_SV:
        raise CayleySingular("orthonormal frame is outside the Cayley chart")
    Ginv = np.linalg.inv(G)
    B = -Y2 @ Ginv
    A = 2.0 * Ginv - np.eye(s) - B.T @ B
    return 0.5 * (A - A.T), B


def _stiefel_decode(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    s = A.shape[0]
    m = s + B.shape[0]
    S = np.zeros((m, m))
    S[:s, :s] = A
    S[s:, :s] = B
    S[:s, s:] = -B.T
    return _cayley(S)[:, :s]


def _completion(Y: np.ndarray) -> np.ndarray:
    """Orthogonal R whose first columns are Y."""
    m, s = Y.shape
    q, _ = np.linalg.qr(np.hstack([Y, np.eye(m)]))
    R = q[:, :m]
    # qr may flip signs of the leading columns
    R[:, :s] = Y
    return R


def eta_encode(p: StableReducedRankParam, rotations=None, center: bool = False,
               recenter: bool = True) -> UnconstrainedVector:
    """
    Flatten a factor sequence into unconstrained coordinates.

    Each F_j contributes log-diagonal then strictly-lower entries (row-major);
    each Q_j contributes the strictly-lower entries of the skew block A then
    the entries of B in the Cayley chart of ``R_j' Q_j'``. With ``center`` the
    rotations are chosen so every Q_j sits at the chart origin; otherwise the
    identity is used, and a factor falling outside the chart is recentred
    (or :class:`CayleySingular` raised when ``recenter`` is false).
    """
    m, k, s = p.m, p.k, p.s
    rots = list(rotations) if rotations is not None else [np.eye(m)] * k
    out = []
    for j, (F, Q) in enumerate(p.factors):
        cols = F.shape[1]
        diag = np.diag(F[:cols, :cols])
        if np.any(diag <= 0):
            raise DecodeFailure(f"factor {j + 1} has a non-positive diagonal")
        lower = F[np.tril_indices(m, -1, cols)] if cols else np.zeros(0)
        out.append(np.log(diag))
        out.append(lower)
        if cols == 0:
            continue
        Y = Q.T
        if center:
            rots[j] = _completion(Y)
        try:
            A, B = _stiefel_encode(rots[j].T @ Y, cols)
        except CayleySingular:
            if not recenter:
                raise
            rots[j] = _completion(Y)
            A, B = _stiefel_encode(rots[j].T @ Y, cols)
        out.append(A[np.tril_indices(cols, -1)])
        out.append(B.ravel())
    return UnconstrainedVector(np.concatenate(out) if out else np.zeros(0), m, k, s,
                               tuple(rots))


def eta_decode(eta: UnconstrainedVector) -> StableReducedRankParam:
    """Inverse of :func:`eta_encode`."""
    m, k, s = eta.m, eta.k, eta.s
    rots = eta.rotations if eta.rotations is not None else [np.eye(m)] * k
    v = eta.values
    pos = 0
    factors = []
    for j in range(k):
        cols = m if j < k - 1 else s
        F = np.zeros((m, cols))
        F[np.diag_indices(cols)] = np.exp(v[pos:pos + cols])
        pos += cols
        li = np.tril_indices(m, -1, cols)
        n_low = li[0].size
        F[li] = v[pos:pos + n_low]
        pos += n_low
        if cols == 0:
            factors.append((F, np.zeros((0, m))))
            continue
        A = np.zeros((cols, cols))
        ai = np.tril_indices(cols, -1)
        A[ai] = v[pos:pos + ai[0].size]
        A = A - A.T
        pos += ai[0].size
        nb = (m - cols) * cols
        B = v[pos:pos + nb].reshape(m - cols, cols)
        pos += nb
        Y = rots[j] @ _stiefel_decode(A, B)
        factors.append((F, Y.T))
    if not all(np.all(np.isfinite(F)) for F, _ in factors):
        raise DecodeFailure("coordinates overflow")
    return StableReducedRankParam(m, k, s, tuple(factors))


def polynomial_from_eta(eta: UnconstrainedVector) -> MatrixPolynomial:
    """Decode coordinates all the way to the stable reduced-rank polynomial."""
    param = eta_decode(eta)
    m, k = eta.m, eta.k
    try:
        if eta.s == 0:
            # V_k = 0: the order-k solution is the order-(k-1) one padded with zeros
            if k == 1:
                return MatrixPolynomial.zero(m, 1)
            head = StableReducedRankParam(m, k - 1, m, param.factors[:-1])
            coeffs = list(coeffs_from_toeplitz(toeplitz_from_param(head)).coeffs)
            return MatrixPolynomial(coeffs + [np.zeros((m, m))])
        return coeffs_from_toeplitz(toeplitz_from_param(param))
    except (np.linalg.LinAlgError, IndefiniteResult, SingularLeadingBlock) as exc:
        raise DecodeFailure(str(exc)) from exc


def encode_polynomial(poly: MatrixPolynomial, s: int, **kw) -> UnconstrainedVector:
    param, _ = param_from_coeffs(poly, s)
    return eta_encode(param, **kw)
