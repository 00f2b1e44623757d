"""
Separating unit roots from stable roots by polynomial factorization.

A VAR polynomial Phi(z) with r regular unit roots and no zero roots is split as

    left:   Phi(z) = Upsilon(z) (I - U z)
    right:  Phi(z) = (I - U z) Upsilon(z)

where U is a rank-r idempotent and Upsilon(z) is Schur-stable with r zero
roots. The canonical U is the orthogonal projector onto the null space of
Pi = sum_j Phi_j - I (left) or of Pi' (right).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import (IrregularUnitRoot, NoConvergence, NonvanishingTail,
                     PreconditionViolation, RankMismatch, SingularMap)
from .matpoly import (RANK_TOL, UNIT_TOL, ZERO_TOL, MatrixPolynomial,
                      classify_spectrum, distance, numerical_rank,
                      poly_multiply)

IDEMPOTENT_TOL = 1e-8
TAIL_TOL = 1e-8
STALL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class DifferenceOperator:
    """The operator I - U B for an idempotent U of rank ``rank``."""

    U: np.ndarray
    rank: int

    def __post_init__(self):
        U = np.array(self.U, dtype=float)
        U.setflags(write=False)
        object.__setattr__(self, "U", U)
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise ValueError("U must be square")
        if np.linalg.norm(U @ U - U) > IDEMPOTENT_TOL * max(1.0, np.linalg.norm(U)):
            raise ValueError("U is not idempotent")

    @classmethod
    def from_matrix(cls, U, rank_tol: float = RANK_TOL) -> "DifferenceOperator":
        return cls(U, numerical_rank(U, rank_tol))

    @property
    def dim(self) -> int:
        return self.U.shape[0]

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.U, self.U.T, atol=1e-10))

    def as_polynomial(self) -> MatrixPolynomial:
        return MatrixPolynomial([self.U])

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Difference the rows of a (T, m) series: returns X_t - U X_{t-1}, t >= 1."""
        X = np.asarray(X, dtype=float)
        return X[1:] - X[:-1] @ self.U.T


@dataclass(frozen=True, eq=False)
class FactorizationPair:
    stable: MatrixPolynomial
    diff: DifferenceOperator
    side: Literal["left", "right"]

    def compose(self) -> MatrixPolynomial:
        if self.side == "left":
            return compose_left(self)
        return compose_right(self)

    def residual(self, Phi: MatrixPolynomial) -> float:
        """Frobenius distance between Phi and the exact product of the factors."""
        if self.side == "left":
            prod = poly_multiply(self.stable, self.diff)
        else:
            prod = poly_multiply(self.diff, self.stable)
        return distance(prod, Phi)


@dataclass(frozen=True, eq=False)
class LongRunMatrix:
    """Rank factorization Pi = alpha beta' with orthonormal beta."""

    Pi: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray


def null_projector(M, rank_tol: float = RANK_TOL, rank: int | None = None) -> DifferenceOperator:
    """
    Orthogonal projector onto the (numerical) null space of a square matrix.

    If ``rank`` is given, the projector spans the ``rank`` right singular
    vectors with the smallest singular values regardless of their size.
    """
    M = np.asarray(M, dtype=float)
    m = M.shape[0]
    if M.shape != (m, m):
        raise ValueError("M must be square")
    if rank is None:
        rank = m - numerical_rank(M, rank_tol)
    if not 0 <= rank <= m:
        raise ValueError(f"rank {rank} out of range for dimension {m}")
    if rank == 0:
        return DifferenceOperator(np.zeros((m, m)), 0)
    _, _, vt = np.linalg.svd(M)
    N = vt[m - rank:].T
    U = N @ N.T
    return DifferenceOperator(0.5 * (U + U.T), rank)


def var1_commuting_pair(Phi, max_iter: int = 100, tol: float = 1e-12,
                        unit_tol: float = UNIT_TOL, rank_tol: float = RANK_TOL):
    """
    The unique commuting factorization I - Phi B = (I - Ybar B)(I - Ubar B).

    ``Ubar`` is the limit of Phi^n, found by repeated squaring; ``Ybar = Phi - Ubar``.

    Returns
    -------
    Upsilon : (m, m) array
    Ubar : DifferenceOperator

    Raises
    ------
    IrregularUnitRoot
        When the eigenspace of eigenvalue one is deficient.
    NoConvergence
        When the powers do not settle (unstable or non-unit unimodular roots).
    """
    Phi = np.asarray(Phi, dtype=float)
    m = Phi.shape[0]
    eig = np.linalg.eigvals(Phi)
    n_unit = int(np.sum(np.abs(eig - 1.0) <= unit_tol))
    scale = max(1.0, np.linalg.norm(Phi, 2))
    if n_unit and m - numerical_rank(Phi - np.eye(m), rank_tol, scale) != n_unit:
        raise IrregularUnitRoot("unit eigenvalue of Phi is not regular", roots=eig)

    # X^2 - X is the idempotency residual of the current iterate; rounding can
    # leave the unit eigenvalue at 1 + eps, so stop once it no longer shrinks
    X = Phi.copy()
    best, best_res = None, np.inf
    for _ in range(max_iter):
        with np.errstate(over="ignore", invalid="ignore"):
            X2 = X @ X
        res = np.linalg.norm(X2 - X)
        if not np.isfinite(res):
            break
        if res < best_res:
            best, best_res = X, res
        if res < tol * max(1.0, np.linalg.norm(X)):
            break
        if res > 2 * best_res and best_res < STALL_TOL * scale:
            break
        X = X2
    X = best
    if best is None or best_res >= STALL_TOL * max(1.0, np.linalg.norm(X)):
        raise NoConvergence("powers of Phi do not approach an idempotent limit")
    # the drift of a rounded unit eigenvalue scales the limit without moving its
    # range or kernel; purification pulls those eigenvalues back to one
    for _ in range(3):
        X2 = X @ X
        Xp = 3.0 * X2 - 2.0 * X2 @ X
        res = np.linalg.norm(Xp @ Xp - Xp)
        if not res < best_res:
            break
        X, best_res = Xp, res
    Ubar = DifferenceOperator(X, n_unit)
    return Phi - X, Ubar


def _check_factorable(Phi: MatrixPolynomial, r: int, unit_tol, zero_tol, rank_tol):
    rep = classify_spectrum(Phi, unit_tol, zero_tol, rank_tol)
    if not (rep.unit_count == r and rep.zero_count == 0
            and rep.unstable_count == 0 and rep.unit_regular):
        raise PreconditionViolation(
            f"expected {r} regular unit roots, no zero and no unstable roots; got "
            f"unit={rep.unit_count} (regular={rep.unit_regular}), zero={rep.zero_count}, "
            f"unstable={rep.unstable_count}", roots=rep.roots)
    if numerical_rank(Phi.coeffs[-1], rank_tol) != Phi.dim:
        raise PreconditionViolation("last coefficient is singular", roots=rep.roots)
    return rep


def left_stable_factor(Phi: MatrixPolynomial, U: np.ndarray) -> MatrixPolynomial:
    """Solve Phi(z) = Upsilon(z)(I - Uz) for Upsilon given an idempotent U."""
    ups = [Phi.coeffs[0] - U]
    for c in Phi.coeffs[1:]:
        ups.append(c + ups[-1] @ U)
    return MatrixPolynomial(ups)


def right_stable_factor(Phi: MatrixPolynomial, U: np.ndarray) -> MatrixPolynomial:
    """Solve Phi(z) = (I - Uz)Upsilon(z) for Upsilon given an idempotent U."""
    ups = [Phi.coeffs[0] - U]
    for c in Phi.coeffs[1:]:
        ups.append(c + U @ ups[-1])
    return MatrixPolynomial(ups)


def left_factorize(Phi: MatrixPolynomial, r: int, unit_tol: float = UNIT_TOL,
                   zero_tol: float = ZERO_TOL, rank_tol: float = RANK_TOL) -> FactorizationPair:
    """
    Factor Phi(z) = Upsilon(z)(I - Uz) with U the orthogonal projector onto N(Pi).

    Raises
    ------
    PreconditionViolation
        Spectrum is not r regular unit roots plus stable roots.
    RankMismatch
        Numerical null space of Pi does not have dimension r.
    """
    _check_factorable(Phi, r, unit_tol, zero_tol, rank_tol)
    diff = null_projector(Phi.long_run(), rank_tol)
    if diff.rank != r:
        raise RankMismatch(f"null space of Pi has dimension {diff.rank}, expected {r}")
    return FactorizationPair(left_stable_factor(Phi, diff.U), diff, "left")


def right_factorize(Phi: MatrixPolynomial, r: int, unit_tol: float = UNIT_TOL,
                    zero_tol: float = ZERO_TOL, rank_tol: float = RANK_TOL) -> FactorizationPair:
    """Factor Phi(z) = (I - Uz)Upsilon(z) with U the orthogonal projector onto N(Pi')."""
    _check_factorable(Phi, r, unit_tol, zero_tol, rank_tol)
    diff = null_projector(Phi.long_run().T, rank_tol)
    if diff.rank != r:
        raise RankMismatch(f"null space of Pi' has dimension {diff.rank}, expected {r}")
    return FactorizationPair(right_stable_factor(Phi, diff.U), diff, "right")


def _tail_check(tail: np.ndarray, scale: np.ndarray, tol: float):
    if np.linalg.norm(tail) > tol * max(1.0, np.linalg.norm(scale)):
        raise NonvanishingTail(
            f"degree k+1 term has norm {np.linalg.norm(tail):.3e}")


def compose_left(pair: FactorizationPair, tol: float = TAIL_TOL) -> MatrixPolynomial:
    """Phi_1 = Upsilon_1 + U, Phi_j = Upsilon_j - Upsilon_{j-1} U."""
    if pair.side != "left":
        raise ValueError("compose_left needs a left factorization")
    U = pair.diff.U
    ups = pair.stable.coeffs
    _tail_check(ups[-1] @ U, ups[-1], tol)
    phi = [ups[0] + U] + [ups[j] - ups[j - 1] @ U for j in range(1, len(ups))]
    return MatrixPolynomial(phi)


def compose_right(pair: FactorizationPair, tol: float = TAIL_TOL) -> MatrixPolynomial:
    """Phi_1 = Upsilon_1 + U, Phi_j = Upsilon_j - U Upsilon_{j-1}."""
    if pair.side != "right":
        raise ValueError("compose_right needs a right factorization")
    U = pair.diff.U
    ups = pair.stable.coeffs
    _tail_check(U @ ups[-1], ups[-1], tol)
    phi = [ups[0] + U] + [ups[j] - U @ ups[j - 1] for j in range(1, len(ups))]
    return MatrixPolynomial(phi)


def _pairing_maps(Pi: np.ndarray, r: int, rank_tol: float):
    m = Pi.shape[0]
    if numerical_rank(Pi, rank_tol) != m - r:
        raise SingularMap(f"Pi does not have rank {m - r}")
    PN = null_projector(Pi, rank=r).U
    PNt = null_projector(Pi.T, rank=r).U
    cross = PN @ PNt
    if numerical_rank(cross, 1e-6) != r:
        raise SingularMap("null spaces of Pi and Pi' are (numerically) orthogonal")
    return PN, PNt, np.linalg.pinv(Pi.T, rcond=rank_tol), np.linalg.pinv(cross, rcond=1e-6)


def left_to_right(Phi: MatrixPolynomial, left: FactorizationPair,
                  rank_tol: float = RANK_TOL) -> FactorizationPair:
    """
    Map a left factorization (any idempotent U with range N(Pi)) to a right one.

    A left U is the orthogonal projector P onto N(Pi) plus an offset
    L = U - P sending the row space of Pi into N(Pi). The right operator is
    P' + (Pi')^+ L' P', with P' the orthogonal projector onto N(Pi'). The map is
    affine, sends the symmetric left U to the symmetric right U, and is undone
    by :func:`right_to_left`.
    """
    if left.side != "left":
        raise ValueError("expected a left factorization")
    U = left.diff.U
    Pi = Phi.long_run()
    if np.linalg.norm(Pi @ U) > 1e-8 * max(1.0, np.linalg.norm(Pi)):
        raise SingularMap("U does not map into the null space of Pi")
    PN, PNt, pinv_Pit, _ = _pairing_maps(Pi, left.diff.rank, rank_tol)
    offset = pinv_Pit @ (U - PN).T @ PNt
    UR = DifferenceOperator(PNt + offset, left.diff.rank)
    return FactorizationPair(right_stable_factor(Phi, UR.U), UR, "right")


def right_to_left(Phi: MatrixPolynomial, right: FactorizationPair,
                  rank_tol: float = RANK_TOL) -> FactorizationPair:
    """Inverse of :func:`left_to_right`."""
    if right.side != "right":
        raise ValueError("expected a right factorization")
    U = right.diff.U
    Pi = Phi.long_run()
    if np.linalg.norm(U @ Pi) > 1e-8 * max(1.0, np.linalg.norm(Pi)):
        raise SingularMap("U does not annihilate the column space of Pi")
    PN, PNt, _, pinv_cross = _pairing_maps(Pi, right.diff.rank, rank_tol)
    offset_t = Pi.T @ (U - PNt) @ pinv_cross
    UL = DifferenceOperator(PN + offset_t.T, right.diff.rank)
    return FactorizationPair(left_stable_factor(Phi, UL.U), UL, "left")


def cointegration_decompose(Phi: MatrixPolynomial, r: int,
                            rank_tol: float = RANK_TOL) -> LongRunMatrix:
    """
    Rank factorization Pi = alpha beta' from the SVD of Pi.

    ``beta`` has orthonormal columns, each signed so its largest-magnitude
    entry is positive; ``alpha = Pi beta``.
    """
    Pi = Phi.long_run() if isinstance(Phi, MatrixPolynomial) else np.asarray(Phi, dtype=float)
    m = Pi.shape[0]
    rk = numerical_rank(Pi, rank_tol)
    if rk != m - r:
        raise RankMismatch(f"Pi has numerical rank {rk}, expected {m - r}")
    _, _, vt = np.linalg.svd(Pi)
    beta = vt[: m - r].T.copy()
    for j in range(beta.shape[1]):
        if beta[np.argmax(np.abs(beta[:, j])), j] < 0:
            beta[:, j] = -beta[:, j]
    return LongRunMatrix(Pi=Pi, alpha=Pi @ beta, beta=beta)


def implied_stable_factor(Phi: MatrixPolynomial, r: int) -> FactorizationPair:
    """
    Left factor of an arbitrary Phi at a forced rank r.

    U projects onto the r weakest right singular directions of Pi, so the
    result is defined for any estimate (stable, explosive or exactly
    integrated). It coincides with :func:`left_factorize` when Phi has exactly
    r regular unit roots.
    """
    diff = null_projector(Phi.long_run(), rank=r)
    return FactorizationPair(left_stable_factor(Phi, diff.U), diff, "left")
