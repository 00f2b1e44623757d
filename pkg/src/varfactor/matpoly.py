"""
Matrix polynomials of the form A(z) = I - A_1 z - ... - A_k z^k.

The monic reversal z^k A(1/z) is never stored; its roots are the eigenvalues
of the block companion matrix, which is how every spectral question in this
package is answered.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AmbiguousRoot, DimensionMismatch

UNIT_TOL = 1e-6
ZERO_TOL = 1e-8
RANK_TOL = 1e-8
TRIM_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MatrixPolynomial:
    """
    Lag polynomial ``I_m - sum_j A_j z^j`` stored as its coefficient list.

    Parameters
    ----------
    coeffs : sequence of (m, m) arrays
        ``A_1, ..., A_k``. At least one coefficient is required.
    """

    coeffs: tuple[np.ndarray, ...]

    def __init__(self, coeffs: Sequence[np.ndarray]):
        blocks = tuple(_frozen(c) for c in coeffs)
        if not blocks:
            raise ValueError("a matrix polynomial needs at least one coefficient")
        m = blocks[0].shape[0]
        for j, c in enumerate(blocks, start=1):
            if c.shape != (m, m):
                raise DimensionMismatch(
                    f"coefficient {j} has shape {c.shape}, expected {(m, m)}")
        object.__setattr__(self, "coeffs", blocks)

    @classmethod
    def from_stack(cls, stack) -> "MatrixPolynomial":
        """Build from a (k, m, m) array."""
        stack = np.asarray(stack, dtype=float)
        if stack.ndim == 2:
            stack = stack[None]
        return cls(list(stack))

    @classmethod
    def zero(cls, m: int, k: int = 1) -> "MatrixPolynomial":
        return cls([np.zeros((m, m))] * k)

    @property
    def dim(self) -> int:
        return self.coeffs[0].shape[0]

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    def stack(self) -> np.ndarray:
        return np.stack(self.coeffs)

    def coefficient_sum(self) -> np.ndarray:
        return np.sum(self.coeffs, axis=0)

    def at_one(self) -> np.ndarray:
        """A(1) = I - sum_j A_j."""
        return np.eye(self.dim) - self.coefficient_sum()

    def long_run(self) -> np.ndarray:
        """Pi = sum_j A_j - I, i.e. -A(1)."""
        return self.coefficient_sum() - np.eye(self.dim)

    def evaluate(self, z) -> np.ndarray:
        out = np.eye(self.dim, dtype=complex if np.iscomplexobj(z) else float)
        zp = 1.0
        for c in self.coeffs:
            zp = zp * z
            out = out - c * zp
        return out

    def transpose(self) -> "MatrixPolynomial":
        return MatrixPolynomial([c.T for c in self.coeffs])

    def similar(self, P: np.ndarray) -> "MatrixPolynomial":
        """Coefficients P A_j P^{-1}."""
        Pinv = np.linalg.inv(P)
        return MatrixPolynomial([P @ c @ Pinv for c in self.coeffs])

    def allclose(self, other: "MatrixPolynomial", atol: float = 1e-8) -> bool:
        return distance(self, other) <= atol

    def __repr__(self) -> str:
        return f"MatrixPolynomial(m={self.dim}, k={self.degree})"


def distance(a: MatrixPolynomial, b: MatrixPolynomial) -> float:
    """Frobenius norm of the coefficient difference, padding the shorter one."""
    if a.dim != b.dim:
        raise DimensionMismatch("polynomials have different dimensions")
    k = max(a.degree, b.degree)
    zero = np.zeros((a.dim, a.dim))
    sq = 0.0
    for j in range(k):
        ca = a.coeffs[j] if j < a.degree else zero
        cb = b.coeffs[j] if j < b.degree else zero
        sq += float(np.sum((ca - cb) ** 2))
    return float(np.sqrt(sq))


def companion_matrix(p: MatrixPolynomial) -> np.ndarray:
    """
    Block companion matrix with top block row ``[A_1 ... A_k]`` and identity
    blocks on the first block subdiagonal.
    """
    m, k = p.dim, p.degree
    C = np.zeros((m * k, m * k))
    C[:m, :] = np.hstack(p.coeffs)
    if k > 1:
        C[m:, :-m] = np.eye(m * (k - 1))
    return C


def numerical_rank(M, rank_tol: float = RANK_TOL, scale: float | None = None) -> int:
    """
    Number of singular values above ``rank_tol`` times the largest one, or
    times ``scale`` when given (for differences such as ``C - I`` whose own
    norm may be pure rounding).
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    ref = s[0] if scale is None else scale
    if ref == 0.0:
        return 0
    return int(np.sum(s > rank_tol * ref))


def spectral_radius(p: MatrixPolynomial) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(p)))))


def is_schur_stable(p: MatrixPolynomial, slack: float = 0.0) -> bool:
    return spectral_radius(p) < 1.0 - slack


@dataclass(frozen=True)
class SpectrumReport:
    """Roots of det(z^k A(1/z)) = 0 sorted into unit, zero, stable and unstable."""

    roots: np.ndarray
    unit_count: int
    zero_count: int
    stable_count: int
    unstable_count: int
    unit_regular: bool
    zero_regular: bool
    labels: tuple[str, ...] = field(repr=False)
    unit_tol: float = UNIT_TOL
    zero_tol: float = ZERO_TOL
    rank_tol: float = RANK_TOL

    @property
    def magnitudes(self) -> np.ndarray:
        """Root moduli sorted in decreasing order."""
        return np.sort(np.abs(self.roots))[::-1]

    def roots_of(self, label: str) -> np.ndarray:
        return np.array([z for z, c in zip(self.roots, self.labels) if c == label])

    @property
    def stable_roots(self) -> np.ndarray:
        return self.roots_of("stable")

    @property
    def nonzero_roots(self) -> np.ndarray:
        return np.array([z for z, c in zip(self.roots, self.labels) if c != "zero"])

    def in_class(self, r: int, s: int | None = None) -> bool:
        """Membership of the extended Schur-stable class with r unit and s zero roots."""
        ok = (self.unit_count == r and self.unstable_count == 0
              and self.unit_regular and self.zero_regular)
        if s is not None:
            ok = ok and self.zero_count == s
        return ok


def classify_spectrum(p: MatrixPolynomial, unit_tol: float = UNIT_TOL,
                      zero_tol: float = ZERO_TOL,
                      rank_tol: float = RANK_TOL) -> SpectrumReport:
    """
    Classify every companion eigenvalue.

    A root is ``unit`` when ``|z - 1| <= unit_tol``, ``zero`` when
    ``|z| <= zero_tol``, ``stable`` when ``|z| < 1 - unit_tol`` and
    ``unstable`` otherwise. Regularity compares the number of roots in a class
    with the numerical rank deficiency of ``C - I`` (unit) or ``C`` (zero).

    Raises
    ------
    AmbiguousRoot
        If the unit and zero bands overlap at some eigenvalue.
    """
    if min(unit_tol, zero_tol, rank_tol) <= 0:
        raise ValueError("tolerances must be positive")
    C = companion_matrix(p)
    n = C.shape[0]
    roots = np.linalg.eigvals(C)
    labels = []
    for z in roots:
        is_unit = abs(z - 1.0) <= unit_tol
        is_zero = abs(z) <= zero_tol
        if is_unit and is_zero:
            raise AmbiguousRoot(f"root {z} lies in both the unit and zero bands")
        if is_unit:
            labels.append("unit")
        elif is_zero:
            labels.append("zero")
        elif abs(z) < 1.0 - unit_tol:
            labels.append("stable")
        else:
            labels.append("unstable")
    counts = {c: labels.count(c) for c in ("unit", "zero", "stable", "unstable")}

    unit_regular = True
    if counts["unit"]:
        geometric = n - numerical_rank(C - np.eye(n), rank_tol, max(1.0, np.linalg.norm(C, 2)))
        unit_regular = geometric == counts["unit"]
    zero_regular = True
    if counts["zero"]:
        geometric = n - numerical_rank(C, rank_tol)
        zero_regular = geometric == counts["zero"]

    return SpectrumReport(
        roots=roots,
        unit_count=counts["unit"],
        zero_count=counts["zero"],
        stable_count=counts["stable"],
        unstable_count=counts["unstable"],
        unit_regular=unit_regular,
        zero_regular=zero_regular,
        labels=tuple(labels),
        unit_tol=unit_tol,
        zero_tol=zero_tol,
        rank_tol=rank_tol,
    )


def _as_poly(x) -> MatrixPolynomial:
    if isinstance(x, MatrixPolynomial):
        return x
    if hasattr(x, "as_polynomial"):
        return x.as_polynomial()
    raise TypeError(f"cannot interpret {type(x).__name__} as a matrix polynomial")


def poly_multiply(a, b, trim_tol: float = TRIM_TOL) -> MatrixPolynomial:
    """
    Product ``a(z) b(z)`` of two lag polynomials.

    Either factor may be a :class:`MatrixPolynomial` or anything exposing
    ``as_polynomial()`` (such as a difference operator). Trailing coefficient
    blocks with Frobenius norm below ``trim_tol`` are dropped, keeping at
    least one block.
    """
    a, b = _as_poly(a), _as_poly(b)
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions {a.dim} and {b.dim} differ")
    m = a.dim
    # full coefficient lists including the identity constant term
    pa = [np.eye(m)] + [-c for c in a.coeffs]
    pb = [np.eye(m)] + [-c for c in b.coeffs]
    prod = [np.zeros((m, m)) for _ in range(len(pa) + len(pb) - 1)]
    for i, x in enumerate(pa):
        for j, y in enumerate(pb):
            prod[i + j] = prod[i + j] + x @ y
    coeffs = [-c for c in prod[1:]]
    while len(coeffs) > 1 and np.linalg.norm(coeffs[-1]) < trim_tol:
        coeffs.pop()
    return MatrixPolynomial(coeffs)
