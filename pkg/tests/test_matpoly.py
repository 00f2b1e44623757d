import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varfactor.errors import AmbiguousRoot, DimensionMismatch
from varfactor.factorization import null_projector
from varfactor.matpoly import (MatrixPolynomial, classify_spectrum, companion_matrix,
                               numerical_rank, poly_multiply, spectral_radius)

from _gen import CASE1_UPS, random_stable


def test_companion_scalar():
    assert np.array_equal(companion_matrix(MatrixPolynomial([[[0.5]]])), [[0.5]])


def test_companion_scalar_two_lags():
    C = companion_matrix(MatrixPolynomial([[[0.2]], [[0.35]]]))
    assert np.array_equal(C, [[0.2, 0.35], [1.0, 0.0]])


def test_companion_block_layout():
    C = companion_matrix(CASE1_UPS)
    assert np.array_equal(C[:2, :2], CASE1_UPS.coeffs[0])
    assert np.array_equal(C[:2, 2:], CASE1_UPS.coeffs[1])
    assert np.array_equal(C[2:, :2], np.eye(2))
    assert np.array_equal(C[2:, 2:], np.zeros((2, 2)))


def test_case1_spectrum():
    rep = classify_spectrum(CASE1_UPS)
    np.testing.assert_allclose(rep.magnitudes, [0.8728, 0.5728, 0.1, 0.0], atol=5e-4)
    assert (rep.zero_count, rep.unit_count) == (1, 0)
    assert rep.zero_regular


def test_identity_coefficient_has_regular_unit_roots():
    rep = classify_spectrum(MatrixPolynomial([np.eye(2)]))
    assert rep.unit_count == 2 and rep.unit_regular


def test_jordan_unit_root_is_irregular():
    rep = classify_spectrum(MatrixPolynomial([[[1, 0, 0], [1, 1, 0], [0, 0, 0.5]]]))
    assert rep.unit_count == 2 and not rep.unit_regular


def test_counts_add_up():
    rep = classify_spectrum(CASE1_UPS)
    total = rep.unit_count + rep.zero_count + rep.stable_count + rep.unstable_count
    assert total == 4


def test_overlapping_bands():
    with pytest.raises(AmbiguousRoot):
        classify_spectrum(CASE1_UPS, unit_tol=1.5, zero_tol=1.0)


def test_nonpositive_tolerance():
    with pytest.raises(ValueError):
        classify_spectrum(CASE1_UPS, unit_tol=0.0)


def test_bad_coefficient_shape():
    with pytest.raises(DimensionMismatch):
        MatrixPolynomial([np.eye(2), np.eye(3)])


def test_multiply_orthogonal_factors():
    Y = np.array([[0.3, 0.0], [0.1, 0.0]])
    U = np.diag([0.0, 1.0])
    assert np.allclose(Y @ U, 0)
    prod = poly_multiply(MatrixPolynomial([Y]), MatrixPolynomial([U]))
    assert prod.degree == 1
    np.testing.assert_allclose(prod.coeffs[0], Y + U)


def test_multiply_scalar():
    prod = poly_multiply(MatrixPolynomial([[[0.5]]]), MatrixPolynomial([[[1.0]]]))
    np.testing.assert_allclose(prod.stack().ravel(), [1.5, -0.5])


def test_multiply_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        poly_multiply(MatrixPolynomial([np.eye(2)]), MatrixPolynomial([np.eye(3)]))


def test_case1_times_difference():
    diff = null_projector(CASE1_UPS.coeffs[1])
    prod = poly_multiply(CASE1_UPS, diff)
    assert prod.degree == 2
    rep = classify_spectrum(prod)
    assert rep.unit_count == 1
    np.testing.assert_allclose(np.sort(np.abs(rep.stable_roots))[::-1], [0.8728, 0.5728, 0.1],
                               atol=5e-4)
    rng = np.random.default_rng(3)
    for z in rng.standard_normal(20) + 1j * rng.standard_normal(20):
        lhs = prod.evaluate(z)
        rhs = CASE1_UPS.evaluate(z) @ (np.eye(2) - z * diff.U)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_numerical_rank_examples():
    assert numerical_rank(np.zeros((2, 2))) == 0
    assert numerical_rank(0.25 * np.ones((2, 2))) == 1
    assert numerical_rank(np.eye(3)) == 3


matrices = st.integers(0, 2 ** 32 - 1).map(np.random.default_rng)


@settings(max_examples=40, deadline=None)
@given(rng=matrices, m=st.integers(1, 3), ka=st.integers(1, 3), kb=st.integers(1, 3))
def test_multiply_matches_evaluation(rng, m, ka, kb):
    a = MatrixPolynomial(rng.standard_normal((ka, m, m)))
    b = MatrixPolynomial(rng.standard_normal((kb, m, m)))
    c = MatrixPolynomial(rng.standard_normal((1, m, m)))
    ab = poly_multiply(a, b)
    z = complex(*rng.standard_normal(2))
    np.testing.assert_allclose(ab.evaluate(z), a.evaluate(z) @ b.evaluate(z), atol=1e-10)
    left = poly_multiply(ab, c)
    right = poly_multiply(a, poly_multiply(b, c))
    np.testing.assert_allclose(left.stack(), right.stack(), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(rng=matrices, m=st.integers(1, 4), k=st.integers(1, 3), data=st.data())
def test_stable_instances(rng, m, k, data):
    s = data.draw(st.integers(0, m))
    p = random_stable(rng, m, k, s)
    assert spectral_radius(p) < 1 - 1e-10
    rep = classify_spectrum(p)
    assert (rep.zero_count > 0) == (numerical_rank(p.coeffs[-1]) < m)


@settings(max_examples=30, deadline=None)
@given(rng=matrices, m=st.integers(1, 3), k=st.integers(1, 3))
def test_similarity_preserves_counts(rng, m, k):
    p = random_stable(rng, m, k, max(m - 1, 0))
    P = np.eye(m) + 0.3 * rng.standard_normal((m, m))
    a, b = classify_spectrum(p), classify_spectrum(p.similar(P))
    assert (a.unit_count, a.zero_count, a.stable_count, a.unstable_count) == \
        (b.unit_count, b.zero_count, b.stable_count, b.unstable_count)
