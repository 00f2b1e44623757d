import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varfactor.errors import BenchmarkAborted, ExplosiveGenerator
from varfactor.estimation import VarModel
from varfactor.matpoly import MatrixPolynomial, classify_spectrum, spectral_radius
from varfactor.simharness import (ESTIMATORS, efficiency, get_case, mse_T, run_benchmark,
                                  simulate_var, squared_errors)


# mse_T -----------------------------------------------------------------------------

def test_mse_zero_when_exact():
    truth = np.arange(8.0).reshape(2, 2, 2)
    assert mse_T([truth, truth.copy()], truth, 200) == 0.0


def test_mse_single_unit_entry():
    truth = np.zeros((1, 2, 2))
    est = truth.copy()
    est[0, 1, 0] = 1.0
    assert mse_T([est], truth, 100) == pytest.approx(100.0)


def test_mse_two_replications():
    truth = np.zeros((1, 2, 2))
    a = truth.copy()
    a[0, 0, 0] = 1.0
    b = truth.copy()
    b[0, 0, 0] = 1.0
    b[0, 1, 1] = np.sqrt(2.0)
    assert mse_T([a, b], truth, 50) == pytest.approx(100.0)


def test_mse_needs_estimates():
    with pytest.raises(ValueError):
        mse_T([], np.zeros((1, 2, 2)), 10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_mse_invariant_to_relabeling(seed):
    rng = np.random.default_rng(seed)
    truth = rng.standard_normal((2, 3, 3))
    ests = [truth + 0.1 * rng.standard_normal(truth.shape) for _ in range(25)]
    perm = rng.permutation(len(ests))
    a = mse_T(ests, truth, 200)
    b = mse_T([ests[i] for i in perm], truth, 200)
    assert abs(a - b) < 1e-12 * max(1.0, a)


# simulation ------------------------------------------------------------------------

def test_zero_noise_gives_zero_path():
    model = VarModel(MatrixPolynomial([0.5 * np.eye(2)]), np.zeros(2), np.zeros((2, 2)))
    assert np.all(simulate_var(model, 50, seed=3).values == 0.0)


def test_zero_noise_with_factor_gives_zero_path():
    case = get_case(1)
    model = case.model()
    model.Sigma = np.zeros((2, 2))
    assert np.all(simulate_var(model, 50, seed=3).values == 0.0)


def test_ar1_stationary_variance():
    phi = 0.6
    model = VarModel(MatrixPolynomial([[[phi]]]), np.zeros(1), np.eye(1))
    x = simulate_var(model, 100_000, seed=5).values[:, 0]
    assert np.var(x) == pytest.approx(1.0 / (1.0 - phi ** 2), rel=0.03)


def test_case1_differenced_mean_is_zero():
    case = get_case(1)
    X = simulate_var(case.model(), 4000, seed=7).values
    U = case.pair.diff.U
    V = X[1:] - X[:-1] @ U.T
    # long-run standard error of the mean from the stationary generator
    ups = case.Upsilon
    lr = np.linalg.inv(ups.evaluate(1.0))
    se = np.sqrt(np.diag(lr @ lr.T) / V.shape[0])
    assert np.all(np.abs(V.mean(axis=0)) < 5 * se)


def test_simulation_deterministic():
    model = get_case(2).model()
    a = simulate_var(model, 100, seed=11).values
    b = simulate_var(model, 100, seed=11).values
    c = simulate_var(model, 100, seed=12).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_zero_length():
    assert simulate_var(get_case(1).model(), 0, seed=0).values.shape == (0, 2)


def test_explosive_generator_rejected():
    model = VarModel(MatrixPolynomial([[[1.05]]]), np.zeros(1), np.eye(1))
    with pytest.raises(ExplosiveGenerator):
        simulate_var(model, 10, seed=0)


# generators ------------------------------------------------------------------------

def test_case1_spectrum():
    case = get_case(1)
    mags = np.sort(classify_spectrum(case.Upsilon).magnitudes)[::-1]
    np.testing.assert_allclose(mags, [0.8728, 0.5728, 0.1, 0.0], atol=5e-4)
    spec = classify_spectrum(case.Phi)
    assert spec.unit_count == 1 and spec.unstable_count == 0


def test_case2_has_two_unit_roots():
    spec = classify_spectrum(get_case(2).Phi)
    assert spec.unit_count == 2 and spec.unstable_count == 0


def test_case3_spectrum():
    spec = classify_spectrum(get_case(3).Phi)
    assert spec.unit_count == 2 and spec.unstable_count == 0
    stable = np.sort([abs(z) for z, lab in zip(spec.roots, spec.labels) if lab == "stable"])
    np.testing.assert_allclose(stable[::-1], [0.9416, 0.9416, 0.3525, 0.2011], atol=5e-4)


def test_generators_valid():
    for n in (1, 2, 3):
        case = get_case(n)
        assert spectral_radius(case.Upsilon) < 1.0
        assert np.linalg.norm(case.Upsilon.coeffs[-1] @ case.pair.diff.U) < 1e-12


def test_unknown_case():
    with pytest.raises(ValueError):
        get_case(4)


# benchmark -------------------------------------------------------------------------

def test_efficiency_orientation():
    assert efficiency(1.0, 2.0) == 2.0
    assert efficiency(0.0, 0.0) == 1.0


def test_oracle_self_efficiency():
    table = run_benchmark(get_case(1, T=50, M=4, seed=2), ("oracle",))
    assert table.eff("oracle", "oracle", "Phi")[0] == 1.0
    assert table.eff("oracle", "oracle", "Upsilon")[0] == 1.0
    assert table.n_dropped == 0


def test_benchmark_deterministic_across_workers():
    case = get_case(1, T=60, M=4, seed=9)
    a = run_benchmark(case, ("ols", "yw"), workers=1)
    b = run_benchmark(case, ("ols", "yw"), workers=2)
    for key in a.errors:
        assert np.array_equal(a.errors[key], b.errors[key])


def test_benchmark_small_mle_run():
    table = run_benchmark(get_case(1, T=100, M=3, seed=4))
    assert set(table.columns()) == {"Eff(Ups_mle|Ups_yw)", "Eff(Phi_mle|Phi_ols)",
                                    "Eff(Phi_mle|Phi_yw)"}
    assert "dropped=" in table.format()
    assert table.as_dict()["used"] + table.as_dict()["dropped"] == 3


def test_benchmark_aborts_on_failures(monkeypatch):
    from varfactor.errors import NoConvergence

    def failing(data, case, rng):
        raise NoConvergence("forced")

    monkeypatch.setitem(ESTIMATORS, "oracle", failing)
    with pytest.raises(BenchmarkAborted):
        run_benchmark(get_case(1, T=30, M=3), ("oracle",))


def test_squared_errors_shape():
    truth = np.zeros((2, 2, 2))
    assert squared_errors([truth + 1.0], truth).tolist() == [8.0]
