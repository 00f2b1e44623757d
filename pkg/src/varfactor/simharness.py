"""
Seeded simulation of cointegrated VAR processes and Monte Carlo comparison
of estimators.

Every replication draws from its own Philox substream spawned from the
base seed, so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from ._linalg import sym_sqrt
from .errors import BenchmarkAborted, ExplosiveGenerator, VarFactorError
from .estimation import (OptimizerOptions, TimeSeriesData, VarModel, mle_fit, ols_fit,
                         yule_walker_fit)
from .factorization import (FactorizationPair, compose_left, implied_stable_factor,
                            left_stable_factor, null_projector)
from .matpoly import UNIT_TOL, MatrixPolynomial, spectral_radius

log = logging.getLogger(__name__)

DEFAULT_BURN_IN = 500
MAX_FAILURE_RATE = 0.05


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int or a SeedSequence."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------

@dataclass(eq=False)
class BenchmarkCase:
    """Generator ``Upsilon(B)(I - U B) X_t = Z_t``, ``Z_t ~ N(0, tau^2 I)``, and MC design."""

    label: str
    pair: FactorizationPair
    tau: float = 1.0
    T: int = 200
    M: int = 200
    seed: int = 0
    burn_in: int = DEFAULT_BURN_IN

    @property
    def m(self) -> int:
        return self.pair.stable.dim

    @property
    def k(self) -> int:
        return self.pair.stable.degree

    @property
    def r(self) -> int:
        return self.pair.diff.rank

    @property
    def Phi(self) -> MatrixPolynomial:
        return compose_left(self.pair)

    @property
    def Upsilon(self) -> MatrixPolynomial:
        return self.pair.stable

    def model(self) -> VarModel:
        return VarModel(self.Phi, np.zeros(self.m), self.tau ** 2 * np.eye(self.m),
                        factor=self.pair)


CASE1 = ([[0.2, 0.1], [0.1, 0.2]],
         [[0.25, 0.25], [0.25, 0.25]])
CASE2 = ([[0.2, 0.1, 0.0], [0.2, 0.2, -0.1], [0.0, 0.05, 0.1]],
         [[0.1] * 3] * 3)
# printed coefficients of a VAR(2) with two (nearly) unit roots
CASE3_PHI = ([[0.8648, 0.2313, -0.4839], [-0.8214, 0.4676, 0.5486], [-0.9843, -0.3214, 1.0197]],
             [[-0.7093, -0.0929, 0.0610], [1.4071, 0.4365, -0.2552], [-0.2234, 0.5193, -0.6245]])


def _pair_from_stable(ups: MatrixPolynomial) -> FactorizationPair:
    return FactorizationPair(ups, null_projector(ups.coeffs[-1]), "left")


def _case3_pair() -> FactorizationPair:
    # The four-decimal coefficients only approximate exact unit roots. Project
    # onto the nearest member of the class: rank-2 null projector of the
    # long-run matrix, left recursion, then annihilate the leftover tail.
    Phi = MatrixPolynomial(CASE3_PHI)
    U = null_projector(Phi.long_run(), rank=2)
    ups = left_stable_factor(Phi, U.U)
    last = ups.coeffs[-1] @ (np.eye(3) - U.U)
    return FactorizationPair(MatrixPolynomial(list(ups.coeffs[:-1]) + [last]), U, "left")


def get_case(number: int, T: int = 200, M: int = 200, seed: int = 0, tau: float = 1.0,
             burn_in: int = DEFAULT_BURN_IN) -> BenchmarkCase:
    """Benchmark generators 1-3 (two- and three-dimensional VAR(2))."""
    if number == 1:
        pair = _pair_from_stable(MatrixPolynomial(CASE1))
    elif number == 2:
        pair = _pair_from_stable(MatrixPolynomial(CASE2))
    elif number == 3:
        pair = _case3_pair()
    else:
        raise ValueError(f"unknown case {number}")
    return BenchmarkCase(f"Case {number}", pair, tau, T, M, seed, burn_in)


# --------------------------------------------------------------------------
# simulation
# --------------------------------------------------------------------------

def _recursion(coeffs, mu, Z):
    k, m = len(coeffs), Z.shape[1]
    X = np.zeros((Z.shape[0] + k, m))
    A = np.hstack(coeffs)  # m x km
    for t in range(Z.shape[0]):
        lags = X[t:t + k][::-1].ravel()
        X[t + k] = mu + A @ lags + Z[t]
    return X[k:]


def simulate_var(model: VarModel, T: int, burn_in: int = DEFAULT_BURN_IN,
                 seed=None) -> TimeSeriesData:
    """
    Simulate ``Phi(B) X_t = mu + Z_t`` with Gaussian innovations.

    With a factorization attached, the stationary differenced series
    ``V_t = Upsilon(B)^{-1}(mu + Z_t)`` is run from zero through ``burn_in``
    discarded steps and then integrated as ``X_t = U X_{t-1} + V_t`` from
    ``X_0 = 0``. Without one, the full recursion is run from zero and the
    first ``burn_in`` values discarded.
    """
    if T < 0:
        raise ValueError("T must be non-negative")
    m = model.dim
    if spectral_radius(model.poly) > 1.0 + UNIT_TOL:
        raise ExplosiveGenerator("generator has roots outside the unit circle")
    rng = make_rng(seed)
    Z = rng.standard_normal((burn_in + T, m)) @ sym_sqrt(model.Sigma)
    if model.factor is not None:
        V = _recursion(model.factor.stable.coeffs, model.mu, Z)[burn_in:]
        U = model.factor.diff.U
        X = np.zeros((T, m))
        prev = np.zeros(m)
        for t in range(T):
            prev = U @ prev + V[t]
            X[t] = prev
    else:
        X = _recursion(model.poly.coeffs, model.mu, Z)[burn_in:]
    return TimeSeriesData(X.reshape(T, m))


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------

def _as_stack(x) -> np.ndarray:
    return x.stack() if isinstance(x, MatrixPolynomial) else np.asarray(x, dtype=float)


def squared_errors(estimates: Iterable, truth) -> np.ndarray:
    t = _as_stack(truth)
    return np.array([float(np.sum((_as_stack(e) - t) ** 2)) for e in estimates])


def mse_T(estimates: Iterable, truth, T: int) -> float:
    """``T / M * sum_i ||est_i - truth||_F^2`` over the coefficient stacks."""
    sq = squared_errors(estimates, truth)
    if sq.size == 0:
        raise ValueError("need at least one estimate")
    return float(T * sq.mean())


def _oracle(data, case, rng):
    return case.Phi, case.Upsilon, True


def _ols(data, case, rng):
    Phi = ols_fit(data, case.k, intercept=False).poly
    return Phi, implied_stable_factor(Phi, case.r).stable, True


def _yw(data, case, rng):
    Phi = yule_walker_fit(data, case.k, demean=False).poly
    return Phi, implied_stable_factor(Phi, case.r).stable, True


def _mle(data, case, rng):
    fit = mle_fit(data, case.k, case.r, OptimizerOptions(fit_mean=False), seed=rng)
    return fit.model.poly, fit.model.factor.stable, fit.converged


ESTIMATORS: dict[str, Callable] = {"oracle": _oracle, "ols": _ols, "yw": _yw, "mle": _mle}
LEVELS = ("Phi", "Upsilon")
TABLE_COLUMNS = (
    ("Eff(Ups_mle|Ups_yw)", "mle", "yw", "Upsilon"),
    ("Eff(Phi_mle|Phi_ols)", "mle", "ols", "Phi"),
    ("Eff(Phi_mle|Phi_yw)", "mle", "yw", "Phi"),
)


def _replicate(args):
    """Squared errors of every estimator on one replication, or None on failure."""
    case, names, seed_seq = args
    sim_ss, fit_ss = seed_seq.spawn(2)
    data = simulate_var(case.model(), case.T, case.burn_in, sim_ss)
    truth = {"Phi": case.Phi.stack(), "Upsilon": case.Upsilon.stack()}
    out = {}
    for name in names:
        try:
            Phi, ups, ok = ESTIMATORS[name](data, case, make_rng(fit_ss))
        except (VarFactorError, np.linalg.LinAlgError) as exc:
            log.info("replication failed in %s: %s", name, exc)
            return None
        if not ok:
            return None
        out[(name, "Phi")] = float(np.sum((_pad(Phi.stack(), truth["Phi"]) - truth["Phi"]) ** 2))
        out[(name, "Upsilon")] = float(np.sum((ups.stack() - truth["Upsilon"]) ** 2))
    return out


def _pad(stack: np.ndarray, like: np.ndarray) -> np.ndarray:
    if stack.shape[0] >= like.shape[0]:
        return stack[:like.shape[0]]
    pad = np.zeros((like.shape[0] - stack.shape[0],) + stack.shape[1:])
    return np.concatenate([stack, pad])


def efficiency(mse_a: float, mse_b: float) -> float:
    """``Eff(A|B) = MSE(B) / MSE(A)``; values above one favour A."""
    if mse_a == 0.0 and mse_b == 0.0:
        return 1.0
    if mse_a == 0.0:
        return float("inf")
    return mse_b / mse_a


def _ratio_se(a: np.ndarray, b: np.ndarray) -> float:
    """Delta-method standard error of mean(b) / mean(a)."""
    M = a.size
    ma, mb = a.mean(), b.mean()
    if M < 2 or ma == 0.0:
        return 0.0 if ma == 0.0 and mb == 0.0 else float("nan")
    cov = np.cov(np.vstack([a, b]))
    var = (cov[1, 1] / ma ** 2 - 2 * mb * cov[0, 1] / ma ** 3 + mb ** 2 * cov[0, 0] / ma ** 4) / M
    return float(np.sqrt(max(var, 0.0)))


@dataclass(eq=False)
class EfficiencyTable:
    """MSE_T per (estimator, level), their MC standard errors and efficiency ratios."""

    label: str
    T: int
    M: int
    seed: int
    estimators: tuple[str, ...]
    mse: dict[tuple[str, str], float]
    mse_se: dict[tuple[str, str], float]
    errors: dict[tuple[str, str], np.ndarray] = field(repr=False)
    n_used: int = 0
    n_dropped: int = 0

    def eff(self, a: str, b: str, level: str = "Phi") -> tuple[float, float]:
        """``(Eff(a|b), standard error)`` at the given coefficient level."""
        ea, eb = self.errors[(a, level)], self.errors[(b, level)]
        return efficiency(self.mse[(a, level)], self.mse[(b, level)]), _ratio_se(ea, eb)

    def columns(self) -> dict[str, tuple[float, float]]:
        """The three headline ratios, when mle, ols and yw were all run."""
        out = {}
        for name, a, b, level in TABLE_COLUMNS:
            if a in self.estimators and b in self.estimators:
                out[name] = self.eff(a, b, level)
        return out

    def as_dict(self) -> dict:
        return {
            "label": self.label, "T": self.T, "M": self.M, "seed": self.seed,
            "used": self.n_used, "dropped": self.n_dropped,
            "mse_T": {f"{e}/{lv}": [self.mse[(e, lv)], self.mse_se[(e, lv)]]
                      for e in self.estimators for lv in LEVELS},
            "efficiency": {k: list(v) for k, v in self.columns().items()},
        }

    def format(self) -> str:
        lines = [f"{self.label}: T={self.T} M={self.M} seed={self.seed} "
                 f"used={self.n_used} dropped={self.n_dropped}"]
        for e in self.estimators:
            for lv in LEVELS:
                lines.append(f"  MSE_T[{e:>6}, {lv:<7}] = {self.mse[(e, lv)]:10.4f}"
                             f" (se {self.mse_se[(e, lv)]:.4f})")
        for name, (v, se) in self.columns().items():
            lines.append(f"  {name:<22} = {v:7.3f} (se {se:.3f})")
        return "\n".join(lines)


def run_benchmark(case: BenchmarkCase, estimators: Iterable[str] = ("mle", "ols", "yw"),
                  workers: int = 1) -> EfficiencyTable:
    """
    Monte Carlo study of ``case``: simulate M series, fit every estimator,
    accumulate squared coefficient errors at the Phi and Upsilon levels.

    A replication in which any estimator fails (or the MLE does not converge)
    is dropped for all estimators.

    Raises
    ------
    BenchmarkAborted
        If more than 5% of the replications are dropped.
    """
    names = tuple(estimators)
    unknown = set(names) - set(ESTIMATORS)
    if unknown:
        raise ValueError(f"unknown estimators: {sorted(unknown)}")
    seeds = np.random.SeedSequence(case.seed).spawn(case.M)
    tasks = [(case, names, ss) for ss in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, tasks))
    else:
        results = [_replicate(t) for t in tasks]
    kept = [res for res in results if res is not None]
    dropped = len(results) - len(kept)
    if dropped:
        log.warning("%s: dropped %d of %d replications", case.label, dropped, case.M)
    if dropped > MAX_FAILURE_RATE * case.M or not kept:
        raise BenchmarkAborted(f"{dropped} of {case.M} replications failed")
    errors, mse, se = {}, {}, {}
    for name in names:
        for lv in LEVELS:
            e = case.T * np.array([res[(name, lv)] for res in kept])
            errors[(name, lv)] = e
            mse[(name, lv)] = float(e.mean())
            se[(name, lv)] = float(e.std(ddof=1) / np.sqrt(e.size)) if e.size > 1 else 0.0
    return EfficiencyTable(case.label, case.T, case.M, case.seed, names, mse, se, errors,
                           len(kept), dropped)
