"""
Fitting VAR models with and without a prescribed number of unit roots.

The constrained estimator works on the stable factor ``Upsilon(z)`` of
``Phi(z) = Upsilon(z)(I - U z)``: ``Upsilon`` is decoded from unconstrained
coordinates (so it is always Schur-stable with a rank-deficient last
coefficient) and ``U`` is the orthogonal projector onto the null space of
``Upsilon_k``. The Gaussian likelihood is evaluated on the differenced
series ``V_t = X_t - U X_{t-1}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from ._linalg import is_positive_definite, symmetrize
from .errors import (DecodeFailure, DegenerateResiduals, IndefiniteAutocovariance,
                     NoImprovement, ShortSeries, SingularRegressors, VarFactorError)
from .factorization import (FactorizationPair, LongRunMatrix,
                            compose_left, cointegration_decompose, left_stable_factor,
                            null_projector)
from .matpoly import (MatrixPolynomial, SpectrumReport, classify_spectrum, numerical_rank,
                      spectral_radius)
from .parameterization import (BlockToeplitz, UnconstrainedVector, eta_encode,
                               polynomial_from_eta, truncated_param, yule_walker_rows)

log = logging.getLogger(__name__)

DEFAULT_JITTER = float(np.sqrt(0.01))
DEFAULT_MARGIN = 0.05
PENALTY = 1e10


@dataclass(frozen=True, eq=False)
class TimeSeriesData:
    """Observations ``X_1, ..., X_T`` stored row-wise in a T x m array."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValueError("values must be a T x m array")
        if not np.all(np.isfinite(v)):
            raise ValueError("values contain missing or non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


@dataclass(eq=False)
class VarModel:
    """
    ``Phi(B) X_t = mu + Z_t`` with ``Z_t ~ N(0, Sigma)``.

    ``factor`` and ``long_run`` are filled by the constrained estimator.
    """

    poly: MatrixPolynomial
    mu: np.ndarray
    Sigma: np.ndarray
    factor: FactorizationPair | None = None
    long_run: LongRunMatrix | None = None

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float).reshape(self.poly.dim)
        self.Sigma = symmetrize(np.asarray(self.Sigma, dtype=float))

    @property
    def dim(self) -> int:
        return self.poly.dim

    @property
    def order(self) -> int:
        return self.poly.degree

    @property
    def spectrum(self) -> SpectrumReport:
        return classify_spectrum(self.poly)

    @property
    def trend_slope_constant(self) -> np.ndarray | None:
        """``c = Upsilon(1)^{-1} mu`` when a stable factor is attached."""
        if self.factor is None:
            return None
        return np.linalg.solve(self.factor.stable.at_one(), self.mu)


@dataclass(frozen=True)
class OptimizerOptions:
    maxiter: int = 2000
    ftol: float = 1e-10
    fd_step: float = 1e-6
    jitter_sd: float = DEFAULT_JITTER
    restart: bool = True
    eta_bound: float = 50.0
    margin: float = DEFAULT_MARGIN
    fit_mean: bool = True


@dataclass(eq=False)
class FitReport:
    model: VarModel
    eta_hat: UnconstrainedVector
    neg_log_lik: float
    iterations: int
    converged: bool
    initializer_trace: list[str] = field(default_factory=list)
    objective_trace: list[float] = field(default_factory=list, repr=False)
    initial_value: float = float("nan")
    message: str = ""


# --------------------------------------------------------------------------
# unconstrained baselines
# --------------------------------------------------------------------------

def _lagged(X: np.ndarray, k: int) -> np.ndarray:
    """Rows ``[X_{t-1}', ..., X_{t-k}']`` for t = k+1..T."""
    T = X.shape[0]
    return np.hstack([X[k - j:T - j] for j in range(1, k + 1)])


def ols_fit(data: TimeSeriesData, k: int, intercept: bool = True) -> VarModel:
    """
    Least squares regression of ``X_t`` on ``(1, X_{t-1}, ..., X_{t-k})``.

    Sigma uses the denominator ``T - k - (mk + 1)`` (``mk`` without intercept).
    """
    X, m = data.values, data.m
    n_par = m * k + (1 if intercept else 0)
    dof = data.T - k - n_par
    if dof <= 0:
        raise ShortSeries(f"T = {data.T} is too short for {k} lags in dimension {m}")
    Y = X[k:]
    Z = _lagged(X, k)
    if intercept:
        Z = np.hstack([np.ones((Z.shape[0], 1)), Z])
    if numerical_rank(Z) < Z.shape[1]:
        raise SingularRegressors("regressor matrix is rank deficient")
    B, *_ = np.linalg.lstsq(Z, Y, rcond=None)
    E = Y - Z @ B
    mu = B[0] if intercept else np.zeros(m)
    A = B[1:] if intercept else B
    coeffs = [A[j * m:(j + 1) * m].T for j in range(k)]
    return VarModel(MatrixPolynomial(coeffs), mu, E.T @ E / dof)


def sample_autocovariances(X: np.ndarray, nlags: int, demean: bool = True) -> list[np.ndarray]:
    """Biased estimates ``T^{-1} sum_t x_t x_{t-h}'``, h = 0..nlags."""
    X = X - X.mean(axis=0) if demean else X
    T = X.shape[0]
    return [X[h:].T @ X[:T - h] / T for h in range(nlags + 1)]


def yule_walker_fit(data: TimeSeriesData, k: int, demean: bool = True) -> VarModel:
    """Yule-Walker estimate from biased sample autocovariances; always Schur-stable."""
    if data.T <= k:
        raise ShortSeries("series shorter than the lag order")
    gam = sample_autocovariances(data.values, k, demean)
    T = BlockToeplitz(gam)
    if not T.is_positive_definite():
        raise IndefiniteAutocovariance("sample autocovariance matrix is not positive definite")
    A = yule_walker_rows(T)
    Sigma = gam[0] - sum(Aj @ gam[j + 1].T for j, Aj in enumerate(A))
    poly = MatrixPolynomial(A)
    mu = poly.at_one() @ data.values.mean(axis=0) if demean else np.zeros(data.m)
    return VarModel(poly, mu, Sigma)


def shrink_stabilize(poly: MatrixPolynomial, margin: float = DEFAULT_MARGIN) -> MatrixPolynomial:
    """
    Scale ``A_j -> c^j A_j`` with the largest ``c`` in (0, 1] giving spectral
    radius at most ``1 - margin``.

    Every companion eigenvalue is multiplied by exactly ``c`` under this map,
    so ``c = (1 - margin) / rho`` solves the problem in closed form.
    """
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must lie in (0, 1)")
    rho = spectral_radius(poly)
    if rho <= 1.0 - margin:
        return poly
    c = (1.0 - margin) / rho
    return MatrixPolynomial([c ** j * A for j, A in enumerate(poly.coeffs, start=1)])


# --------------------------------------------------------------------------
# constrained likelihood
# --------------------------------------------------------------------------

@dataclass(eq=False)
class InitialEstimate:
    eta: UnconstrainedVector
    mu: np.ndarray
    trace: list[str]


def initialize(data: TimeSeriesData, k: int, r: int, jitter_sd: float = DEFAULT_JITTER,
               seed=None, margin: float = DEFAULT_MARGIN,
               fit_mean: bool = True) -> InitialEstimate:
    """Starting point for the constrained MLE; see :func:`initialize_eta`."""
    m = data.m
    if not 0 <= r < m:
        raise ValueError(f"rank r = {r} must satisfy 0 <= r < m = {m}")
    trace = []

    def step(label, fn):
        try:
            out = fn()
        except VarFactorError as exc:
            raise type(exc)(f"[{label}] {exc}") from exc
        trace.append(label)
        return out

    ols = step("ols", lambda: ols_fit(data, k, intercept=fit_mean))
    if r > 0:
        U = step("null_projector", lambda: null_projector(ols.poly.long_run(), rank=r)).U
        ups = step("left_recursion", lambda: left_stable_factor(ols.poly, U))
    else:
        ups = ols.poly
    ups = step("shrink", lambda: shrink_stabilize(ups, margin))
    param = step("rank_projection" if r > 0 else "reencode",
                 lambda: truncated_param(ups, m - r))
    eta = step("encode", lambda: eta_encode(param, center=True))
    if jitter_sd > 0:
        rng = np.random.default_rng(seed)
        eta = eta.with_values(eta.values + rng.normal(0.0, jitter_sd, eta.values.size))
        trace.append("jitter")
    return InitialEstimate(eta, np.array(ols.mu), trace)


def initialize_eta(data: TimeSeriesData, k: int, r: int, jitter_sd: float = DEFAULT_JITTER,
                   seed=None, margin: float = DEFAULT_MARGIN,
                   fit_mean: bool = True) -> UnconstrainedVector:
    """
    Four-step initializer: OLS fit, forced rank-r differencing of the OLS
    long-run matrix with the left recursion for Upsilon, shrinkage into the
    stable region, rank-(m-r) truncation of the last Schur difference and
    encoding; then i.i.d. Gaussian jitter of scale ``jitter_sd``.
    """
    return initialize(data, k, r, jitter_sd, seed, margin, fit_mean).eta


def _factor_from_eta(eta: UnconstrainedVector, r: int) -> FactorizationPair:
    ups = polynomial_from_eta(eta)
    diff = null_projector(ups.coeffs[-1], rank=r)
    return FactorizationPair(ups, diff, "left")


def _residuals(pair: FactorizationPair, mu: np.ndarray, X: np.ndarray) -> np.ndarray:
    V = pair.diff.apply(X)
    k = pair.stable.degree
    return V[k:] - mu - _lagged(V, k) @ pair.stable.stack().transpose(0, 2, 1).reshape(-1, V.shape[1])


def neg_log_likelihood(eta: UnconstrainedVector, mu, data: TimeSeriesData, k: int,
                       r: int) -> float:
    """
    ``n log det(E'E / n)``: minus twice the profile log-likelihood, up to
    constants, of the VAR(k) for the differenced series, conditional on its
    first k values (n = T - 1 - k).
    """
    if eta.k != k or eta.m != data.m or eta.s != data.m - r:
        raise ValueError("coordinate shape does not match (k, m, r)")
    pair = _factor_from_eta(eta, r)
    E = _residuals(pair, np.asarray(mu, dtype=float), data.values)
    n = E.shape[0]
    if n <= data.m:
        raise DegenerateResiduals(f"only {n} residuals for dimension {data.m}")
    S = E.T @ E / n
    sign, logdet = np.linalg.slogdet(S)
    if sign <= 0 or not np.isfinite(logdet) or np.linalg.cond(S) > 1e14:
        raise DegenerateResiduals("residual covariance is singular")
    return float(n * logdet)


def _fd_gradient(f, theta: np.ndarray, f0: float, step: float) -> np.ndarray:
    g = np.empty_like(theta)
    for i in range(theta.size):
        h = step * max(1.0, abs(theta[i]))
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        fp, fm = f(tp), f(tm)
        if fp >= PENALTY or fm >= PENALTY:
            # one-sided difference next to an infeasible point
            g[i] = (fp - f0) / h if fp < PENALTY else (f0 - fm) / h if fm < PENALTY else 0.0
        else:
            g[i] = (fp - fm) / (2 * h)
    return g


def _run_lbfgs(f, theta0, opts: OptimizerOptions, n_eta: int):
    trace = []

    def fun(theta):
        f0 = f(theta)
        return f0, _fd_gradient(f, theta, f0, opts.fd_step)

    bounds = [(-opts.eta_bound, opts.eta_bound)] * n_eta + [(None, None)] * (theta0.size - n_eta)
    res = optimize.minimize(
        fun, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
        callback=lambda xk: trace.append(f(xk)),
        options={"maxiter": opts.maxiter, "ftol": opts.ftol, "gtol": 1e-8,
                 "maxcor": 20})
    return res, trace


def _converged(res) -> bool:
    if res.success:
        return True
    # line search failures at the finite-difference noise floor
    msg = str(res.message).upper()
    return "ABNORMAL" in msg and res.nit > 0 and np.max(np.abs(res.jac)) < 1e-2


def mle_fit(data: TimeSeriesData, k: int, r: int, opts: OptimizerOptions | None = None,
            seed=None) -> FitReport:
    """
    Constrained Gaussian MLE with exactly r unit roots.

    Minimizes :func:`neg_log_likelihood` over (eta, mu) by L-BFGS-B with
    central finite-difference gradients, starting from :func:`initialize`.
    One restart from the jittered optimum is made and the better of the two
    optima kept. ``mu`` is held at zero when ``opts.fit_mean`` is false.
    """
    opts = opts or OptimizerOptions()
    m = data.m
    if not 0 <= r < m:
        raise ValueError(f"rank r = {r} must satisfy 0 <= r < m = {m}")
    rng = np.random.default_rng(seed)
    init = initialize(data, k, r, opts.jitter_sd, rng, opts.margin, opts.fit_mean)
    template = init.eta
    n_eta = template.values.size

    def split(theta):
        eta = template.with_values(theta[:n_eta])
        mu = theta[n_eta:] if opts.fit_mean else np.zeros(m)
        return eta, mu

    def f(theta):
        eta, mu = split(theta)
        try:
            val = neg_log_likelihood(eta, mu, data, k, r)
        except (VarFactorError, np.linalg.LinAlgError, ValueError):
            return PENALTY
        return val if np.isfinite(val) else PENALTY

    theta0 = np.concatenate([template.values, init.mu if opts.fit_mean else np.zeros(0)])
    f_init = f(theta0)
    res, trace = _run_lbfgs(f, theta0, opts, n_eta)
    best, best_trace, iters = res, [f_init] + trace, res.nit
    if opts.restart and opts.jitter_sd > 0:
        theta1 = res.x.copy()
        theta1[:n_eta] += rng.normal(0.0, opts.jitter_sd, n_eta)
        res2, trace2 = _run_lbfgs(f, theta1, opts, n_eta)
        iters += res2.nit
        if res2.fun < best.fun:
            best, best_trace = res2, [f(theta1)] + trace2
    if best.fun >= PENALTY or best.fun > f_init:
        raise NoImprovement("optimizer did not improve on the initializer")

    eta_hat, mu_hat = split(best.x)
    pair = _factor_from_eta(eta_hat, r)
    Phi = compose_left(pair)
    E = _residuals(pair, mu_hat, data.values)
    Sigma = E.T @ E / E.shape[0]
    long_run = cointegration_decompose(Phi, r) if r > 0 else None
    model = VarModel(Phi, mu_hat, Sigma, factor=pair, long_run=long_run)
    return FitReport(model=model, eta_hat=eta_hat, neg_log_lik=float(best.fun),
                     iterations=int(iters), converged=_converged(best),
                     initializer_trace=init.trace, objective_trace=best_trace,
                     initial_value=float(f_init), message=str(best.message))


# --------------------------------------------------------------------------
# forecasting and diagnostics
# --------------------------------------------------------------------------

def forecast(model: VarModel, data: TimeSeriesData, h: int) -> np.ndarray:
    """Iterated point forecasts ``X_{T+1}, ..., X_{T+h}``."""
    if h < 1:
        raise ValueError("horizon must be at least 1")
    k = model.order
    if data.T < k:
        raise ShortSeries("need at least k observations to forecast")
    hist = list(data.values[-k:])
    out = np.empty((h, model.dim))
    for j in range(h):
        x = model.mu.copy()
        for i, A in enumerate(model.poly.coeffs, start=1):
            x = x + A @ hist[-i]
        out[j] = x
        hist.append(x)
    return out


def residuals(model: VarModel, data: TimeSeriesData) -> np.ndarray:
    """``Z_t = X_t - mu - sum_j Phi_j X_{t-j}`` for t = k+1..T."""
    k = model.order
    A = model.poly.stack().transpose(0, 2, 1).reshape(-1, model.dim)
    return data.values[k:] - model.mu - _lagged(data.values, k) @ A


@dataclass(frozen=True, eq=False)
class DiagnosticsReport:
    cross_correlations: list[np.ndarray]
    statistics: np.ndarray
    dof: np.ndarray
    pvalues: np.ndarray


def portmanteau(resid: np.ndarray, max_lag: int, fitted_lags: int = 0) -> DiagnosticsReport:
    """
    Multivariate Ljung-Box statistics for lags 1..max_lag.

    ``Q(h) = n^2 sum_l (n - l)^{-1} tr(C_l' C_0^{-1} C_l C_0^{-1})`` against a
    chi-square with ``max(m^2 h - m^2 fitted_lags, 1)`` degrees of freedom.
    """
    E = np.asarray(resid, dtype=float)
    if E.ndim == 1:
        E = E[:, None]
    n, m = E.shape
    if max_lag < 1 or 4 * max_lag >= n:
        raise ShortSeries(f"max_lag must satisfy 1 <= max_lag < n/4 (n = {n})")
    E = E - E.mean(axis=0)
    C0 = E.T @ E / n
    if not is_positive_definite(C0) or np.linalg.cond(C0) > 1e12:
        raise ShortSeries("residual covariance is degenerate")
    C0inv = np.linalg.inv(C0)
    d = np.sqrt(np.diag(C0))
    corr, terms = [], []
    for lag in range(1, max_lag + 1):
        Cl = E[lag:].T @ E[:n - lag] / n
        corr.append(Cl / np.outer(d, d))
        terms.append(np.trace(Cl.T @ C0inv @ Cl @ C0inv) / (n - lag))
    Q = n * n * np.cumsum(terms)
    lags = np.arange(1, max_lag + 1)
    dof = np.maximum(m * m * lags - m * m * fitted_lags, 1)
    return DiagnosticsReport(corr, Q, dof, stats.chi2.sf(Q, dof))


def residual_diagnostics(model: VarModel, data: TimeSeriesData, max_lag: int) -> DiagnosticsReport:
    return portmanteau(residuals(model, data), max_lag, model.order)


def trend_path(model: VarModel, T: int) -> np.ndarray:
    """Deterministic part ``eta_t = (I + (t-1)U) Upsilon(1)^{-1} mu``, t = 1..T."""
    if model.factor is None:
        raise ValueError("model carries no stable/difference factorization")
    c = model.trend_slope_constant
    U = model.factor.diff.U
    t = np.arange(T)[:, None]
    return c[None, :] + t * (U @ c)[None, :]


__all__ = [
    "TimeSeriesData", "VarModel", "OptimizerOptions", "FitReport", "InitialEstimate",
    "DiagnosticsReport", "ols_fit", "yule_walker_fit", "sample_autocovariances",
    "shrink_stabilize", "initialize", "initialize_eta", "neg_log_likelihood", "mle_fit",
    "forecast", "residuals", "portmanteau", "residual_diagnostics", "trend_path",
]
