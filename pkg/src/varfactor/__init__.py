"""Stable/difference factorizations and constrained estimation of cointegrated VAR models."""

from .errors import *  # noqa: F401,F403
from .matpoly import (MatrixPolynomial, SpectrumReport, classify_spectrum, companion_matrix,
                      poly_multiply, spectral_radius)
from .factorization import (DifferenceOperator, FactorizationPair, LongRunMatrix,
                            cointegration_decompose, compose_left, compose_right,
                            left_factorize, left_to_right, null_projector, right_factorize,
                            right_to_left, var1_commuting_pair)
from .parameterization import (BlockToeplitz, SchurChain, StableReducedRankParam,
                               UnconstrainedVector, coeffs_from_toeplitz, eta_decode,
                               eta_encode, param_from_coeffs, project_rank, schur_chain,
                               toeplitz_from_param, var1_from_vq, var1_to_vq)
from .estimation import (FitReport, OptimizerOptions, TimeSeriesData, VarModel, forecast,
                         initialize_eta, mle_fit, neg_log_likelihood, ols_fit,
                         residual_diagnostics, shrink_stabilize, yule_walker_fit)
from .simharness import (BenchmarkCase, EfficiencyTable, get_case, mse_T, run_benchmark,
                         simulate_var)

__version__ = "0.1.0"
