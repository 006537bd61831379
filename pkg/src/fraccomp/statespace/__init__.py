"""State space form, Kalman filtering and maximum likelihood for DOFC models."""

from .approx import ArmaApprox, ArmaTable, arma_approx, arma_table
from .diagnostics import arch_lm, jarque_bera, ljung_box, residual_diagnostics, smoothed_components
from .estimation import (
    FitOptions,
    FitResult,
    LikelihoodModel,
    bic,
    bic_search,
    em_iterate,
    fit_ml,
    loglik_gradient,
    m_step,
    std_errors,
)
from .kalman import (
    FilterOutput,
    SmootherOutput,
    kalman_filter,
    kalman_smoother,
    loglikelihood,
    predict,
)
from .system import StateSpaceSystem, build_system

__all__ = [
    "ArmaApprox",
    "ArmaTable",
    "arma_approx",
    "arma_table",
    "StateSpaceSystem",
    "build_system",
    "FilterOutput",
    "SmootherOutput",
    "kalman_filter",
    "kalman_smoother",
    "loglikelihood",
    "predict",
    "FitOptions",
    "FitResult",
    "LikelihoodModel",
    "em_iterate",
    "m_step",
    "fit_ml",
    "loglik_gradient",
    "std_errors",
    "bic",
    "bic_search",
    "ljung_box",
    "arch_lm",
    "jarque_bera",
    "residual_diagnostics",
    "smoothed_components",
]
