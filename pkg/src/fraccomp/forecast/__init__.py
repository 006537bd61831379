"""Benchmarks, losses, rolling evaluation and model confidence sets."""

from .evaluation import (
    BENCHMARKS,
    DofcForecaster,
    LinearForecaster,
    LossTable,
    WishartForecaster,
    benchmark,
    risk_table,
    rolling_eval,
)
from .linear import DiagonalLinear, UnivariateFit, css_residuals, fit_univariate
from .losses import (
    LOSS_NAMES,
    loss_frobenius,
    loss_l3,
    loss_log_score,
    loss_min_variance,
    loss_record,
    loss_stein,
    min_variance_weights,
)
from .mcs import McsResult, block_bootstrap_indices, model_confidence_set
from .wishart import CawDcc, CawDiag, wishart_logpdf

__all__ = [
    "LOSS_NAMES",
    "loss_frobenius",
    "loss_stein",
    "loss_l3",
    "loss_min_variance",
    "loss_log_score",
    "loss_record",
    "min_variance_weights",
    "UnivariateFit",
    "DiagonalLinear",
    "fit_univariate",
    "css_residuals",
    "CawDiag",
    "CawDcc",
    "wishart_logpdf",
    "McsResult",
    "model_confidence_set",
    "block_bootstrap_indices",
    "LinearForecaster",
    "WishartForecaster",
    "DofcForecaster",
    "benchmark",
    "BENCHMARKS",
    "LossTable",
    "rolling_eval",
    "risk_table",
]
