"""Fractional components models for fractionally cointegrated time series."""

from . import fracdiff, forecast, model, realized, semiparam, statespace
from .exceptions import (
    ApproximationFailureError,
    DataError,
    DegenerateModelError,
    FracCompError,
    InvalidArgumentError,
    NumericalFailureError,
    UnsupportedRepresentationError,
)
from .fracdiff import frac_diff, frac_integrate, frac_lag, pi_coeffs, simulate_fi
from .model import DofcParams, DofcSpec, simulate_dofc
from .realized import CovPanel, from_logz, load_panel, to_logz

__version__ = "0.1.0"

__all__ = [
    "fracdiff",
    "model",
    "statespace",
    "semiparam",
    "realized",
    "forecast",
    "FracCompError",
    "InvalidArgumentError",
    "DegenerateModelError",
    "UnsupportedRepresentationError",
    "NumericalFailureError",
    "ApproximationFailureError",
    "DataError",
    "pi_coeffs",
    "frac_diff",
    "frac_integrate",
    "frac_lag",
    "simulate_fi",
    "DofcSpec",
    "DofcParams",
    "simulate_dofc",
    "CovPanel",
    "to_logz",
    "from_logz",
    "load_panel",
]
