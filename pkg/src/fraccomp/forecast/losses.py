"""
Loss functions for covariance matrix forecasts.

All functions take the forecast ``x_pred`` first and the realization
``x_real`` second.  ``LD`` scores a return vector under a zero-mean Gaussian
predictive density with covariance ``x_pred``.
"""

import numpy as np

from ..exceptions import InvalidArgumentError, NumericalFailureError

__all__ = [
    "LOSS_NAMES",
    "loss_frobenius",
    "loss_stein",
    "loss_l3",
    "min_variance_weights",
    "loss_min_variance",
    "loss_log_score",
    "loss_record",
]

LOSS_NAMES = ("LF", "LS", "L3", "LMV", "LD")


def _pair(x_pred, x_real):
    a = np.asarray(x_pred, dtype=float)
    b = np.asarray(x_real, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise InvalidArgumentError("forecast and realization must be conformable square matrices")
    return a, b


def _chol(a):
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise NumericalFailureError("forecast matrix is not positive definite") from None


def loss_frobenius(x_pred, x_real):
    """Squared Frobenius distance ``sum_ij (X_ij - Xhat_ij)^2``."""
    a, b = _pair(x_pred, x_real)
    return float(np.sum((b - a) ** 2))


def loss_stein(x_pred, x_real):
    """Stein loss ``tr(Xhat^-1 X) - log|Xhat^-1 X| - k``."""
    a, b = _pair(x_pred, x_real)
    low = _chol(a)
    # Xhat^-1 X is similar to L^-1 X L^-T, which is symmetric
    m = np.linalg.solve(low, np.linalg.solve(low, b).T)
    sign, logdet = np.linalg.slogdet(0.5 * (m + m.T))
    if sign <= 0:
        raise NumericalFailureError("realized matrix is not positive definite")
    return float(np.trace(m) - logdet - a.shape[0])


def loss_l3(x_pred, x_real):
    """
    Asymmetric third-order loss ``tr(X^3 - Xhat^3)/6 - tr(Xhat^2 (X - Xhat))/2``.

    This is the Bregman divergence generated by ``tr(X^3)/6``: it is zero at
    ``Xhat = X`` and non-negative for positive definite arguments, and it
    penalizes under-prediction more than over-prediction.
    """
    a, b = _pair(x_pred, x_real)
    a2 = a @ a
    return float(np.trace(b @ b @ b - a2 @ a) / 6.0 - np.trace(a2 @ (b - a)) / 2.0)


def min_variance_weights(x_pred):
    """Ex-ante minimum variance weights ``Xhat^-1 iota / (iota' Xhat^-1 iota)``."""
    a = np.asarray(x_pred, dtype=float)
    low = _chol(a)
    u = np.linalg.solve(low.T, np.linalg.solve(low, np.ones(a.shape[0])))
    return u / u.sum()


def loss_min_variance(x_pred, x_real):
    """Realized variance ``w' X w`` of the minimum variance portfolio built from ``Xhat``."""
    a, b = _pair(x_pred, x_real)
    w = min_variance_weights(a)
    return float(w @ b @ w)


def loss_log_score(x_pred, returns):
    """Negative log density of ``returns`` under ``N(0, Xhat)``."""
    a = np.asarray(x_pred, dtype=float)
    r = np.asarray(returns, dtype=float).ravel()
    if r.size != a.shape[0]:
        raise InvalidArgumentError("return vector does not match the forecast dimension")
    low = _chol(a)
    z = np.linalg.solve(low, r)
    logdet = 2.0 * np.sum(np.log(np.diag(low)))
    return float(0.5 * (r.size * np.log(2.0 * np.pi) + logdet + z @ z))


def loss_record(x_pred, x_real, returns=None):
    """
    All five losses for one forecast.

    Returns
    -------
    dict
        Keys ``LF, LS, L3, LMV, LD``; ``LD`` is NaN when ``returns`` is None.
    """
    return {
        "LF": loss_frobenius(x_pred, x_real),
        "LS": loss_stein(x_pred, x_real),
        "L3": loss_l3(x_pred, x_real),
        "LMV": loss_min_variance(x_pred, x_real),
        "LD": np.nan if returns is None else loss_log_score(x_pred, returns),
    }
