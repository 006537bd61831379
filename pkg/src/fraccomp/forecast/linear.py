"""
Diagonal vector ARMA and ARFIMA benchmarks.

Each equation ``(1 - phi(L)) (1 - L)_+^d (y_it - c_i) = (1 + theta(L)) v_it`` is
estimated separately by conditional Gaussian quasi maximum likelihood (zero
pre-sample values, error variance concentrated out).  A full covariance of
``v_t`` is then estimated from the residuals; it enters the predictive
covariance of the ``h``-step forecasts.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .. import _arma
from ..exceptions import InvalidArgumentError
from ..fracdiff import frac_diff, frac_integrate, pi_coeffs

__all__ = ["UnivariateFit", "DiagonalLinear", "fit_univariate", "css_residuals"]

_D_BOUNDS = (-0.45, 1.45)


@dataclass
class UnivariateFit:
    """One equation of a diagonal linear model.

    Attributes
    ----------
    c : float
    ar : ndarray
        ``phi_1, ..., phi_p`` in ``1 - phi_1 L - ...``.
    ma : ndarray
        ``theta_1, ..., theta_q`` in ``1 + theta_1 L + ...``.
    d : float
        Memory parameter (0 for ARMA equations).
    sigma2 : float
    loglik : float
        Concentrated conditional Gaussian log-likelihood.
    converged : bool
    """

    c: float
    ar: np.ndarray
    ma: np.ndarray
    d: float
    sigma2: float
    loglik: float
    converged: bool = True


def css_residuals(y, c, ar, ma, d=0.0):
    """Residuals ``v_t`` of one equation given parameters (zero pre-sample values)."""
    x = np.asarray(y, dtype=float) - c
    if d != 0.0:
        x = frac_diff(x, d)
    u = lfilter(np.r_[1.0, -np.asarray(ar, dtype=float)], [1.0], x)
    return lfilter([1.0], np.r_[1.0, np.asarray(ma, dtype=float)], u)


def _unpack(theta, p, q, fractional):
    c = theta[0]
    ar = _arma.pacf_to_ar(_arma.to_unit_interval(theta[1 : 1 + p]))
    ma = -_arma.pacf_to_ar(_arma.to_unit_interval(theta[1 + p : 1 + p + q]))
    d = theta[1 + p + q] if fractional else 0.0
    return c, ar, ma, d


def fit_univariate(y, ar_order=2, ma_order=1, fractional=False, start=None, max_iter=500):
    """
    Conditional Gaussian QML of one ARMA(p, q) or ARFIMA(p, d, q) equation.

    Parameters
    ----------
    y : array_like, shape (n,)
    ar_order, ma_order : int
    fractional : bool
        Estimate a memory parameter ``d`` in ``[-0.45, 1.45]``.
    start : UnivariateFit, optional
        Warm start.

    Returns
    -------
    UnivariateFit
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    p, q = int(ar_order), int(ma_order)
    if n < 3 * (p + q + 2):
        raise InvalidArgumentError("series too short for the requested orders")
    # ARMA residuals are conditional on the first p observations
    burn = 0 if fractional else p

    def unpacked(theta):
        return _unpack(theta, p, q, fractional)

    def negll(theta):
        c, ar, ma, d = unpacked(theta)
        e = css_residuals(y, c, ar, ma, d)[burn:]
        s2 = np.mean(e * e)
        if not np.isfinite(s2) or s2 <= 0:
            return 1e10
        return 0.5 * np.log(s2)

    if start is not None:
        theta0 = np.r_[
            start.c,
            _arma.from_unit_interval(np.clip(_arma.ar_to_pacf(start.ar), -0.99, 0.99)),
            _arma.from_unit_interval(np.clip(_arma.ar_to_pacf(-np.asarray(start.ma)), -0.99, 0.99)),
            [start.d] if fractional else [],
        ]
        theta0 = np.nan_to_num(theta0)
    else:
        theta0 = np.r_[y.mean(), np.full(p, 0.3) if p else [], np.zeros(q), [0.3] if fractional else []]
        if p:
            theta0[1] = 1.0
    bounds = [(None, None)] * (1 + p + q) + ([_D_BOUNDS] if fractional else [])
    res = minimize(negll, theta0, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": max_iter})
    c, ar, ma, d = unpacked(res.x)
    e = css_residuals(y, c, ar, ma, d)[burn:]
    s2 = float(np.mean(e * e))
    ll = -0.5 * e.size * (np.log(2.0 * np.pi * s2) + 1.0)
    return UnivariateFit(c=float(c), ar=ar, ma=ma, d=float(d), sigma2=s2, loglik=float(ll),
                         converged=bool(res.success))


def _psi_weights(fit, h):
    psi = _arma.impulse_response(fit.ar, fit.ma, h)
    if fit.d != 0.0:
        psi = np.convolve(psi, pi_coeffs(-fit.d, h))[:h]
    return psi


def _point_path(y, fit, horizon):
    x = np.asarray(y, dtype=float) - fit.c
    n = x.size
    w = frac_diff(x, fit.d) if fit.d != 0.0 else x.copy()
    e = css_residuals(y, fit.c, fit.ar, fit.ma, fit.d)
    p, q = fit.ar.size, fit.ma.size
    w_ext = np.r_[w, np.zeros(horizon)]
    e_ext = np.r_[e, np.zeros(horizon)]
    for t in range(n, n + horizon):
        val = e_ext[t]
        for j in range(1, q + 1):
            val += fit.ma[j - 1] * e_ext[t - j]
        for j in range(1, p + 1):
            val += fit.ar[j - 1] * w_ext[t - j]
        w_ext[t] = val
    x_ext = frac_integrate(w_ext, fit.d) if fit.d != 0.0 else w_ext
    return fit.c + x_ext[n:]


@dataclass
class DiagonalLinear:
    """
    Diagonal vector ARMA(p, q) or ARFIMA(p, d, q) model.

    Parameters
    ----------
    ar_order, ma_order : int
    fractional : bool

    Attributes
    ----------
    equations : list of UnivariateFit
        Filled by :meth:`fit`.
    resid_cov : ndarray
        Full covariance of the equation errors.
    """

    ar_order: int = 2
    ma_order: int = 1
    fractional: bool = False
    equations: list = field(default_factory=list)
    resid_cov: np.ndarray = None

    def fit(self, y, warm=True):
        """Estimate every equation on ``y`` (shape ``(n, p)``); returns ``self``."""
        y = np.asarray(getattr(y, "values", y), dtype=float)
        if y.ndim != 2 or np.any(~np.isfinite(y)):
            raise InvalidArgumentError("need a complete (n, p) panel")
        starts = self.equations if warm and len(self.equations) == y.shape[1] else [None] * y.shape[1]
        self.equations = [
            fit_univariate(y[:, i], self.ar_order, self.ma_order, self.fractional, start=s)
            for i, s in zip(range(y.shape[1]), starts)
        ]
        self.resid_cov = np.cov(self.residuals(y), rowvar=False, bias=True).reshape(y.shape[1], -1)
        return self

    @property
    def converged(self):
        return all(eq.converged for eq in self.equations)

    def residuals(self, y):
        y = np.asarray(getattr(y, "values", y), dtype=float)
        burn = 0 if self.fractional else self.ar_order
        res = np.column_stack([
            css_residuals(y[:, i], eq.c, eq.ar, eq.ma, eq.d) for i, eq in enumerate(self.equations)
        ])
        return res[burn:]

    def forecast(self, y, horizon):
        """
        Predictive moments of ``y_{n+1}, ..., y_{n+horizon}`` given the sample ``y``.

        Returns
        -------
        means : ndarray, shape (horizon, p)
        covs : ndarray, shape (horizon, p, p)
        """
        if not self.equations:
            raise InvalidArgumentError("model has not been fitted")
        horizon = int(horizon)
        if horizon < 1:
            raise InvalidArgumentError("forecast horizon must be >= 1")
        y = np.asarray(getattr(y, "values", y), dtype=float)
        means = np.column_stack([_point_path(y[:, i], eq, horizon)
                                 for i, eq in enumerate(self.equations)])
        psi = np.array([_psi_weights(eq, horizon) for eq in self.equations])
        # Var of the h-step error: sum_{j<h} psi_j psi_j' * Sigma (elementwise)
        outer = np.cumsum(np.einsum("ij,kj->jik", psi, psi), axis=0)
        covs = outer * self.resid_cov
        return means, covs
