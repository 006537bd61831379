"""
Low-order ARMA approximations of type-II fractional integration.

The impulse responses of ``(1 - L)_+^{-d}`` are ``pi_i(-d)``.  For a sample of
length ``n`` we fit ARMA(p, q) coefficients minimizing

    sum_{i=0}^{n-1} (psi_i - pi_i(-d))^2 / (i + 1),

with ``psi_i`` the impulse responses of the ARMA filter.  The objective is
multimodal in ``d``; a table is therefore built by forward continuation on a
grid of ``d`` values (each fit warm-started at its left neighbour) and
interpolated by cubic splines, which keeps the coefficients smooth in ``d``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares

from .. import _arma
from ..exceptions import ApproximationFailureError, InvalidArgumentError
from ..fracdiff import pi_coeffs

__all__ = ["ArmaApprox", "ArmaTable", "arma_approx", "arma_table", "D_GRID_MAX"]

#: Upper end of the tabulated memory range.
D_GRID_MAX = 1.5
_D_GRID_MIN = 0.0025
_D_GRID_STEP = 0.005


@dataclass(frozen=True)
class ArmaApprox:
    """ARMA coefficients approximating ``(1 - L)_+^{-d}`` over ``n`` periods.

    ``ar`` follows ``1 - ar_1 L - ...`` and ``ma`` follows ``1 + ma_1 L + ...``.
    ``discrepancy`` is the square root of the weighted objective.
    """

    d: float
    n: int
    ar: np.ndarray
    ma: np.ndarray
    discrepancy: float

    @property
    def stable(self):
        return _arma.ar_is_stable(self.ar)

    @property
    def invertible(self):
        return _arma.ar_is_stable(-np.asarray(self.ma))

    def impulse_response(self, length=None):
        return _arma.impulse_response(self.ar, self.ma, self.n if length is None else length)


def _residuals(u, target, sqrt_w, p):
    return sqrt_w * (_arma.impulse_response(u[:p], u[p:], target.size) - target)


def _fit(d, n, order, start):
    p, q = order
    target = pi_coeffs(-d, n)
    sqrt_w = 1.0 / np.sqrt(np.arange(1, n + 1))
    res = least_squares(
        _residuals,
        start,
        args=(target, sqrt_w, p),
        method="lm",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=4000,
    )
    if not np.all(np.isfinite(res.x)):
        raise ApproximationFailureError(f"ARMA approximation diverged at d={d}, n={n}")
    return res.x, float(np.sqrt(2.0 * res.cost))


class ArmaTable:
    """Spline-interpolated ARMA approximations for one sample length and order."""

    def __init__(self, n, order=(3, 3)):
        self.n = int(n)
        self.order = tuple(order)
        self.grid = np.arange(_D_GRID_MIN, D_GRID_MAX + 1e-12, _D_GRID_STEP)
        coefs = np.empty((self.grid.size, sum(self.order)))
        errors = np.empty(self.grid.size)
        u = np.zeros(sum(self.order))
        for i, d in enumerate(self.grid):
            u, errors[i] = _fit(d, self.n, self.order, u)
            coefs[i] = u
        self.coefs = coefs
        self.errors = errors
        self._spline = CubicSpline(self.grid, coefs, axis=0)

    def coefficients(self, d):
        """Interpolated ``(ar, ma)`` at ``d``; clipped to the tabulated range."""
        d = float(np.clip(d, self.grid[0], self.grid[-1]))
        u = self._spline(d)
        p = self.order[0]
        return u[:p], u[p:]

    def derivative(self, d):
        """Derivative of the interpolated coefficients with respect to ``d``."""
        if d < self.grid[0] or d > self.grid[-1]:
            return np.zeros(sum(self.order))
        return self._spline(float(d), 1)


@lru_cache(maxsize=16)
def arma_table(n, order=(3, 3)):
    """Cached :class:`ArmaTable` for sample length ``n``."""
    return ArmaTable(n, order)


def arma_approx(d, n, order=(3, 3)):
    """
    Fit an ARMA approximation of type-II fractional integration.

    Parameters
    ----------
    d : float
        Memory parameter, ``0 < d <= 1.5``.
    n : int
        Number of impulse responses matched (the sample length), ``n >= 50``.
    order : tuple of int
        ARMA orders ``(p, q)``.

    Returns
    -------
    ArmaApprox
        Weighted least-squares optimum, started from the continuation table.
    """
    d = float(d)
    if not 0.0 < d <= D_GRID_MAX:
        raise InvalidArgumentError(f"d must lie in (0, {D_GRID_MAX}], got {d}")
    n = int(n)
    if n < 50:
        raise InvalidArgumentError("ARMA approximation needs n >= 50")
    table = arma_table(n, tuple(order))
    ar, ma = table.coefficients(d)
    u, err = _fit(d, n, table.order, np.r_[ar, ma])
    p = table.order[0]
    return ArmaApprox(d=d, n=n, ar=u[:p], ma=u[p:], discrepancy=err)
