"""
Exact local Whittle estimation of the memory parameter with unknown mean.

The series is demeaned by ``mu(d) = w(d) * mean(x) + (1 - w(d)) * x_1`` with
the smooth weight

    w(d) = 1                          for d <= 1/2,
    w(d) = (1 + cos(4 pi d)) / 2      for 1/2 < d < 3/4,
    w(d) = 0                          for d >= 3/4,

then fractionally differenced, and the objective

    R(d) = log( mean_j I_u(lambda_j) ) - 2 d mean_j log(lambda_j)

is minimized over the first ``m`` Fourier frequencies.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ..exceptions import InvalidArgumentError
from ..fracdiff import frac_diff

__all__ = ["MemoryEstimate", "mean_weight", "elw_objective", "elw_estimate", "default_bandwidth"]

D_BOUNDS = (-0.5, 1.5)


@dataclass(frozen=True)
class MemoryEstimate:
    """ELW estimate with its bandwidth and the ``1 / (4 m)`` variance proxy."""

    d_hat: float
    m: int
    variance: float
    boundary: bool = False

    @property
    def se(self):
        return float(np.sqrt(self.variance))


def default_bandwidth(n):
    """``floor(n ** 0.5)``."""
    return int(np.floor(np.sqrt(n)))


def mean_weight(d):
    if d <= 0.5:
        return 1.0
    if d >= 0.75:
        return 0.0
    return 0.5 * (1.0 + np.cos(4.0 * np.pi * d))


def _periodogram(u, m):
    n = u.size
    dft = np.fft.rfft(u)[1 : m + 1]
    return (dft.real**2 + dft.imag**2) / (2.0 * np.pi * n)


def elw_objective(d, x, m):
    """Concentrated exact local Whittle objective at ``d``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    w = mean_weight(d)
    mu = w * x.mean() + (1.0 - w) * x[0]
    u = frac_diff(x - mu, d)
    lam = 2.0 * np.pi * np.arange(1, m + 1) / n
    per = _periodogram(u, m)
    return float(np.log(np.mean(per)) - 2.0 * d * np.mean(np.log(lam)))


def elw_estimate(x, m=None, bounds=D_BOUNDS, grid_step=0.05):
    """
    Exact local Whittle estimate with unknown mean.

    Parameters
    ----------
    x : array_like
        Univariate series.
    m : int, optional
        Bandwidth; defaults to ``floor(n ** 0.5)``.
    bounds : tuple
        Search interval for ``d``.

    Returns
    -------
    MemoryEstimate
        ``boundary`` is set when the minimizer sits at an end of ``bounds``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or np.any(~np.isfinite(x)):
        raise InvalidArgumentError("ELW needs a finite univariate series")
    n = x.size
    m = default_bandwidth(n) if m is None else int(m)
    if m < 4:
        raise InvalidArgumentError("bandwidth m must be >= 4")
    if n < 2 * m + 2:
        raise InvalidArgumentError(f"series length {n} too short for bandwidth {m}")
    lo, hi = bounds
    grid = np.arange(lo, hi + 1e-12, grid_step)
    values = np.array([elw_objective(d, x, m) for d in grid])
    i = int(np.argmin(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(
        elw_objective, bounds=(a, b), args=(x, m), method="bounded", options={"xatol": 1e-7}
    )
    d_hat, f_hat = float(res.x), float(res.fun)
    if values[i] < f_hat:
        d_hat = float(grid[i])
    boundary = d_hat - lo < 1e-3 or hi - d_hat < 1e-3
    return MemoryEstimate(d_hat=d_hat, m=m, variance=1.0 / (4.0 * m), boundary=bool(boundary))
