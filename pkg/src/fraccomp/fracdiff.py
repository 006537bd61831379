"""
Fractional difference and integration operators with type-II truncation.

All filters assume zero pre-sample values, so that

    (1 - L)^d x_t = sum_{i=0}^{t-1} pi_i(d) x_{t-i},

and the integration operator is the same filter with ``-d``.  Under this
truncation the operators form a group: differencing by ``a`` and then by
``b`` equals differencing by ``a + b`` exactly.
"""

import numpy as np
from scipy.signal import fftconvolve

from .exceptions import InvalidArgumentError

__all__ = [
    "FFT_THRESHOLD",
    "pi_coeffs",
    "frac_diff",
    "frac_integrate",
    "frac_lag",
    "simulate_fi",
]

#: Series longer than this are filtered by FFT convolution instead of direct sums.
FFT_THRESHOLD = 4096


def _check_order(d):
    d = float(d)
    if not np.isfinite(d):
        raise InvalidArgumentError(f"memory parameter must be finite, got {d}")
    return d


def pi_coeffs(d, n):
    """
    First ``n`` coefficients of the expansion of ``(1 - L)^d``.

    Parameters
    ----------
    d : float
        Memory parameter. Negative values give the integration filter.
    n : int
        Number of coefficients, ``n >= 1``.

    Returns
    -------
    ndarray
        ``pi_0(d), ..., pi_{n-1}(d)`` computed by the recursion
        ``pi_j = pi_{j-1} (j - 1 - d) / j``.
    """
    d = _check_order(d)
    n = int(n)
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    j = np.arange(1, n, dtype=float)
    coeffs = np.empty(n)
    coeffs[0] = 1.0
    # cumulative product of the recursion factors; stays finite where Gamma ratios overflow
    coeffs[1:] = np.cumprod((j - 1.0 - d) / j)
    return coeffs


def _as_series(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[0] == 0:
        raise InvalidArgumentError("input series must be non-empty")
    return x


def _truncated_filter(x, coeffs, method):
    n = x.shape[0]
    if method == "auto":
        method = "fft" if n > FFT_THRESHOLD else "direct"
    if x.ndim == 1:
        if method == "fft":
            return fftconvolve(x, coeffs)[:n]
        return np.convolve(x, coeffs)[:n]
    if method == "fft":
        return fftconvolve(x, coeffs[:, None], axes=0)[:n]
    return np.column_stack([np.convolve(x[:, j], coeffs)[:n] for j in range(x.shape[1])])


def frac_diff(x, d, method="auto"):
    """
    Apply the truncated fractional difference ``(1 - L)_+^d``.

    Parameters
    ----------
    x : array_like
        Series of shape ``(n,)`` or panel of shape ``(n, k)``; each column is
        filtered separately.
    d : float
        Memory parameter.
    method : {"auto", "direct", "fft"}
        Convolution route. ``"auto"`` uses FFT for ``n > FFT_THRESHOLD``.

    Returns
    -------
    ndarray
        Filtered series with the same shape as ``x``.
    """
    x = _as_series(x)
    d = _check_order(d)
    if d == 0.0:
        return x.copy()
    return _truncated_filter(x, pi_coeffs(d, x.shape[0]), method)


def frac_integrate(x, d, method="auto"):
    """Apply the truncated fractional integration ``(1 - L)_+^{-d}``."""
    return frac_diff(x, -_check_order(d), method=method)


def frac_lag(x, b, method="auto"):
    """
    Fractional lag operator ``L_b = 1 - (1 - L)^b``.

    For ``b = 1`` this is the ordinary lag with a zero in the first position.
    """
    b = _check_order(b)
    if b <= 0:
        raise InvalidArgumentError(f"fractional lag requires b > 0, got {b}")
    x = _as_series(x)
    return x - frac_diff(x, b, method=method)


def simulate_fi(d, n, rng, innovation_sd=1.0):
    """
    Simulate type-II fractionally integrated Gaussian noise.

    Parameters
    ----------
    d : float
        Memory parameter.
    n : int
        Sample size.
    rng : numpy.random.Generator or int
        Random generator, or a seed for ``numpy.random.default_rng``.
    innovation_sd : float
        Standard deviation of the Gaussian innovations.

    Returns
    -------
    ndarray of shape (n,)
    """
    if innovation_sd <= 0:
        raise InvalidArgumentError("innovation_sd must be positive")
    n = int(n)
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(rng)
    xi = innovation_sd * rng.standard_normal(n)
    return frac_integrate(xi, d)
