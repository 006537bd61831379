"""Small helpers for stationary/invertible ARMA parametrizations."""

import numpy as np


def pacf_to_ar(r):
    """Map partial autocorrelations in (-1, 1) to stationary AR coefficients.

    Coefficients follow the sign convention ``1 - phi_1 L - ... - phi_k L^k``.
    """
    r = np.asarray(r, dtype=float)
    phi = np.zeros(0)
    for j, rj in enumerate(r):
        new = np.empty(j + 1)
        new[:j] = phi - rj * phi[::-1]
        new[j] = rj
        phi = new
    return phi


def ar_to_pacf(phi):
    """Inverse of :func:`pacf_to_ar`; returns NaN entries for non-stationary input."""
    phi = np.array(phi, dtype=float)
    k = phi.shape[0]
    r = np.empty(k)
    for j in range(k - 1, -1, -1):
        rj = phi[j]
        r[j] = rj
        if j == 0:
            break
        denom = 1.0 - rj * rj
        if denom <= 0:
            r[:j] = np.nan
            break
        phi = (phi[:j] + rj * phi[:j][::-1]) / denom
    return r


def to_unit_interval(u):
    """Smooth bijection R -> (-1, 1) used for partial autocorrelations."""
    u = np.asarray(u, dtype=float)
    return u / np.sqrt(1.0 + u * u)


def from_unit_interval(r):
    r = np.asarray(r, dtype=float)
    return r / np.sqrt(1.0 - r * r)


def ar_is_stable(phi, margin=0.0):
    """True if all roots of ``1 - phi_1 z - ... - phi_k z^k`` lie outside the unit circle."""
    phi = np.asarray(phi, dtype=float)
    if phi.size == 0 or not np.any(phi):
        return True
    # companion eigenvalues are the inverse roots
    comp = np.zeros((phi.size, phi.size))
    comp[0] = phi
    comp[1:, :-1] = np.eye(phi.size - 1)
    return bool(np.max(np.abs(np.linalg.eigvals(comp))) < 1.0 - margin)


def softplus(x):
    return np.logaddexp(0.0, x)


def inv_softplus(y):
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


def impulse_response(ar, ma, n):
    """First ``n`` MA(infinity) weights of ``(1 + ma(L)) / (1 - ar(L))``."""
    from scipy.signal import lfilter

    impulse = np.zeros(n)
    impulse[0] = 1.0
    return lfilter(np.r_[1.0, ma], np.r_[1.0, -np.asarray(ar, dtype=float)], impulse)
