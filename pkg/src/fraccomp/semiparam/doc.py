"""
Dynamic orthogonal components: an orthogonal rotation of whitened factors
that minimizes squared lagged cross-correlations.

The rotation is parametrized by Givens angles and optimized by Jacobi sweeps
(one angle at a time, each by grid search plus bounded refinement), repeated
from a few random orthogonal starts.
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.optimize import minimize_scalar

from ..exceptions import InvalidArgumentError
from .dimension import lag_covariances, whiten

__all__ = ["DocResult", "cross_correlation_statistic", "doc_rotation", "random_orthogonal"]


def cross_correlation_statistic(x, lags):
    """
    Portmanteau statistic for zero cross-correlation between components.

    Sums ``n^2 / (n - k) * rho_ij(k)^2`` over ordered pairs ``i != j`` and
    lags ``k = 1..lags``, plus ``n * rho_ij(0)^2`` over pairs ``i < j``.

    Returns
    -------
    stat, df, pvalue
        ``df = r(r-1)/2 + lags * r(r-1)`` for ``r`` components.
    """
    x = np.asarray(x, dtype=float)
    n, r = x.shape
    c = lag_covariances(x, lags)
    sd = np.sqrt(np.diag(c[0]))
    rho = c / np.outer(sd, sd)
    off = ~np.eye(r, dtype=bool)
    stat = n * np.sum(np.triu(rho[0], 1) ** 2)
    for k in range(1, lags + 1):
        stat += n * n / (n - k) * np.sum(rho[k][off] ** 2)
    df = r * (r - 1) // 2 + lags * r * (r - 1)
    return float(stat), int(df), float(stats.chi2.sf(stat, df))


def random_orthogonal(r, rng):
    q, rr = np.linalg.qr(rng.standard_normal((r, r)))
    return q * np.sign(np.diag(rr))


@dataclass
class DocResult:
    """Outcome of :func:`doc_rotation`.

    Attributes
    ----------
    components : ndarray, shape (n, r)
        Rotated components in levels, unit variance.
    rotation : ndarray, shape (r, r)
        Orthogonal ``W`` acting on the whitened factors.
    unmixing : ndarray, shape (r, r)
        ``components = (factors - mean) @ unmixing``.
    stat_before, stat_after : float
        Cross-correlation statistic of the whitened and the rotated series.
    df : int
    pvalue_before, pvalue_after : float
    converged : bool
        False if the sweeps stagnated before meeting the tolerance.
    """

    components: np.ndarray
    rotation: np.ndarray
    unmixing: np.ndarray
    stat_before: float
    stat_after: float
    df: int
    pvalue_before: float
    pvalue_after: float
    lags: int
    in_levels: bool
    converged: bool

    def critical_value(self, level=0.01):
        return float(stats.chi2.ppf(1.0 - level, self.df))


def _criterion(cs, w):
    f = 0.0
    for c in cs:
        cw = w.T @ c @ w
        f += np.sum(cw**2) - np.sum(np.diag(cw) ** 2)
    return f


def _rotate(w, i, j, theta):
    c, s = np.cos(theta), np.sin(theta)
    out = w.copy()
    wi, wj = w[:, i].copy(), w[:, j].copy()
    out[:, i] = c * wi - s * wj
    out[:, j] = s * wi + c * wj
    return out


def _sweeps(cs, w, tol, max_sweeps):
    r = w.shape[0]
    f = _criterion(cs, w)
    grid = np.linspace(0.0, np.pi / 2, 19)[:-1]
    for sweep in range(max_sweeps):
        f_start = f
        for i in range(r - 1):
            for j in range(i + 1, r):
                vals = [_criterion(cs, _rotate(w, i, j, t)) for t in grid]
                k = int(np.argmin(vals))
                step = grid[1] - grid[0]
                res = minimize_scalar(
                    lambda t: _criterion(cs, _rotate(w, i, j, t)),
                    bounds=(grid[k] - step, grid[k] + step),
                    method="bounded",
                    options={"xatol": 1e-10},
                )
                theta = res.x if res.fun < vals[k] else grid[k]
                f_new = min(res.fun, vals[k])
                if f_new < f:
                    w = _rotate(w, i, j, theta)
                    f = _criterion(cs, w)
        if f_start - f <= tol * max(f_start, 1e-300):
            return w, f, True
    return w, f, False


def doc_rotation(factors, lags=3, in_levels=True, n_restarts=3, tol=1e-10, max_sweeps=50, rng=0):
    """
    Rotate factors into dynamically orthogonal components.

    Parameters
    ----------
    factors : array_like, shape (n, r)
        ``r >= 2`` factor series.
    lags : int
        Cross-correlations at lags ``1..lags`` enter the criterion.
    in_levels : bool
        Estimate the rotation on levels (default) or on first differences;
        components are always returned in levels.
    n_restarts : int
        Random orthogonal starts besides the identity.
    rng : Generator or int

    Returns
    -------
    DocResult
    """
    f = np.asarray(getattr(factors, "values", factors), dtype=float)
    if f.ndim != 2 or f.shape[1] < 2:
        raise InvalidArgumentError("doc_rotation needs at least two factor series")
    rng = np.random.default_rng(rng)
    base = f if in_levels else np.diff(f, axis=0)
    xw, mean, a = whiten(base)
    cs = lag_covariances(xw, lags)[1:]
    r = f.shape[1]
    best_w, best_f, conv = None, np.inf, False
    for start in [np.eye(r)] + [random_orthogonal(r, rng) for _ in range(n_restarts)]:
        w, val, ok = _sweeps(cs, start, tol, max_sweeps)
        if val < best_f:
            best_w, best_f, conv = w, val, ok
    stat0, df, p0 = cross_correlation_statistic(xw, lags)
    stat1, _, p1 = cross_correlation_statistic(xw @ best_w, lags)
    unmixing = a @ best_w
    mean_levels = f.mean(axis=0)
    components = (f - mean_levels) @ unmixing
    return DocResult(
        components=components,
        rotation=best_w,
        unmixing=unmixing,
        stat_before=stat0,
        stat_after=stat1,
        df=df,
        pvalue_before=p0,
        pvalue_after=p1,
        lags=int(lags),
        in_levels=bool(in_levels),
        converged=conv,
    )
