"""
Sequential test for the number of white-noise linear combinations.

The panel is whitened; unit vectors are then extracted one at a time, each
orthogonal to its predecessors and minimizing the squared auto- and
cross-correlations (with the combinations already found) over lags
``1..L``.  After every extraction the combinations found so far are tested
jointly with a multivariate Ljung-Box statistic and the procedure stops at
the first rejection.
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.optimize import minimize

from ..exceptions import InvalidArgumentError
from ..model import orth_complement

__all__ = [
    "DimensionResult",
    "lag_covariances",
    "multivariate_ljung_box",
    "whiten",
    "dimension_test",
]


def lag_covariances(x, lags):
    """Sample autocovariances ``C_k = n^-1 sum_t x_{t+k} x_t'`` for ``k = 0..lags``.

    ``x`` is centred first.  Returns an array of shape ``(lags + 1, p, p)``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    xc = x - x.mean(axis=0)
    return np.array([xc[k:].T @ xc[: n - k] / n for k in range(lags + 1)])


def multivariate_ljung_box(x, lags):
    """
    Hosking's multivariate portmanteau test.

    ``Q = n^2 sum_{k=1}^{L} tr(C_k' C_0^-1 C_k C_0^-1) / (n - k)`` with
    ``j^2 L`` degrees of freedom for a ``j``-variate series.

    Returns
    -------
    stat, pvalue, df
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, j = x.shape
    c = lag_covariances(x, lags)
    c0inv = np.linalg.inv(c[0])
    q = 0.0
    for k in range(1, lags + 1):
        q += np.trace(c[k].T @ c0inv @ c[k] @ c0inv) / (n - k)
    q *= n * n
    df = j * j * lags
    return float(q), float(stats.chi2.sf(q, df)), int(df)


def whiten(y):
    """Centre and whiten; returns ``(x, mean, A)`` with ``x = (y - mean) A``."""
    y = np.asarray(y, dtype=float)
    mean = y.mean(axis=0)
    cov = np.cov(y, rowvar=False, bias=True).reshape(y.shape[1], y.shape[1])
    w, v = np.linalg.eigh(cov)
    if w.min() <= 1e-12 * max(w.max(), 1e-300):
        raise InvalidArgumentError("sample covariance matrix is singular")
    a = (v / np.sqrt(w)) @ v.T
    return (y - mean) @ a, mean, a


@dataclass
class DimensionResult:
    """Outcome of :func:`dimension_test`.

    Attributes
    ----------
    n_whitenoise : int
        Number of accepted white-noise combinations.
    rotation : ndarray, shape (p, p)
        Orthogonal matrix in whitened coordinates; the first
        ``n_whitenoise`` columns span the white-noise combinations, the rest
        the dynamic (factor) space.
    pvalues, statistics : list of float
        Portmanteau results for the first ``j`` combinations, ``j = 1, 2, ...``.
    whitening : ndarray
        ``A`` with whitened data ``(y - mean) A``.
    mean : ndarray
    factors : ndarray, shape (n, p - n_whitenoise)
        Whitened data projected on the dynamic space.
    """

    n_whitenoise: int
    rotation: np.ndarray
    pvalues: list
    statistics: list
    whitening: np.ndarray
    mean: np.ndarray
    factors: np.ndarray
    lags: int
    alpha: float

    @property
    def n_factors(self):
        return self.rotation.shape[0] - self.n_whitenoise

    @property
    def factor_loadings(self):
        """``p x r`` matrix mapping centred observations to the factors."""
        return self.whitening @ self.rotation[:, self.n_whitenoise :]


def _next_direction(cs, found, rng, n_starts):
    p = cs[0].shape[0]
    basis = orth_complement(found) if found.shape[1] else np.eye(p)
    if basis.shape[1] == 1:
        return basis[:, 0]
    red = [basis.T @ c @ basis for c in cs]
    red_found = [basis.T @ c @ found for c in cs]
    red_found_t = [found.T @ c @ basis for c in cs]

    def fun(u):
        nu = np.linalg.norm(u)
        b = u / nu
        f = 0.0
        g = np.zeros_like(b)
        for c, cf, cft in zip(red, red_found, red_found_t):
            s = b @ c @ b
            f += s * s
            g += 2.0 * s * (c + c.T) @ b
            if found.shape[1]:
                v1 = cf.T @ b
                v2 = cft @ b
                f += v1 @ v1 + v2 @ v2
                g += 2.0 * (cf @ v1 + cft.T @ v2)
        # project the gradient onto the tangent space of the sphere
        g = (g - (g @ b) * b) / nu
        return f, g

    m = sum(c @ c.T + c.T @ c for c in red)
    starts = [np.linalg.eigh(0.5 * (m + m.T))[1][:, 0]]
    starts += [rng.standard_normal(basis.shape[1]) for _ in range(n_starts)]
    best, best_f = None, np.inf
    for u0 in starts:
        res = minimize(fun, u0, jac=True, method="BFGS", options={"gtol": 1e-10, "maxiter": 500})
        if res.fun < best_f:
            best_f, best = res.fun, res.x / np.linalg.norm(res.x)
    return basis @ best


def dimension_test(panel, lags=3, alpha=0.05, n_starts=3, rng=0, n_whitenoise=None):
    """
    Estimate the number of white-noise combinations in a panel.

    Parameters
    ----------
    panel : array_like, shape (n, p)
    lags : int
        Lag bound ``L`` for the autocorrelation criterion and the test.
    alpha : float
        Significance level of each sequential test.
    n_starts : int
        Random restarts per direction, in addition to an eigenvector start.
    rng : Generator or int
    n_whitenoise : int, optional
        Extract exactly this many combinations without testing (used to
        build starting values for a given model size); ``pvalues`` are
        still reported.

    Returns
    -------
    DimensionResult
    """
    y = np.asarray(getattr(panel, "values", panel), dtype=float)
    if y.ndim != 2 or np.any(~np.isfinite(y)):
        raise InvalidArgumentError("dimension_test needs a complete n x p panel")
    n, p = y.shape
    if n <= p + lags:
        raise InvalidArgumentError("need n > p + lags")
    rng = np.random.default_rng(rng)
    x, mean, a = whiten(y)
    cs = lag_covariances(x, lags)[1:]
    found = np.zeros((p, 0))
    pvalues, statistics = [], []
    n_wn = p
    if n_whitenoise is not None:
        if not 0 <= int(n_whitenoise) <= p:
            raise InvalidArgumentError("n_whitenoise must lie in [0, p]")
        n_wn = int(n_whitenoise)
    for j in range(p if n_whitenoise is None else n_wn):
        b = _next_direction(cs, found, rng, n_starts)
        found = np.column_stack([found, b])
        stat, pval, _ = multivariate_ljung_box(x @ found, lags)
        statistics.append(stat)
        pvalues.append(pval)
        if n_whitenoise is None and pval < alpha:
            n_wn = j
            found = found[:, :j]
            break
    if n_wn < p:
        rest = orth_complement(found) if found.shape[1] else np.eye(p)
        rotation = np.column_stack([found, rest])
    else:
        rotation = found
    return DimensionResult(
        n_whitenoise=int(n_wn),
        rotation=rotation,
        pvalues=pvalues,
        statistics=statistics,
        whitening=a,
        mean=mean,
        factors=x @ rotation[:, n_wn:],
        lags=int(lags),
        alpha=float(alpha),
    )
