"""
Residual diagnostics for fitted state space models.

Standardized residuals ``e_it = v_it / sqrt(F_ii,t)`` are screened with
Ljung-Box tests, ARCH-LM tests and the Jarque-Bera normality test, laid out
with one row per series and columns ``LB5, LB10, LB22, CH5, CH10, CH22, JB``.
"""

import numpy as np
import pandas as pd
from scipy import stats

from ..exceptions import InvalidArgumentError
from .kalman import FilterOutput, kalman_filter, kalman_smoother

__all__ = [
    "ljung_box",
    "arch_lm",
    "jarque_bera",
    "residual_diagnostics",
    "smoothed_components",
]

DEFAULT_LAGS = (5, 10, 22)


def _clean(x):
    x = np.asarray(x, dtype=float).ravel()
    return x[~np.isnan(x)]


def _degenerate(x):
    return x.size < 3 or np.var(x) <= 1e-14 * max(1.0, np.mean(x) ** 2)


def ljung_box(x, lags):
    """
    Ljung-Box portmanteau test.

    Returns
    -------
    stat, pvalue : float
        ``Q = n (n + 2) sum_{k=1}^{lags} r_k^2 / (n - k)`` against
        chi-squared with ``lags`` degrees of freedom.
    """
    x = _clean(x)
    n = x.size
    if lags < 1 or lags >= n:
        raise InvalidArgumentError("need 1 <= lags < n")
    xc = x - x.mean()
    denom = xc @ xc
    k = np.arange(1, lags + 1)
    r = np.array([xc[j:] @ xc[:-j] for j in k]) / denom
    q = n * (n + 2) * np.sum(r * r / (n - k))
    return float(q), float(stats.chi2.sf(q, lags))


def arch_lm(x, lags):
    """
    Engle's ARCH-LM test: ``n_eff * R^2`` from regressing ``x_t^2`` on a
    constant and ``lags`` of its own lags, against chi-squared(``lags``).
    """
    x = _clean(x)
    e2 = (x - x.mean()) ** 2
    n = e2.size - lags
    if n <= lags + 1:
        raise InvalidArgumentError("series too short for ARCH-LM test")
    target = e2[lags:]
    design = np.column_stack([np.ones(n)] + [e2[lags - j : -j] for j in range(1, lags + 1)])
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ coef
    tc = target - target.mean()
    r2 = 1.0 - (resid @ resid) / (tc @ tc)
    lm = n * r2
    return float(lm), float(stats.chi2.sf(lm, lags))


def jarque_bera(x):
    """Jarque-Bera statistic ``n/6 (S^2 + (K - 3)^2 / 4)`` and chi-squared(2) p-value."""
    x = _clean(x)
    n = x.size
    xc = x - x.mean()
    m2 = np.mean(xc**2)
    skew = np.mean(xc**3) / m2**1.5
    kurt = np.mean(xc**4) / m2**2
    jb = n / 6.0 * (skew**2 + 0.25 * (kurt - 3.0) ** 2)
    return float(jb), float(stats.chi2.sf(jb, 2))


def residual_diagnostics(residuals, lags=DEFAULT_LAGS):
    """
    Diagnostic p-values per series.

    Parameters
    ----------
    residuals : FilterOutput or array_like, shape (n, p)
        A filter output (standardized residuals are taken from it) or a
        residual matrix; NaN entries are dropped series by series.
    lags : sequence of int

    Returns
    -------
    DataFrame
        Rows ``e_1 ... e_p``; columns ``LB<lag>``, ``CH<lag>``, ``JB`` and
        a boolean ``degenerate`` flag (p-values NaN for flagged series).
    """
    if isinstance(residuals, FilterOutput):
        e = residuals.standardized_residuals()
    else:
        e = np.asarray(residuals, dtype=float)
        if e.ndim == 1:
            e = e[:, None]
    cols = [f"LB{l}" for l in lags] + [f"CH{l}" for l in lags] + ["JB"]
    rows = []
    for i in range(e.shape[1]):
        x = _clean(e[:, i])
        if _degenerate(x):
            rows.append([np.nan] * len(cols) + [True])
            continue
        vals = [ljung_box(x, l)[1] for l in lags]
        vals += [arch_lm(x, l)[1] for l in lags]
        vals.append(jarque_bera(x)[1])
        rows.append(vals + [False])
    index = [f"e_{i + 1}" for i in range(e.shape[1])]
    out = pd.DataFrame(rows, index=index, columns=cols + ["degenerate"])
    out["degenerate"] = out["degenerate"].astype(bool)
    return out


def smoothed_components(system, panel, names=None):
    """
    Smoothed latent components with two-standard-deviation bands.

    Returns
    -------
    DataFrame
        For each component the columns ``<name>_mean``, ``<name>_lower``
        and ``<name>_upper`` (mean minus/plus two smoothed SDs).
    """
    smoothed = kalman_smoother(system, filtered=kalman_filter(system, panel))
    means, covs = smoothed.component_moments(system.component_states)
    sd = np.sqrt(np.clip(np.diagonal(covs, axis1=1, axis2=2), 0.0, None))
    if names is None:
        names = [
            f"x{b['index'] + 1}" if b["kind"] == "fractional" else f"z{b['index'] + 1}"
            for b in system.blocks
        ]
    data = {}
    for j, nm in enumerate(names):
        data[f"{nm}_mean"] = means[:, j]
        data[f"{nm}_lower"] = means[:, j] - 2 * sd[:, j]
        data[f"{nm}_upper"] = means[:, j] + 2 * sd[:, j]
    index = getattr(panel, "index", None)
    return pd.DataFrame(data, index=index if index is not None and len(index) == means.shape[0] else None)
