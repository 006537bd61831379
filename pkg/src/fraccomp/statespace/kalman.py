"""
Kalman filter, state smoother and prediction for :class:`StateSpaceSystem`.

Missing observations (NaN) are handled by deleting the affected rows of the
observation equation at that time point.  Once the predicted state
covariance has converged on a fully observed stretch, the filter reuses the
steady-state gain; any missing value drops it back to the full recursion.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from ..exceptions import InvalidArgumentError, NumericalFailureError

try:
    from . import _kalman_nb
except ImportError:  # pragma: no cover - numba missing
    _kalman_nb = None

#: Default backend: ``"numba"`` when numba is importable, otherwise ``"numpy"``.
DEFAULT_ENGINE = "numba" if _kalman_nb is not None else "numpy"

__all__ = [
    "FilterOutput",
    "SmootherOutput",
    "as_panel",
    "kalman_filter",
    "kalman_smoother",
    "loglikelihood",
    "predict",
]

_LOG_2PI = np.log(2.0 * np.pi)


def as_panel(panel, p=None):
    """Return observations as a float ``(n, p)`` array (accepts DataFrames)."""
    values = getattr(panel, "values", panel)
    y = np.array(values, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[0] == 0:
        raise InvalidArgumentError("panel must be a non-empty n x p array")
    if p is not None and y.shape[1] != p:
        raise InvalidArgumentError(f"panel has {y.shape[1]} columns, system expects {p}")
    if np.any(np.isinf(y)):
        raise InvalidArgumentError("panel contains infinite values")
    return y


@dataclass
class FilterOutput:
    """Prediction-error decomposition and filtered moments.

    ``innovations`` is NaN where the observation is missing; ``finv`` holds
    the inverse innovation covariance padded with zeros in missing rows and
    columns, and ``gains`` the matching padded Kalman gains ``T P Z' F^-1``.
    """

    loglik: float
    loglik_t: np.ndarray
    innovations: np.ndarray
    innovation_covs: np.ndarray
    finv: np.ndarray
    gains: np.ndarray
    predicted_means: np.ndarray
    predicted_covs: np.ndarray
    filtered_means: np.ndarray
    filtered_covs: np.ndarray
    next_mean: np.ndarray
    next_cov: np.ndarray
    observed: np.ndarray
    steady_state_from: int = None

    @property
    def n(self):
        return self.innovations.shape[0]

    def standardized_residuals(self):
        """``e_it = v_it / sqrt(F_ii,t)``; NaN where missing."""
        diag = np.diagonal(self.innovation_covs, axis1=1, axis2=2)
        return self.innovations / np.sqrt(diag)


@dataclass
class SmootherOutput:
    """Smoothed state means ``E[alpha_t | Y_n]`` and covariances."""

    means: np.ndarray
    covs: np.ndarray

    def component_moments(self, states):
        """Means and covariances restricted to the given state indices."""
        idx = np.asarray(states, dtype=int)
        return self.means[:, idx], self.covs[:, idx[:, None], idx[None, :]]


def _run_numpy(system, y, store, steady_state, ss_tol):
    n, p = y.shape
    m = system.m
    T = system.transition
    Z = system.observation
    c = system.obs_intercept
    hvec = system.obs_noise_var
    RQR = system.state_noise_cov
    a = system.initial_mean.copy()
    P = system.initial_cov.copy()
    observed = ~np.isnan(y)
    full_rows = observed.all(axis=1)
    ll_t = np.zeros(n)
    if store:
        out = {
            "v": np.full((n, p), np.nan),
            "F": np.empty((n, p, p)),
            "finv": np.zeros((n, p, p)),
            "K": np.zeros((n, m, p)),
            "a": np.empty((n, m)),
            "P": np.empty((n, m, m)),
            "af": np.empty((n, m)),
            "Pf": np.empty((n, m, m)),
        }
    eye_p = np.eye(p)
    steady = None  # cached (F, Finv, K, PZ, P_filtered, logdet, P_pred)
    steady_from = None
    for t in range(n):
        yt = y[t]
        if store:
            out["a"][t] = a
            out["P"][t] = P
        if steady is not None and full_rows[t]:
            F, Finv, K, PZ, Pf, logdet = steady
            v = yt - c - Z @ a
            u = Finv @ v
            ll_t[t] = -0.5 * (p * _LOG_2PI + logdet + v @ u)
            af = a + PZ @ u
            a = T @ af
            if store:
                out["v"][t] = v
                out["F"][t] = F
                out["finv"][t] = Finv
                out["K"][t] = K
                out["af"][t] = af
                out["Pf"][t] = Pf
            continue
        steady = None
        obs = observed[t]
        k = int(obs.sum())
        if k == 0:
            af, Pf = a, P
            a = T @ a
            P_next = T @ P @ T.T + RQR
            if store:
                out["F"][t] = Z @ P @ Z.T + np.diag(hvec)
                out["af"][t] = af
                out["Pf"][t] = Pf
            P = 0.5 * (P_next + P_next.T)
            continue
        if k == p:
            Zt, vt = Z, yt - c - Z @ a
            Ht = hvec
        else:
            Zt = Z[obs]
            vt = yt[obs] - c[obs] - Zt @ a
            Ht = hvec[obs]
        PZ = P @ Zt.T
        F = Zt @ PZ
        F[np.diag_indices(k)] += Ht
        try:
            L = np.linalg.cholesky(F)
        except np.linalg.LinAlgError:
            raise NumericalFailureError(
                f"innovation covariance not positive definite at t={t}", time_index=t
            ) from None
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        Finv = cho_solve((L, True), eye_p[:k, :k], check_finite=False)
        u = Finv @ vt
        ll_t[t] = -0.5 * (k * _LOG_2PI + logdet + vt @ u)
        af = a + PZ @ u
        Pf = P - PZ @ Finv @ PZ.T
        K = T @ PZ @ Finv
        a = T @ af
        P_next = T @ Pf @ T.T + RQR
        P_next = 0.5 * (P_next + P_next.T)
        if store:
            if k == p:
                out["v"][t] = vt
                out["F"][t] = F
                out["finv"][t] = Finv
                out["K"][t] = K
            else:
                out["v"][t, obs] = vt
                out["F"][t] = Z @ P @ Z.T + np.diag(hvec)
                out["finv"][t][np.ix_(obs, obs)] = Finv
                out["K"][t][:, obs] = K
            out["af"][t] = af
            out["Pf"][t] = Pf
        if (
            steady_state
            and k == p
            and np.max(np.abs(P_next - P)) <= ss_tol * max(1.0, np.max(np.abs(P)))
        ):
            steady = (F, Finv, K, PZ, Pf, logdet)
            if steady_from is None:
                steady_from = t + 1
        P = P_next
    loglik = float(ll_t.sum())
    if not np.isfinite(loglik):
        raise NumericalFailureError("log-likelihood is not finite")
    if not store:
        return loglik
    return FilterOutput(
        loglik=loglik,
        loglik_t=ll_t,
        innovations=out["v"],
        innovation_covs=out["F"],
        finv=out["finv"],
        gains=out["K"],
        predicted_means=out["a"],
        predicted_covs=out["P"],
        filtered_means=out["af"],
        filtered_covs=out["Pf"],
        next_mean=a,
        next_cov=P,
        observed=observed,
        steady_state_from=steady_from,
    )


def _run_numba(system, y, store, steady_state, ss_tol):
    n, p = y.shape
    m = system.m
    shape = (lambda *dims: dims) if store else (lambda *dims: (0,) + dims[1:])
    out_v = np.full(shape(n, p), np.nan)
    out_F = np.empty(shape(n, p, p))
    out_finv = np.zeros(shape(n, p, p))
    out_K = np.zeros(shape(n, m, p))
    out_a = np.empty(shape(n, m))
    out_P = np.empty(shape(n, m, m))
    out_af = np.empty(shape(n, m))
    out_Pf = np.empty(shape(n, m, m))
    ll_t = np.zeros(n)
    f64 = lambda a: np.ascontiguousarray(a, dtype=float)
    failed, steady_from, a, P = _kalman_nb.filter_core(
        f64(system.transition), f64(system.observation), f64(system.obs_intercept),
        f64(system.obs_noise_var), f64(system.state_noise_cov), f64(system.initial_mean),
        f64(system.initial_cov), f64(y), store, steady_state, ss_tol,
        out_v, out_F, out_finv, out_K, out_a, out_P, out_af, out_Pf, ll_t,
    )
    if failed >= 0:
        raise NumericalFailureError(
            f"innovation covariance not positive definite at t={failed}", time_index=int(failed)
        )
    loglik = float(ll_t.sum())
    if not np.isfinite(loglik):
        raise NumericalFailureError("log-likelihood is not finite")
    if not store:
        return loglik
    return FilterOutput(
        loglik=loglik,
        loglik_t=ll_t,
        innovations=out_v,
        innovation_covs=out_F,
        finv=out_finv,
        gains=out_K,
        predicted_means=out_a,
        predicted_covs=out_P,
        filtered_means=out_af,
        filtered_covs=out_Pf,
        next_mean=a,
        next_cov=P,
        observed=~np.isnan(y),
        steady_state_from=None if steady_from < 0 else int(steady_from),
    )


def _run(system, y, store, steady_state, ss_tol, engine=None):
    engine = engine or DEFAULT_ENGINE
    if engine == "numba":
        if _kalman_nb is None:
            raise InvalidArgumentError("numba engine requested but numba is not installed")
        return _run_numba(system, y, store, steady_state, ss_tol)
    if engine == "numpy":
        return _run_numpy(system, y, store, steady_state, ss_tol)
    raise InvalidArgumentError(f"unknown engine {engine!r}")


def kalman_filter(system, panel, steady_state=True, ss_tol=1e-11, engine=None):
    """
    Run the Kalman filter.

    Parameters
    ----------
    system : StateSpaceSystem
    panel : array_like or DataFrame, shape (n, p)
        Observations; NaN marks a missing entry.
    steady_state : bool
        Switch to the converged gain once the predicted covariance changes by
        less than ``ss_tol`` (relative, max-norm) on a fully observed step.
    engine : {"numba", "numpy"}, optional
        Backend; both run the same recursion.

    Returns
    -------
    FilterOutput
    """
    y = as_panel(panel, system.p)
    return _run(system, y, True, steady_state, ss_tol, engine)


def loglikelihood(system, panel, steady_state=True, ss_tol=1e-11, engine=None):
    """Gaussian log-likelihood by prediction-error decomposition (no storage)."""
    y = as_panel(panel, system.p)
    return _run(system, y, False, steady_state, ss_tol, engine)


def kalman_smoother(system, panel=None, filtered=None, engine=None):
    """
    Fixed-interval state smoother (backward ``r_t, N_t`` recursion).

    Either ``panel`` or a stored ``filtered`` output must be supplied.

    Returns
    -------
    SmootherOutput
        ``means[t] = E[alpha_t | Y_n]`` and ``covs[t] = Var[alpha_t | Y_n]``.
    """
    if filtered is None:
        if panel is None:
            raise InvalidArgumentError("need a panel or a filter output")
        filtered = kalman_filter(system, panel, engine=engine)
    engine = engine or DEFAULT_ENGINE
    T = system.transition
    Z = system.observation
    n = filtered.n
    m = system.m
    v0 = np.where(filtered.observed, filtered.innovations, 0.0)
    means = np.empty((n, m))
    covs = np.empty((n, m, m))
    if engine == "numba" and _kalman_nb is not None:
        f64 = lambda a: np.ascontiguousarray(a, dtype=float)
        _kalman_nb.smoother_core(
            f64(T), f64(Z), f64(v0), f64(filtered.finv), f64(filtered.gains),
            f64(filtered.predicted_means), f64(filtered.predicted_covs), means, covs,
        )
        return SmootherOutput(means=means, covs=covs)
    r = np.zeros(m)
    N = np.zeros((m, m))
    for t in range(n - 1, -1, -1):
        finv = filtered.finv[t]
        ZF = Z.T @ finv
        L = T - filtered.gains[t] @ Z
        r = ZF @ v0[t] + L.T @ r
        N = ZF @ Z + L.T @ N @ L
        P = filtered.predicted_covs[t]
        means[t] = filtered.predicted_means[t] + P @ r
        V = P - P @ N @ P
        covs[t] = 0.5 * (V + V.T)
    return SmootherOutput(means=means, covs=covs)


def predict(system, filtered, horizon):
    """
    ``h``-step ahead predictive moments of ``y`` after the filtered sample.

    Returns
    -------
    means : ndarray, shape (horizon, p)
    covs : ndarray, shape (horizon, p, p)
        Entry ``h - 1`` refers to ``y_{n+h}``.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise InvalidArgumentError("forecast horizon must be >= 1")
    T = system.transition
    Z = system.observation
    RQR = system.state_noise_cov
    H = np.diag(system.obs_noise_var)
    a = filtered.next_mean.copy()
    P = filtered.next_cov.copy()
    means = np.empty((horizon, system.p))
    covs = np.empty((horizon, system.p, system.p))
    for h in range(horizon):
        means[h] = system.obs_intercept + Z @ a
        covs[h] = Z @ P @ Z.T + H
        a = T @ a
        P = T @ P @ T.T + RQR
    return means, covs
