"""
Rolling out-of-sample evaluation of covariance forecasts.

A forecaster exposes ``fit(window)`` and ``forecast(window, horizons, rng)``,
where ``window`` is a :class:`fraccomp.realized.CovPanel`.  Parameters are
re-estimated every ``refit_every`` origins; in between, forecasts condition
on the current window with the most recent estimates.
"""

import copy
from dataclasses import dataclass, field
import time

import numpy as np
import pandas as pd

from ..exceptions import FracCompError, InvalidArgumentError
from ..realized import CovPanel, chol_inverse, chol_transform, from_logz, nearest_pd, to_logz
from .linear import DiagonalLinear
from .losses import LOSS_NAMES, loss_record
from .mcs import model_confidence_set
from .wishart import CawDcc, CawDiag

__all__ = [
    "LinearForecaster",
    "WishartForecaster",
    "DofcForecaster",
    "benchmark",
    "BENCHMARKS",
    "LossTable",
    "rolling_eval",
    "risk_table",
]


def _logz_values(window):
    return to_logz(window).to_numpy()


def _chol_mean(mean, cov):
    """``E[L L']`` for a Gaussian half-vectorized Cholesky factor."""
    base = chol_inverse(mean)
    k = base.shape[0]
    il = np.tril_indices(k)
    pos = {(i, j): e for e, (i, j) in enumerate(zip(*il))}
    out = base.copy()
    for a in range(k):
        for b in range(a + 1):
            extra = 0.0
            for c in range(b + 1):
                extra += cov[pos[(a, c)], pos[(b, c)]]
            out[a, b] += extra
            out[b, a] = out[a, b]
    return out


class LinearForecaster:
    """
    Diagonal ARMA / ARFIMA model on log/z or Cholesky coordinates.

    Parameters
    ----------
    ar_order, ma_order : int
    fractional : bool
    representation : {"logz", "chol"}
    n_sim : int
        Draws for the bias-corrected log/z back-transformation (the Cholesky
        back-transformation uses the exact second moment).
    """

    def __init__(self, ar_order=2, ma_order=1, fractional=False, representation="logz", n_sim=1000):
        if representation not in ("logz", "chol"):
            raise InvalidArgumentError(f"unknown representation {representation!r}")
        self.model = DiagonalLinear(ar_order, ma_order, fractional)
        self.representation = representation
        self.n_sim = int(n_sim)

    def _data(self, window):
        return _logz_values(window) if self.representation == "logz" else chol_transform(window)

    def fit(self, window):
        self.model.fit(self._data(window))
        return self

    def forecast(self, window, horizons, rng=None):
        means, covs = self.model.forecast(self._data(window), max(horizons))
        rng = np.random.default_rng(rng)
        out = {}
        for h in horizons:
            if self.representation == "logz":
                out[h] = from_logz(means[h - 1], covs[h - 1], self.n_sim, rng)
            else:
                out[h] = nearest_pd(_chol_mean(means[h - 1], covs[h - 1]))
        return out


class WishartForecaster:
    """Wrapper of :class:`CawDiag` or :class:`CawDcc` for rolling evaluation."""

    def __init__(self, model):
        self.model = model

    def fit(self, window):
        self.model.fit(window)
        return self

    def forecast(self, window, horizons, rng=None):
        path = self.model.forecast(window, max(horizons))
        return {h: nearest_pd(path[h - 1]) for h in horizons}


class DofcForecaster:
    """
    DOFC model on log/z coordinates with Kalman predictions.

    Parameters
    ----------
    spec : DofcSpec
    options : FitOptions, optional
    init : DofcParams, optional
        Starting values for the first fit; semiparametric starting values
        for ``spec`` are used otherwise.  Later fits start from the previous
        estimates.
    n_sim : int
        Draws for the bias-corrected back-transformation.
    """

    def __init__(self, spec, options=None, init=None, n_sim=1000):
        self.spec = spec
        self.options = options
        self.params = init
        self.n_sim = int(n_sim)
        self.last_fit = None

    def fit(self, window):
        from ..semiparam import initial_params
        from ..statespace import fit_ml

        y = _logz_values(window)
        init = self.params if self.params is not None else initial_params(y, self.spec)
        self.last_fit = fit_ml(self.spec, y, init, self.options)
        self.params = self.last_fit.params
        return self

    def forecast(self, window, horizons, rng=None):
        from ..statespace import build_system, kalman_filter, predict

        if self.params is None:
            raise InvalidArgumentError("model has not been fitted")
        y = _logz_values(window)
        system = build_system(self.spec, self.params, y.shape[0])
        filt = kalman_filter(system, y)
        means, covs = predict(system, filt, max(horizons))
        rng = np.random.default_rng(rng)
        return {h: from_logz(means[h - 1], covs[h - 1], self.n_sim, rng) for h in horizons}


BENCHMARKS = ("ARMA", "ARFIMA", "ARFIMA.chol", "CAW.diag", "CAW.dcc")


def benchmark(kind, n_sim=1000):
    """
    Benchmark forecaster by name.

    ``ARMA``: diagonal ARMA(2,1) on log/z; ``ARFIMA``: diagonal
    ARFIMA(1,d,1) on log/z; ``ARFIMA.chol``: the same on Cholesky factors;
    ``CAW.diag``: diagonal CAW(2,1); ``CAW.dcc``: CAW-DCC(2,1,2,1).
    """
    if kind == "ARMA":
        return LinearForecaster(2, 1, False, "logz", n_sim)
    if kind == "ARFIMA":
        return LinearForecaster(1, 1, True, "logz", n_sim)
    if kind == "ARFIMA.chol":
        return LinearForecaster(1, 1, True, "chol", n_sim)
    if kind == "CAW.diag":
        return WishartForecaster(CawDiag(2, 1))
    if kind == "CAW.dcc":
        return WishartForecaster(CawDcc(2, 1, 2, 1))
    raise InvalidArgumentError(f"unknown benchmark {kind!r}; choose from {BENCHMARKS}")


@dataclass
class LossTable:
    """Per-period losses in long format.

    ``frame`` has columns ``model, origin, origin_label, horizon, LF, LS,
    L3, LMV, LD, error``; ``origin`` is the number of observations available
    at the forecast origin and ``error`` is empty unless the model failed.
    """

    frame: pd.DataFrame
    settings: dict = field(default_factory=dict)

    COLUMNS = ("model", "origin", "origin_label", "horizon") + LOSS_NAMES + ("error",)

    @property
    def models(self):
        return list(dict.fromkeys(self.frame["model"]))

    @property
    def horizons(self):
        return sorted(set(int(h) for h in self.frame["horizon"]))

    def matrix(self, loss, horizon):
        """Origins by models matrix of one loss at one horizon."""
        sub = self.frame[self.frame["horizon"] == horizon]
        wide = sub.pivot(index="origin", columns="model", values=loss)
        return wide[[m for m in self.models if m in wide.columns]]

    def risks(self):
        """Average losses indexed by ``(horizon, model)`` (missing values skipped)."""
        return self.frame.groupby(["horizon", "model"], sort=False)[list(LOSS_NAMES)].mean()

    def n_failed(self):
        failed = self.frame["error"].fillna("").astype(str).str.len() > 0
        return self.frame[failed].groupby(["horizon", "model"]).size()

    def to_csv(self, path):
        self.frame.to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def read_csv(cls, path):
        frame = pd.read_csv(path, keep_default_na=True)
        frame["error"] = frame["error"].fillna("")
        return cls(frame)


def _run_model(name, forecaster, panel, window, horizons, returns, refit_every, seed):
    records = []
    n = panel.n
    fitted = False
    fit_error = ""
    timings = {"fit": 0.0, "forecast": 0.0, "refits": 0}
    for origin in range(window, n - min(horizons) + 1):
        win = panel[origin - window : origin]
        active = [h for h in horizons if origin - 1 + h <= n - 1]
        if (origin - window) % refit_every == 0:
            t0 = time.perf_counter()
            try:
                forecaster.fit(win)
                fitted, fit_error = True, ""
            except (FracCompError, np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
                fit_error = f"fit failed: {type(exc).__name__}: {exc}"
            timings["fit"] += time.perf_counter() - t0
            timings["refits"] += 1
        t0 = time.perf_counter()
        try:
            if not fitted:
                raise InvalidArgumentError(fit_error or "model not fitted")
            preds = forecaster.forecast(win, active, rng=np.random.default_rng([seed, origin]))
            error = fit_error
        except (FracCompError, np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            preds = {}
            error = f"{type(exc).__name__}: {exc}"
        timings["forecast"] += time.perf_counter() - t0
        for h in active:
            target = origin - 1 + h
            rec = {"model": name, "origin": origin, "origin_label": str(panel.index[origin - 1]),
                   "horizon": h}
            if h in preds:
                try:
                    r = None if returns is None else returns[target]
                    rec.update(loss_record(preds[h], panel.mats[target], r))
                    rec["error"] = ""
                except (FracCompError, np.linalg.LinAlgError, ValueError) as exc:
                    rec.update({k: np.nan for k in LOSS_NAMES})
                    rec["error"] = f"{type(exc).__name__}: {exc}"
            else:
                rec.update({k: np.nan for k in LOSS_NAMES})
                rec["error"] = error
            records.append(rec)
    return records, timings


def rolling_eval(models, panel, window=1508, horizons=(1, 5, 10, 20), returns=None,
                 refit_every=1, seed=0, n_jobs=1):
    """
    Rolling-window forecast evaluation.

    For every origin ``T'`` (number of observations seen, ``window <= T' <=
    n - h``) each model is given the trailing ``window`` matrices, forecasts
    ``X_{T'+h}`` and is scored with all five losses.

    Parameters
    ----------
    models : dict
        Name to forecaster (see :func:`benchmark`, :class:`DofcForecaster`).
    panel : CovPanel
    window : int
    horizons : sequence of int
    returns : array_like, shape (n, k), optional
        Daily returns aligned with ``panel``; needed for the ``LD`` loss.
    refit_every : int
        Re-estimate every this many origins (1 re-estimates at every origin).
    seed : int
        Seed of the back-transformation draws (per origin substreams).
    n_jobs : int
        Models are evaluated in parallel processes when ``n_jobs > 1``.

    Forecasters are copied, so the objects passed in are left untouched.

    Returns
    -------
    LossTable
        A model failure at an origin is recorded with missing losses and
        the error text; evaluation continues.
    """
    if not isinstance(panel, CovPanel):
        panel = CovPanel(panel)
    horizons = sorted(set(int(h) for h in horizons))
    if not horizons or horizons[0] < 1:
        raise InvalidArgumentError("horizons must be positive integers")
    window = int(window)
    if window < 10 or panel.n < window + horizons[0]:
        raise InvalidArgumentError("panel too short for the window and horizons")
    if int(refit_every) < 1:
        raise InvalidArgumentError("refit_every must be >= 1")
    if returns is not None:
        returns = np.asarray(returns, dtype=float)
        if returns.shape != (panel.n, panel.k):
            raise InvalidArgumentError("returns must have shape (n, k)")
    args = (panel, window, horizons, returns, int(refit_every), int(seed))
    # private copies: warm starts must not leak between calls
    items = [(name, copy.deepcopy(f)) for name, f in models.items()]
    if n_jobs > 1 and len(items) > 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(_run_model)(name, f, *args) for name, f in items)
    else:
        results = [_run_model(name, f, *args) for name, f in items]
    records = [r for recs, _ in results for r in recs]
    frame = pd.DataFrame.from_records(records, columns=list(LossTable.COLUMNS))
    settings = {
        "window": window,
        "horizons": horizons,
        "refit_every": int(refit_every),
        "seed": int(seed),
        "timings": {name: t for (name, _), (_, t) in zip(items, results)},
    }
    return LossTable(frame, settings)


def risk_table(table, n_boot=999, levels=(0.8, 0.9), seed=0, losses=LOSS_NAMES):
    """
    Average losses with model confidence set markers.

    For each horizon and loss the MCS uses blocks of length ``max(5, h)``.

    Returns
    -------
    risks : DataFrame
        Index ``(horizon, model)``; for each loss a value column and a
        ``<loss>_mcs`` marker column (``***`` best, ``**`` 80% set, ``*``
        90% set only).
    details : dict
        ``{(horizon, loss): McsResult}``.
    """
    rows = {}
    details = {}
    for h in table.horizons:
        for loss in losses:
            mat = table.matrix(loss, h)
            if mat.shape[1] == 0 or mat.isna().all().all():
                continue
            res = model_confidence_set(mat, block_len=max(5, h), n_boot=n_boot, levels=levels,
                                       rng=np.random.default_rng([seed, h, LOSS_NAMES.index(loss)]))
            details[(h, loss)] = res
            for model in res.models:
                row = rows.setdefault((h, model), {})
                row[loss] = float(mat[model].mean())
                row[f"{loss}_mcs"] = res.marker(model)
    risks = pd.DataFrame.from_dict(rows, orient="index")
    if not risks.empty:
        risks.index = pd.MultiIndex.from_tuples(risks.index, names=["horizon", "model"])
    return risks, details
