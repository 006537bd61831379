"""
Maximum likelihood estimation of DOFC models in state space form.

Estimation alternates between EM sweeps and a quasi-Newton polish:

* one EM iteration runs the smoother, updates ``c``, the free loadings and
  ``h`` in closed form (row-wise regressions on smoothed component moments),
  and then updates every memory parameter and AR coefficient by a bounded
  one-dimensional search on the log-likelihood itself;
* BFGS then works on the packed parameter vector.  Its gradient is analytic
  for the observation-equation parameters (score identity applied to the
  smoothed moments) and uses central differences for ``d`` and ``phi``.
"""

from dataclasses import dataclass, field
import json
import time

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .. import _arma
from ..exceptions import (
    DegenerateModelError,
    FracCompError,
    InvalidArgumentError,
    NumericalFailureError,
)
from ..model import (
    DofcParams,
    DofcSpec,
    gamma_mask,
    lambda_mask,
    n_free,
    natural_names,
    natural_vector,
    pack,
    params_from_dict,
    params_to_dict,
    simulate_dofc,
    unpack,
    validate,
)
from .approx import D_GRID_MAX, arma_table
from .kalman import _run, as_panel, kalman_filter, kalman_smoother
from .system import build_system

__all__ = [
    "FitOptions",
    "FitResult",
    "LikelihoodModel",
    "em_iterate",
    "m_step",
    "fit_ml",
    "std_errors",
    "bic",
    "bic_search",
]

_MIN_GAP = 1e-3


@dataclass
class FitOptions:
    """Tuning knobs of :func:`fit_ml`.

    Attributes
    ----------
    em_tol : float
        EM stops once the relative log-likelihood change drops below this.
    em_max_iter : int
    quasi_newton : bool
        Run BFGS after EM.
    gtol : float
        BFGS stops when the max-norm of the gradient of the negative
        log-likelihood per observation falls below this.
    qn_max_iter : int
    d_window, pacf_window : float
        Half-widths of the one-dimensional search intervals used by EM.
    h_floor : float
        Lower bound for measurement noise variances, relative to the
        sample variance of each series.
    """

    em_tol: float = 1e-6
    em_max_iter: int = 200
    quasi_newton: bool = True
    gtol: float = 1e-5
    qn_max_iter: int = 500
    d_window: float = 0.1
    pacf_window: float = 0.2
    h_floor: float = 1e-6

    def to_dict(self):
        return dict(self.__dict__)


class LikelihoodModel:
    """Log-likelihood of a DOFC spec on one panel, with cached approximations."""

    def __init__(self, spec, panel):
        self.spec = spec
        self.y = as_panel(panel, spec.p)
        self.n, self.p = self.y.shape
        self.observed = ~np.isnan(self.y)
        self.table = arma_table(self.n) if spec.s else None
        self.n_evals = 0

    def system(self, params):
        return build_system(self.spec, params, self.n, table=self.table)

    def loglik(self, params):
        """Log-likelihood, ``-inf`` when the filter fails."""
        self.n_evals += 1
        try:
            return _run(self.system(params), self.y, False, True, 1e-11)
        except NumericalFailureError:
            return -np.inf

    def loglik_t(self, params):
        """Per-period contributions (no steady-state shortcut)."""
        return kalman_filter(self.system(params), self.y, steady_state=False).loglik_t

    def smooth(self, params):
        system = self.system(params)
        filtered = kalman_filter(system, self.y)
        smoothed = kalman_smoother(system, filtered=filtered)
        means, covs = smoothed.component_moments(system.component_states)
        return filtered.loglik, means, covs


# ---------------------------------------------------------------------------
# observation-equation moments


def _loadings(spec, params):
    return np.hstack([params.lam, params.gamma])


def _free_mask(spec):
    return np.hstack([lambda_mask(spec), gamma_mask(spec)])


def _row_moments(model, means, covs):
    """Per-row sufficient statistics ``(Sww, Swy, Syy, n_i, cols)``.

    ``w_t = (1, f_t[free])`` when constants are included, else ``f_t[free]``.
    """
    spec = model.spec
    y0 = np.where(model.observed, model.y, 0.0)
    mask = _free_mask(spec)
    const = spec.include_constants
    # augment with a constant regressor whose variance is zero
    n = model.n
    r = means.shape[1]
    ma = np.hstack([np.ones((n, 1)), means])
    ca = np.zeros((n, r + 1, r + 1))
    ca[:, 1:, 1:] = covs
    out = []
    for i in range(spec.p):
        obs = model.observed[:, i]
        cols = np.flatnonzero(mask[i]) + 1
        if const:
            cols = np.r_[0, cols]
        mw = ma[obs][:, cols]
        cw = ca[obs][:, cols[:, None], cols[None, :]]
        sww = mw.T @ mw + cw.sum(axis=0)
        swy = mw.T @ y0[obs, i]
        syy = float(y0[obs, i] @ y0[obs, i])
        out.append((sww, swy, syy, int(obs.sum()), cols))
    return out


def _row_coefficients(spec, params, i, cols):
    full = np.r_[params.c[i], _loadings(spec, params)[i]]
    return full[cols]


def m_step(spec, params, model, means, covs, h_floor=1e-6):
    """
    Closed-form update of ``c``, free loadings and ``h`` given smoothed moments.

    Parameters
    ----------
    means : ndarray, shape (n, s + s0)
        Smoothed component means.
    covs : ndarray, shape (n, s + s0, s + s0)
        Smoothed component covariances.

    Returns
    -------
    DofcParams
        ``d`` and ``phi`` are copied from ``params``.
    """
    moments = _row_moments(model, means, covs)
    load = np.zeros((spec.p, spec.s + spec.s0))
    c = np.zeros(spec.p)
    h = np.empty(spec.p)
    yvar = np.nanvar(model.y, axis=0)
    for i, (sww, swy, syy, ni, cols) in enumerate(moments):
        if ni == 0:
            raise DegenerateModelError(f"series {i + 1} has no observations")
        try:
            beta = np.linalg.solve(sww, swy) if cols.size else np.zeros(0)
        except np.linalg.LinAlgError:
            raise DegenerateModelError(f"singular M-step regression in row {i + 1}") from None
        full = np.zeros(spec.s + spec.s0 + 1)
        full[cols] = beta
        c[i] = full[0]
        load[i] = full[1:]
        ssr = syy - 2.0 * beta @ swy + beta @ sww @ beta
        h[i] = max(ssr / ni, h_floor * max(yvar[i], 1e-300))
    return params.replace(lam=load[:, : spec.s], gamma=load[:, spec.s :], c=c, h=h)


def _obs_gradient(spec, params, model, means, covs):
    """Score of the observation parameters as arrays shaped like (c, load, log h)."""
    moments = _row_moments(model, means, covs)
    g_full = np.zeros((spec.p, spec.s + spec.s0 + 1))
    g_logh = np.empty(spec.p)
    for i, (sww, swy, syy, ni, cols) in enumerate(moments):
        beta = _row_coefficients(spec, params, i, cols)
        hi = params.h[i]
        g_full[i, cols] = (swy - sww @ beta) / hi
        ssr = syy - 2.0 * beta @ swy + beta @ sww @ beta
        g_logh[i] = -0.5 * ni + 0.5 * ssr / hi
    return g_full[:, 0], g_full[:, 1 : spec.s + 1], g_full[:, spec.s + 1 :], g_logh


# ---------------------------------------------------------------------------
# EM


def _search(f, x0, f0, lo, hi, window, maxiter=10):
    """Bounded 1-D maximization of ``f`` around ``x0``; returns the better point."""
    a, b = max(lo, x0 - window), min(hi, x0 + window)
    if b - a < 1e-8:
        return x0, f0
    res = minimize_scalar(
        lambda x: -f(x), bounds=(a, b), method="bounded", options={"xatol": 1e-5, "maxiter": maxiter}
    )
    if np.isfinite(res.fun) and -res.fun > f0:
        return float(res.x), float(-res.fun)
    return x0, f0


def _state_updates(spec, params, model, ll, options):
    """Coordinate-wise line searches on ``d`` and the AR partial autocorrelations."""
    for j in range(spec.q):
        d = params.d.copy()
        lo = d[j + 1] + _MIN_GAP if j + 1 < spec.q else _MIN_GAP
        hi = d[j - 1] - _MIN_GAP if j > 0 else D_GRID_MAX

        def f(x, j=j, d=d):
            dd = d.copy()
            dd[j] = x
            return model.loglik(params.replace(d=dd))

        x, ll = _search(f, d[j], ll, lo, hi, options.d_window)
        d[j] = x
        params = params.replace(d=d)
    for i in range(spec.s0):
        r0 = _arma.ar_to_pacf(params.phi[i])
        for l in range(spec.ar_order):

            def f(x, i=i, l=l, r0=r0):
                r = r0.copy()
                r[l] = x
                phi = params.phi.copy()
                phi[i] = _arma.pacf_to_ar(r)
                return model.loglik(params.replace(phi=phi))

            x, ll = _search(f, r0[l], ll, -0.995, 0.995, options.pacf_window)
            r0 = r0.copy()
            r0[l] = x
            phi = params.phi.copy()
            phi[i] = _arma.pacf_to_ar(r0)
            params = params.replace(phi=phi)
    return params, ll


def em_iterate(spec, params, panel, options=None, model=None, return_loglik=False):
    """
    One EM iteration.

    The E-step smooths the components; the M-step updates the observation
    equation in closed form and then ``d`` and ``phi`` by one-dimensional
    searches that are accepted only if they raise the log-likelihood.

    Returns
    -------
    DofcParams, or ``(DofcParams, loglik_before, loglik_after)`` when
    ``return_loglik`` is true.
    """
    options = options or FitOptions()
    model = model or LikelihoodModel(spec, panel)
    ll0, means, covs = model.smooth(params)
    new = m_step(spec, params, model, means, covs, options.h_floor)
    ll = model.loglik(new)
    if not ll >= ll0:
        # numerical safeguard: the closed-form step cannot lower the likelihood
        new, ll = params, ll0
    new, ll = _state_updates(spec, new, model, ll, options)
    if return_loglik:
        return new, ll0, ll
    return new


# ---------------------------------------------------------------------------
# packed-vector objective


def _packed_layout(spec):
    k_l = int(lambda_mask(spec).sum())
    k_g = int(gamma_mask(spec).sum())
    q, k_phi, p = spec.q, spec.s0 * spec.ar_order, spec.p
    pos = np.cumsum([0, q, k_l, k_g, k_phi, p, p if spec.include_constants else 0])
    return {
        "d": slice(pos[0], pos[1]),
        "lam": slice(pos[1], pos[2]),
        "gamma": slice(pos[2], pos[3]),
        "phi": slice(pos[3], pos[4]),
        "logh": slice(pos[4], pos[5]),
        "c": slice(pos[5], pos[6]),
    }


def loglik_gradient(spec, model, theta, fd_step=1e-5):
    """
    Log-likelihood and its gradient with respect to the packed vector.

    Returns
    -------
    loglik : float
    grad : ndarray
    """
    params = unpack(spec, theta)
    ll, means, covs = model.smooth(params)
    g_c, g_lam, g_gam, g_logh = _obs_gradient(spec, params, model, means, covs)
    layout = _packed_layout(spec)
    grad = np.zeros_like(theta)
    grad[layout["lam"]] = g_lam.T[lambda_mask(spec).T]
    grad[layout["gamma"]] = g_gam.T[gamma_mask(spec).T]
    grad[layout["logh"]] = g_logh
    if spec.include_constants:
        grad[layout["c"]] = g_c
    for k in list(range(layout["d"].start, layout["d"].stop)) + list(
        range(layout["phi"].start, layout["phi"].stop)
    ):
        step = fd_step * (1.0 + abs(theta[k]))
        tp, tm = theta.copy(), theta.copy()
        tp[k] += step
        tm[k] -= step
        grad[k] = (model.loglik(unpack(spec, tp)) - model.loglik(unpack(spec, tm))) / (2 * step)
    return ll, grad


def _quasi_newton(spec, model, params, options, trace):
    scale = 1.0 / (model.n * model.p)
    best = {"f": np.inf, "theta": pack(spec, params)}

    def fun(theta):
        try:
            ll, g = loglik_gradient(spec, model, theta)
        except (NumericalFailureError, DegenerateModelError, np.linalg.LinAlgError):
            return np.inf, np.zeros_like(theta)
        f = -ll * scale
        if not np.isfinite(f):
            return np.inf, np.zeros_like(theta)
        if f < best["f"]:
            best["f"], best["theta"] = f, theta.copy()
        return f, -g * scale

    def callback(theta):
        trace.append({"stage": "bfgs", "iteration": len(trace), "loglik": -best["f"] / scale})

    res = minimize(
        fun,
        best["theta"],
        jac=True,
        method="BFGS",
        callback=callback,
        options={"gtol": options.gtol, "norm": np.inf, "maxiter": options.qn_max_iter},
    )
    theta = res.x if res.fun <= best["f"] else best["theta"]
    ll = -min(res.fun, best["f"]) / scale
    return unpack(spec, theta), ll, bool(res.success), str(res.message)


# ---------------------------------------------------------------------------
# results


def bic(loglik, n, p, k):
    """``(-2 loglik + log(n) k) / (n p)``."""
    return (-2.0 * loglik + np.log(n) * k) / (n * p)


@dataclass
class FitResult:
    """Outcome of :func:`fit_ml`.

    ``bic`` uses ``(-2 loglik + log(n) n_free) / (n p)``; only rankings
    between specifications are meaningful.
    """

    spec: DofcSpec
    params: DofcParams
    loglik: float
    bic: float
    n: int
    n_free: int
    converged: bool
    message: str = ""
    trace: list = field(default_factory=list)
    std_errors: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    @property
    def param_names(self):
        return natural_names(self.spec)

    @property
    def estimates(self):
        return natural_vector(self.spec, self.params)

    def to_dict(self):
        return {
            "spec": self.spec.to_dict(),
            "params": params_to_dict(self.params),
            "loglik": self.loglik,
            "bic": self.bic,
            "n": self.n,
            "n_free": self.n_free,
            "converged": self.converged,
            "message": self.message,
            "trace": self.trace,
            "std_errors": {
                k: dict(zip(self.param_names, np.asarray(v, dtype=float).tolist()))
                for k, v in self.std_errors.items()
            },
            "options": self.options,
        }

    @classmethod
    def from_dict(cls, data):
        spec = DofcSpec.from_dict(data["spec"])
        _, params = params_from_dict(data["params"])
        names = natural_names(spec)
        ses = {k: np.array([v[nm] for nm in names]) for k, v in data.get("std_errors", {}).items()}
        return cls(
            spec=spec,
            params=params,
            loglik=data["loglik"],
            bic=data["bic"],
            n=data["n"],
            n_free=data["n_free"],
            converged=data["converged"],
            message=data.get("message", ""),
            trace=data.get("trace", []),
            std_errors=ses,
            options=data.get("options", {}),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, allow_nan=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_ml(spec, panel, init, options=None, **kwargs):
    """
    Maximum likelihood fit: EM to a relative tolerance, then BFGS.

    Parameters
    ----------
    spec : DofcSpec
    panel : array_like, shape (n, p)
    init : DofcParams
        Starting values; must pass :func:`fraccomp.model.validate`.
    options : FitOptions, optional
        Keyword arguments override individual option fields.

    Returns
    -------
    FitResult
        ``converged`` is false when EM hit its iteration cap without BFGS or
        BFGS stopped without meeting ``gtol``; the best iterate is returned.
    """
    options = options or FitOptions()
    if kwargs:
        options = FitOptions(**{**options.to_dict(), **kwargs})
    problems = validate(spec, init)
    if problems:
        raise InvalidArgumentError("invalid starting values: " + "; ".join(problems))
    model = LikelihoodModel(spec, panel)
    start = time.perf_counter()
    params = init
    ll = model.loglik(params)
    if not np.isfinite(ll):
        raise NumericalFailureError("log-likelihood not finite at the starting values")
    trace = [{"stage": "init", "iteration": 0, "loglik": ll}]
    em_converged = False
    for it in range(1, options.em_max_iter + 1):
        params, _, new_ll = em_iterate(spec, params, None, options, model, return_loglik=True)
        trace.append({"stage": "em", "iteration": it, "loglik": new_ll})
        change = abs(new_ll - ll) / max(1.0, abs(ll))
        ll = new_ll
        if change < options.em_tol:
            em_converged = True
            break
    converged, message = em_converged, "EM converged" if em_converged else "EM iteration cap"
    if options.quasi_newton and n_free(spec):
        qn_params, qn_ll, ok, msg = _quasi_newton(spec, model, params, options, trace)
        if qn_ll >= ll:
            params, ll = qn_params, qn_ll
        converged, message = ok, msg
    trace.append({"stage": "done", "iteration": len(trace), "loglik": ll,
                  "seconds": time.perf_counter() - start, "evaluations": model.n_evals})
    k = n_free(spec)
    return FitResult(
        spec=spec,
        params=params,
        loglik=float(ll),
        bic=float(bic(ll, model.n, model.p, k)),
        n=model.n,
        n_free=k,
        converged=converged,
        message=message,
        trace=trace,
        options=options.to_dict(),
    )


# ---------------------------------------------------------------------------
# standard errors


def _natural_jacobian(spec, theta, step=1e-6):
    base = natural_vector(spec, unpack(spec, theta))
    jac = np.empty((base.size, theta.size))
    for k in range(theta.size):
        e = step * (1.0 + abs(theta[k]))
        tp, tm = theta.copy(), theta.copy()
        tp[k] += e
        tm[k] -= e
        jac[:, k] = (natural_vector(spec, unpack(spec, tp)) - natural_vector(spec, unpack(spec, tm))) / (2 * e)
    return jac


def _hessian(spec, model, theta, rel_step=1e-4):
    """Hessian of the negative log-likelihood from central differences of the gradient."""
    k = theta.size
    hess = np.empty((k, k))
    for j in range(k):
        e = rel_step * (1.0 + abs(theta[j]))
        tp, tm = theta.copy(), theta.copy()
        tp[j] += e
        tm[j] -= e
        _, gp = loglik_gradient(spec, model, tp)
        _, gm = loglik_gradient(spec, model, tm)
        hess[:, j] = -(gp - gm) / (2 * e)
    return 0.5 * (hess + hess.T)


def _invert(spec, hess):
    w, v = np.linalg.eigh(hess)
    tol = 1e-10 * max(1.0, np.max(np.abs(w)))
    if np.any(w <= tol):
        names = natural_names(spec)
        bad = [names[int(np.argmax(np.abs(v[:, i])))] for i in np.flatnonzero(w <= tol)]
        raise DegenerateModelError(
            "Hessian not positive definite; weak directions dominated by: " + ", ".join(bad)
        )
    return (v / w) @ v.T


def score_contributions(spec, model, theta, rel_step=1e-5):
    """Per-period scores ``d loglik_t / d theta`` by central differences, shape (n, k)."""
    scores = np.empty((model.n, theta.size))
    for k in range(theta.size):
        e = rel_step * (1.0 + abs(theta[k]))
        tp, tm = theta.copy(), theta.copy()
        tp[k] += e
        tm[k] -= e
        scores[:, k] = (model.loglik_t(unpack(spec, tp)) - model.loglik_t(unpack(spec, tm))) / (2 * e)
    return scores


def std_errors(fit, panel, method="info", n_boot=100, rng=None, options=None):
    """
    Standard errors of the natural parameters (ordered as ``fit.param_names``).

    Parameters
    ----------
    fit : FitResult
    panel : array_like
        The estimation panel.
    method : {"info", "sandwich", "bootstrap"}
        ``info`` inverts a numerical Hessian; ``sandwich`` combines it with
        outer products of per-period scores; ``bootstrap`` refits on panels
        simulated from the fitted model.  Packed-scale covariances are mapped
        to natural parameters by the delta method.
    n_boot : int
        Bootstrap replications.
    rng : Generator or int, optional
    options : FitOptions, optional
        Options for bootstrap refits.

    Returns
    -------
    ndarray
        The result is also stored in ``fit.std_errors[method]``.
    """
    spec = fit.spec
    theta = pack(spec, fit.params)
    if method in ("info", "sandwich"):
        model = LikelihoodModel(spec, panel)
        hinv = _invert(spec, _hessian(spec, model, theta))
        if method == "info":
            cov = hinv
        else:
            s = score_contributions(spec, model, theta)
            cov = hinv @ (s.T @ s) @ hinv
        jac = _natural_jacobian(spec, theta)
        se = np.sqrt(np.clip(np.diag(jac @ cov @ jac.T), 0.0, None))
    elif method == "bootstrap":
        if n_boot < 2:
            raise InvalidArgumentError("bootstrap needs n_boot >= 2")
        rng = np.random.default_rng(rng)
        draws = []
        for b in range(int(n_boot)):
            sim = simulate_dofc(spec, fit.params, fit.n, rng)
            try:
                refit = fit_ml(spec, sim, fit.params, options)
            except FracCompError:
                continue
            draws.append(refit.estimates)
        if len(draws) < 2:
            raise NumericalFailureError("fewer than two bootstrap refits succeeded")
        se = np.std(np.array(draws), axis=0, ddof=1)
    else:
        raise InvalidArgumentError(f"unknown standard error method {method!r}")
    fit.std_errors[method] = se
    return se


# ---------------------------------------------------------------------------
# BIC search


def _neighbours(sizes, total_max):
    """All size vectors ``(s_0, s_1, ..., s_q)`` within one step of ``sizes``."""
    grids = [range(max(0 if j == 0 else 1, s - 1), s + 2) for j, s in enumerate(sizes)]
    out = []
    for combo in np.array(np.meshgrid(*grids, indexing="ij")).reshape(len(sizes), -1).T:
        if sum(combo) <= total_max:
            out.append(tuple(int(x) for x in combo))
    return out


def bic_search(panel, seed_spec, init_fn, options=None, max_rounds=20, on_fit=None):
    """
    Iterated local BIC search over component counts.

    Starting from ``seed_spec`` every specification with each ``s_j``
    (including ``s_0``) moved by at most one is fitted; the best BIC becomes
    the new centre until it no longer changes.

    Parameters
    ----------
    panel : array_like
    seed_spec : DofcSpec
    init_fn : callable
        ``init_fn(spec) -> DofcParams`` supplying starting values.
    options : FitOptions, optional
    on_fit : callable, optional
        Called with every ``(spec, FitResult or exception)``.

    Returns
    -------
    list of (DofcSpec, FitResult)
        Successful fits ranked by BIC (best first).
    """
    y = as_panel(panel, seed_spec.p)
    results, failures = {}, {}

    def fit_sizes(sizes):
        if sizes in results or sizes in failures:
            return
        spec = DofcSpec(
            p=seed_spec.p,
            group_sizes=sizes[1:],
            s0=sizes[0],
            ar_order=seed_spec.ar_order,
            include_constants=seed_spec.include_constants,
        )
        try:
            res = fit_ml(spec, y, init_fn(spec), options)
            results[sizes] = (spec, res)
        except FracCompError as exc:
            failures[sizes] = exc
            res = exc
        if on_fit is not None:
            on_fit(spec, res)

    centre = (seed_spec.s0,) + seed_spec.group_sizes
    for _ in range(max_rounds):
        for sizes in _neighbours(centre, seed_spec.p):
            fit_sizes(sizes)
        if not results:
            raise NumericalFailureError(
                "all candidate fits failed: "
                + "; ".join(f"{k}: {v}" for k, v in failures.items())
            )
        best = min(results, key=lambda k: results[k][1].bic)
        if best == centre:
            break
        centre = best
    return sorted(results.values(), key=lambda sr: sr[1].bic)
