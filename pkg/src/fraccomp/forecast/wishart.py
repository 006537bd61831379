"""
Conditional autoregressive Wishart benchmarks.

``X_t | past ~ Wishart(nu, S_t / nu)`` so that ``E[X_t | past] = S_t``.

* ``CawDiag``: ``S_t = CC' + sum_j B_j S_{t-j} B_j + sum_j A_j X_{t-j} A_j`` with
  diagonal ``A_j, B_j``; elementwise this is a linear recursion with
  coefficients ``a_i a_l`` and ``b_i b_l``.
* ``CawDcc``: ``S_t = H_t P_t H_t`` with univariate recursions for the
  variances ``H_ii,t^2`` and a scalar recursion for the correlation matrix
  ``P_t`` driven by realized correlations.

Intercepts are fixed by targeting sample means, and pre-sample values are
set to those targets.  Parameters are estimated by maximum likelihood.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter
from scipy.special import multigammaln

from ..exceptions import InvalidArgumentError, NumericalFailureError

__all__ = ["wishart_logpdf", "CawDiag", "CawDcc"]

_BAD = 1e10


def _stack(mats):
    x = np.asarray(getattr(mats, "mats", mats), dtype=float)
    if x.ndim != 3 or x.shape[1] != x.shape[2]:
        raise InvalidArgumentError("need a stack of square matrices")
    return x


def wishart_logpdf(x, nu, scale_mean):
    """
    Log density of ``Wishart(nu, S / nu)`` at ``x`` for one matrix or a stack.

    Parameters
    ----------
    x : ndarray, shape (k, k) or (n, k, k)
    nu : float
        Degrees of freedom, ``nu > k - 1``.
    scale_mean : ndarray, shape like ``x``
        Conditional mean ``S``.
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(scale_mean, dtype=float)
    single = x.ndim == 2
    if single:
        x, s = x[None], s[None]
    k = x.shape[-1]
    if nu <= k - 1:
        raise InvalidArgumentError("degrees of freedom must exceed k - 1")
    ls = np.linalg.cholesky(s)
    logdet_s = 2.0 * np.sum(np.log(np.diagonal(ls, axis1=1, axis2=2)), axis=1)
    _, logdet_x = np.linalg.slogdet(x)
    # tr(S^-1 X) via the Cholesky factor of S
    m = np.linalg.solve(ls, x)
    m = np.linalg.solve(ls, np.swapaxes(m, 1, 2))
    tr = np.trace(m, axis1=1, axis2=2)
    out = (0.5 * (nu - k - 1) * logdet_x - 0.5 * nu * tr
           - 0.5 * nu * (logdet_s - k * np.log(nu)) - 0.5 * nu * k * np.log(2.0)
           - multigammaln(0.5 * nu, k))
    return float(out[0]) if single else out


def _recursion(z, alpha, beta):
    """``g_t = sum_j beta_j g_{t-j} + sum_j alpha_j z_{t-j}`` with zero pre-sample."""
    return lfilter(np.r_[0.0, alpha], np.r_[1.0, -np.asarray(beta)], z, axis=0)


def _nu_from(u, k):
    return k - 1.0 + np.exp(u)


@dataclass
class CawDiag:
    """
    Diagonal CAW(p, q) model.

    Attributes (after :meth:`fit`)
    ------------------------------
    a : ndarray, shape (q, k)
    b : ndarray, shape (p, k)
    nu : float
    target : ndarray, shape (k, k)
        Sample mean used for targeting.
    loglik : float
    converged : bool
    """

    p: int = 2
    q: int = 1
    a: np.ndarray = None
    b: np.ndarray = None
    nu: float = None
    target: np.ndarray = None
    loglik: float = np.nan
    converged: bool = False

    def _coefficients(self, a, b):
        alpha = np.einsum("ji,jl->jil", a, a)
        beta = np.einsum("ji,jl->jil", b, b)
        return alpha, beta

    def means(self, mats, a=None, b=None, target=None):
        """Conditional means ``S_1, ..., S_n`` (and ``S_{n+1}``) given ``X_1, ..., X_n``."""
        x = _stack(mats)
        a = self.a if a is None else a
        b = self.b if b is None else b
        target = self.target if target is None else target
        alpha, beta = self._coefficients(a, b)
        k = x.shape[1]
        z = np.concatenate([x - target, np.zeros((1, k, k))])
        g = np.empty_like(z)
        flat_z = z.reshape(z.shape[0], -1)
        flat_g = g.reshape(g.shape[0], -1)
        al = alpha.reshape(self.q, -1)
        be = beta.reshape(self.p, -1)
        for e in range(k * k):
            flat_g[:, e] = _recursion(flat_z[:, e], al[:, e], be[:, e])
        return target + g

    def _negll(self, theta, x):
        k = x.shape[1]
        a = theta[: self.q * k].reshape(self.q, k)
        b = theta[self.q * k : (self.q + self.p) * k].reshape(self.p, k)
        nu = _nu_from(theta[-1], k)
        if np.any(np.sum(a * a, axis=0) + np.sum(b * b, axis=0) >= 0.999):
            return _BAD
        alpha, beta = self._coefficients(a, b)
        omega = self.target * (1.0 - alpha.sum(axis=0) - beta.sum(axis=0))
        try:
            np.linalg.cholesky(omega)
            s = self.means(x, a, b)[:-1]
            ll = wishart_logpdf(x, nu, s).sum()
        except np.linalg.LinAlgError:
            return _BAD
        return -ll / x.shape[0] if np.isfinite(ll) else _BAD

    def fit(self, mats, warm=True):
        """Maximum likelihood with mean targeting; returns ``self``."""
        x = _stack(mats)
        k = x.shape[1]
        self.target = x.mean(axis=0)
        if warm and self.a is not None and self.a.shape == (self.q, k):
            theta0 = np.r_[self.a.ravel(), self.b.ravel(), np.log(self.nu - k + 1.0)]
        else:
            a0 = np.full((self.q, k), np.sqrt(0.3 / self.q))
            b0 = np.full((self.p, k), np.sqrt(0.6 / self.p))
            theta0 = np.r_[a0.ravel(), b0.ravel(), np.log(10.0)]
        bounds = [(0.0, 0.999)] * ((self.p + self.q) * k) + [(-5.0, 8.0)]
        res = minimize(self._negll, theta0, args=(x,), method="L-BFGS-B", bounds=bounds)
        if res.fun >= _BAD:
            raise NumericalFailureError("CAW likelihood could not be evaluated")
        self.a = res.x[: self.q * k].reshape(self.q, k)
        self.b = res.x[self.q * k : (self.q + self.p) * k].reshape(self.p, k)
        self.nu = float(_nu_from(res.x[-1], k))
        self.loglik = float(-res.fun * x.shape[0])
        self.converged = bool(res.success)
        return self

    def forecast(self, mats, horizon):
        """
        Iterated conditional means ``E[X_{n+h} | X_1..X_n]``, ``h = 1..horizon``.

        Returns
        -------
        ndarray, shape (horizon, k, k)
        """
        if self.a is None:
            raise InvalidArgumentError("model has not been fitted")
        horizon = int(horizon)
        if horizon < 1:
            raise InvalidArgumentError("forecast horizon must be >= 1")
        x = _stack(mats)
        s = self.means(x)
        alpha, beta = self._coefficients(self.a, self.b)
        # deviations from the target; future X replaced by its conditional mean
        gx = list(x - self.target)
        gs = list(s - self.target)
        out = [s[-1]]
        gx.append(gs[-1])
        for _ in range(1, horizon):
            g = sum(beta[j] * gs[-1 - j] for j in range(self.p))
            g = g + sum(alpha[j] * gx[-1 - j] for j in range(self.q))
            gs.append(g)
            gx.append(g)
            out.append(self.target + g)
        return np.array(out)


def realized_correlations(x):
    sd = np.sqrt(np.diagonal(x, axis1=1, axis2=2))
    return x / (sd[:, :, None] * sd[:, None, :])


@dataclass
class CawDcc:
    """
    CAW with realized GARCH variances and a scalar correlation recursion.

    ``H_ii,t^2 = c_i + sum_j bv_ij H_ii,t-j^2 + sum_j av_ij X_ii,t-j`` and
    ``P_t = Pbar + sum_j bc_j P_{t-j} + sum_j ac_j R_{t-j}``.  Targeting fixes
    ``c_i`` and ``Pbar`` so that the unconditional means equal the sample
    means of ``X_ii,t`` and ``R_t``.  Multi-step correlation forecasts
    replace future ``R`` by ``P``.
    """

    pv: int = 2
    qv: int = 1
    pc: int = 2
    qc: int = 1
    av: np.ndarray = None
    bv: np.ndarray = None
    ac: np.ndarray = None
    bc: np.ndarray = None
    nu: float = None
    var_target: np.ndarray = None
    corr_target: np.ndarray = None
    loglik: float = np.nan
    converged: bool = False

    def _split(self, theta, k):
        pos = 0
        out = []
        for shape in [(self.qv, k), (self.pv, k), (self.qc,), (self.pc,)]:
            size = int(np.prod(shape))
            out.append(theta[pos : pos + size].reshape(shape))
            pos += size
        return out

    def means(self, mats, av=None, bv=None, ac=None, bc=None):
        """Conditional means ``S_1, ..., S_{n+1}``."""
        x = _stack(mats)
        av = self.av if av is None else av
        bv = self.bv if bv is None else bv
        ac = self.ac if ac is None else ac
        bc = self.bc if bc is None else bc
        n, k = x.shape[0], x.shape[1]
        var = np.diagonal(x, axis1=1, axis2=2)
        zv = np.vstack([var - self.var_target, np.zeros((1, k))])
        h2 = np.empty_like(zv)
        for i in range(k):
            h2[:, i] = self.var_target[i] + _recursion(zv[:, i], av[:, i], bv[:, i])
        r = realized_correlations(x)
        zc = np.concatenate([r - self.corr_target, np.zeros((1, k, k))])
        pc = self.corr_target + _recursion(zc, ac, bc)
        sd = np.sqrt(np.clip(h2, 1e-300, None))
        return pc * sd[:, :, None] * sd[:, None, :], h2, pc

    def _negll(self, theta, x):
        k = x.shape[1]
        av, bv, ac, bc = self._split(theta[:-1], k)
        nu = _nu_from(theta[-1], k)
        if np.any(av.sum(axis=0) + bv.sum(axis=0) >= 0.999) or ac.sum() + bc.sum() >= 0.999:
            return _BAD
        s, h2, _ = self.means(x, av, bv, ac, bc)
        if np.any(h2 <= 0):
            return _BAD
        try:
            ll = wishart_logpdf(x, nu, s[:-1]).sum()
        except np.linalg.LinAlgError:
            return _BAD
        return -ll / x.shape[0] if np.isfinite(ll) else _BAD

    def fit(self, mats, warm=True):
        """Maximum likelihood with variance and correlation targeting; returns ``self``."""
        x = _stack(mats)
        k = x.shape[1]
        self.var_target = np.diagonal(x, axis1=1, axis2=2).mean(axis=0)
        self.corr_target = realized_correlations(x).mean(axis=0)
        if warm and self.av is not None and self.av.shape == (self.qv, k):
            theta0 = np.r_[self.av.ravel(), self.bv.ravel(), self.ac, self.bc,
                           np.log(self.nu - k + 1.0)]
        else:
            theta0 = np.r_[np.full(self.qv * k, 0.3 / self.qv), np.full(self.pv * k, 0.6 / self.pv),
                           np.full(self.qc, 0.3 / self.qc), np.full(self.pc, 0.6 / self.pc),
                           np.log(10.0)]
        n_coef = theta0.size - 1
        bounds = [(0.0, 0.999)] * n_coef + [(-5.0, 8.0)]
        res = minimize(self._negll, theta0, args=(x,), method="L-BFGS-B", bounds=bounds)
        if res.fun >= _BAD:
            raise NumericalFailureError("CAW-DCC likelihood could not be evaluated")
        self.av, self.bv, self.ac, self.bc = self._split(res.x[:-1], k)
        self.nu = float(_nu_from(res.x[-1], k))
        self.loglik = float(-res.fun * x.shape[0])
        self.converged = bool(res.success)
        return self

    def forecast(self, mats, horizon):
        """Iterated conditional means, shape ``(horizon, k, k)``."""
        if self.av is None:
            raise InvalidArgumentError("model has not been fitted")
        horizon = int(horizon)
        if horizon < 1:
            raise InvalidArgumentError("forecast horizon must be >= 1")
        x = _stack(mats)
        _, h2, pc = self.means(x)
        var = np.diagonal(x, axis1=1, axis2=2)
        r = realized_correlations(x)
        gv_s = list(h2 - self.var_target)
        gv_x = list(var - self.var_target) + [gv_s[-1]]
        gc_s = list(pc - self.corr_target)
        gc_x = list(r - self.corr_target) + [gc_s[-1]]
        out = []
        for step in range(horizon):
            if step:
                gv = sum(self.bv[j] * gv_s[-1 - j] for j in range(self.pv))
                gv = gv + sum(self.av[j] * gv_x[-1 - j] for j in range(self.qv))
                gc = sum(self.bc[j] * gc_s[-1 - j] for j in range(self.pc))
                gc = gc + sum(self.ac[j] * gc_x[-1 - j] for j in range(self.qc))
                gv_s.append(gv)
                gv_x.append(gv)
                gc_s.append(gc)
                gc_x.append(gc)
            sd = np.sqrt(self.var_target + gv_s[-1])
            out.append((self.corr_target + gc_s[-1]) * np.outer(sd, sd))
        return np.array(out)
