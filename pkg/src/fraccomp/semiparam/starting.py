"""
Starting values for DOFC estimation and the full specification pipeline.

Components are scaled to unit innovation variance, the panel is regressed on
them by OLS, and the loadings of every group are rotated so that their top
block is lower triangular (the model is invariant to orthogonal rotations
within a group of equal memory).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr

from .. import _arma
from ..exceptions import DegenerateModelError, InvalidArgumentError
from ..fracdiff import frac_diff
from ..model import DofcParams, DofcSpec, validate
from .dimension import dimension_test
from .doc import doc_rotation
from .grouping import memory_grouping
from .whittle import default_bandwidth, elw_estimate, mean_weight

__all__ = [
    "fit_ar",
    "lower_triangular_rotation",
    "assign_components",
    "starting_values",
    "SpecificationReport",
    "specify",
    "initial_params",
]


def fit_ar(x, k):
    """
    Least-squares AR(k) fit of a demeaned series.

    Returns
    -------
    phi : ndarray
        Coefficients (``1 - phi_1 L - ...`` convention), shrunk to be stable.
    sigma : float
        Innovation standard deviation.
    """
    x = np.asarray(x, dtype=float)
    xc = x - x.mean()
    n = xc.size
    if n <= 2 * k + 2:
        raise InvalidArgumentError("series too short for the AR order")
    design = np.column_stack([xc[k - j : n - j] for j in range(1, k + 1)])
    phi, *_ = np.linalg.lstsq(design, xc[k:], rcond=None)
    resid = xc[k:] - design @ phi
    r = _arma.ar_to_pacf(phi)
    if not np.all(np.isfinite(r)) or np.any(np.abs(r) >= 0.98):
        r = np.clip(np.nan_to_num(r, nan=0.0), -0.98, 0.98)
        phi = _arma.pacf_to_ar(r)
        resid = xc[k:] - design @ phi
    return phi, float(np.sqrt(np.mean(resid**2)))


def lower_triangular_rotation(block):
    """
    Orthogonal ``Q`` such that ``block @ Q`` has a lower-triangular top square
    block with non-negative diagonal.
    """
    block = np.asarray(block, dtype=float)
    s = block.shape[1]
    q, r = qr(block[:s].T)
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return q * signs


def _fractional_innovation_scale(x, d):
    w = mean_weight(d)
    mu = w * x.mean() + (1.0 - w) * x[0]
    xi = frac_diff(x - mu, d)
    return x - mu, float(np.std(xi))


def assign_components(d_hats, spec):
    """
    Map components to model columns: the ``s`` with the largest ``d_hat``
    fill the fractional groups in order, the ``s0`` with the smallest
    remaining ``d_hat`` become short-memory components.

    Returns
    -------
    frac_idx, ar_idx : ndarray of int
    """
    d = np.asarray(d_hats, dtype=float)
    if d.size < spec.s + spec.s0:
        raise InvalidArgumentError(
            f"{d.size} components cannot fill s + s0 = {spec.s + spec.s0} columns"
        )
    order = np.argsort(-d, kind="stable")
    frac_idx = order[: spec.s]
    ar_idx = order[::-1][: spec.s0][::-1] if spec.s0 else np.zeros(0, dtype=int)
    return frac_idx, ar_idx


def starting_values(panel, components, spec, d_hats, group_d=None):
    """
    Starting values from estimated orthogonal components.

    Parameters
    ----------
    panel : array_like, shape (n, p)
    components : array_like, shape (n, r)
        Estimated dynamic orthogonal components (levels).
    spec : DofcSpec
    d_hats : array_like, shape (r,)
        Memory estimates of the components.
    group_d : array_like, optional
        Memory per group; defaults to group means of ``d_hats``.

    Returns
    -------
    DofcParams
        Always passes :func:`fraccomp.model.validate`.
    """
    y = np.asarray(getattr(panel, "values", panel), dtype=float)
    comp = np.asarray(components, dtype=float)
    if comp.ndim == 1:
        comp = comp[:, None]
    n, p = y.shape
    if p != spec.p:
        raise InvalidArgumentError("panel width does not match spec")
    if comp.shape[0] != n:
        raise InvalidArgumentError("components and panel differ in length")
    d_hats = np.asarray(d_hats, dtype=float)
    frac_idx, ar_idx = assign_components(d_hats, spec)

    # group memory: means of member estimates, forced positive and descending
    if group_d is None:
        group_d = [d_hats[frac_idx[sl]].mean() for sl in spec.group_slices]
    d = np.array(group_d, dtype=float)
    for j in range(spec.q - 1, -1, -1):
        floor = 0.05 if j == spec.q - 1 else d[j + 1] + 0.05
        d[j] = min(max(d[j], floor), 1.45 - 0.05 * j)

    regs = []
    for col in range(spec.s):
        j = spec.component_orders[col]
        centred, scale = _fractional_innovation_scale(comp[:, frac_idx[col]], d[j])
        regs.append(centred / scale)
    phi = np.zeros((spec.s0, spec.ar_order if spec.s0 else 0))
    for col in range(spec.s0):
        z = comp[:, ar_idx[col]]
        phi[col], sigma = fit_ar(z, spec.ar_order)
        regs.append((z - z.mean()) / sigma)
    x = np.column_stack(regs) if regs else np.zeros((n, 0))
    design = np.column_stack([np.ones(n), x]) if spec.include_constants else x
    obs = ~np.isnan(y)
    coef = np.zeros((design.shape[1], p))
    h = np.empty(p)
    for i in range(p):
        rows = obs[:, i]
        if design.shape[1]:
            xd = design[rows]
            if np.linalg.cond(xd) > 1e10:
                raise DegenerateModelError("components are collinear")
            coef[:, i], *_ = np.linalg.lstsq(xd, y[rows, i], rcond=None)
            resid = y[rows, i] - xd @ coef[:, i]
        else:
            resid = y[rows, i]
        h[i] = max(np.mean(resid**2), 1e-6 * max(np.var(y[rows, i]), 1e-12))
    off = 1 if spec.include_constants else 0
    c = coef[0] if spec.include_constants else np.zeros(p)
    load = coef[off:].T
    lam = load[:, : spec.s].copy()
    gamma = load[:, spec.s :].copy()
    for sl in spec.group_slices:
        lam[:, sl] = lam[:, sl] @ lower_triangular_rotation(lam[:, sl])
        top = lam[: sl.stop - sl.start, sl]
        lam[: sl.stop - sl.start, sl] = np.tril(top)
    if spec.s0:
        gamma = gamma @ lower_triangular_rotation(gamma)
        gamma[: spec.s0] = np.tril(gamma[: spec.s0])
    params = DofcParams(d=d, lam=lam, gamma=gamma, phi=phi, h=h, c=c)
    problems = validate(spec, params)
    if problems:
        raise DegenerateModelError("starting values invalid: " + "; ".join(problems))
    return params


@dataclass
class SpecificationReport:
    """Result of :func:`specify`; ``to_dict`` gives the JSON report."""

    n_whitenoise: int
    dimension_pvalues: list
    rotation: np.ndarray
    d_hats: np.ndarray
    bandwidth: int
    grouping: object
    spec: DofcSpec
    start: DofcParams
    components: np.ndarray
    doc: object = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        from ..model import params_to_dict

        out = {
            "n_whitenoise": self.n_whitenoise,
            "dimension_pvalues": [float(v) for v in self.dimension_pvalues],
            "rotation": np.asarray(self.rotation).tolist(),
            "d_hats": np.asarray(self.d_hats).tolist(),
            "bandwidth": self.bandwidth,
            "spec": self.spec.to_dict(),
            "starting_values": params_to_dict(self.start),
            "notes": list(self.notes),
        }
        if self.grouping is not None:
            g = self.grouping
            out["grouping"] = {
                "groups": [[int(i) for i in grp] for grp in g.groups],
                "d_groups": np.asarray(g.d_groups).tolist(),
                "j_star": g.j_star,
                "pvalue": g.pvalue,
                "zero_memory_pvalue": g.zero_memory_pvalue,
            }
        if self.doc is not None:
            out["doc"] = {
                "stat_before": self.doc.stat_before,
                "stat_after": self.doc.stat_after,
                "df": self.doc.df,
                "pvalue_before": self.doc.pvalue_before,
                "pvalue_after": self.doc.pvalue_after,
                "critical_value_01": self.doc.critical_value(0.01),
                "converged": self.doc.converged,
            }
        return out


def specify(panel, lags=3, alpha=0.05, m=None, doc_lags=3, in_levels=True,
            ar_order=1, include_constants=True, rng=0):
    """
    Semiparametric specification: dynamic dimension, orthogonal components,
    memory estimates, memory groups and starting values.

    The last memory group becomes the short-memory block when the hypothesis
    of zero memory is not rejected at ``alpha``.

    Parameters
    ----------
    panel : array_like, shape (n, p)
    lags : int
        Lag bound of the dimension test.
    alpha : float
        Level used by the dimension, grouping and zero-memory tests.
    m : int, optional
        ELW bandwidth; defaults to ``floor(n ** 0.5)``.
    doc_lags : int
        Lag bound of the orthogonal-components rotation.

    Returns
    -------
    SpecificationReport
    """
    y = np.asarray(getattr(panel, "values", panel), dtype=float)
    n, p = y.shape
    rng = np.random.default_rng(rng)
    dim = dimension_test(y, lags=lags, alpha=alpha, rng=rng)
    r = dim.n_factors
    notes = []
    m = default_bandwidth(n) if m is None else int(m)
    if r == 0:
        spec = DofcSpec(p=p, group_sizes=(), s0=0, ar_order=ar_order,
                        include_constants=include_constants)
        start = starting_values(y, np.zeros((n, 0)), spec, np.zeros(0))
        notes.append("no dynamic components detected")
        return SpecificationReport(dim.n_whitenoise, dim.pvalues, dim.rotation, np.zeros(0),
                                   m, None, spec, start, np.zeros((n, 0)), None, notes)
    factors = (y - dim.mean) @ dim.factor_loadings
    doc = None
    if r >= 2:
        doc = doc_rotation(factors, lags=doc_lags, in_levels=in_levels, rng=rng)
        components = doc.components
    else:
        components = factors / factors.std()
    d_hats = np.array([elw_estimate(components[:, i], m).d_hat for i in range(r)])
    grouping = memory_grouping(d_hats, m, alpha=alpha)
    sizes = list(grouping.sizes)
    group_d = list(grouping.d_groups)
    s0 = 0
    if grouping.zero_memory_pvalue >= alpha or group_d[-1] <= 0:
        s0 = sizes.pop()
        group_d.pop()
        notes.append("last memory group treated as short memory")
    spec = DofcSpec(p=p, group_sizes=tuple(sizes), s0=s0, ar_order=ar_order,
                    include_constants=include_constants)
    start = starting_values(y, components, spec, d_hats, group_d=group_d or None)
    return SpecificationReport(dim.n_whitenoise, dim.pvalues, dim.rotation, d_hats, m,
                               grouping, spec, start, components, doc, notes)


def initial_params(panel, spec, lags=3, doc_lags=3, in_levels=True, m=None, rng=0):
    """
    Starting values for a given model size.

    Extracts ``p - s - s0`` white-noise combinations, rotates the remaining
    factors into orthogonal components and builds starting values with
    :func:`starting_values`.  Useful when the specification is fixed in
    advance (BIC search, rolling re-estimation).

    Returns
    -------
    DofcParams
    """
    y = np.asarray(getattr(panel, "values", panel), dtype=float)
    n, p = y.shape
    r = spec.s + spec.s0
    if r == 0:
        return starting_values(y, np.zeros((n, 0)), spec, np.zeros(0))
    rng = np.random.default_rng(rng)
    dim = dimension_test(y, lags=lags, rng=rng, n_whitenoise=p - r)
    factors = (y - dim.mean) @ dim.factor_loadings
    if r >= 2:
        components = doc_rotation(factors, lags=doc_lags, in_levels=in_levels, rng=rng).components
    else:
        components = factors / factors.std()
    m = default_bandwidth(n) if m is None else int(m)
    d_hats = np.array([elw_estimate(components[:, i], m).d_hat for i in range(r)])
    return starting_values(y, components, spec, d_hats)
