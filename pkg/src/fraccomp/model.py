"""
Dynamic orthogonal fractional components (DOFC) model.

The observation equation is

    y_t = c + Lambda^(1) x_t^(1) + ... + Lambda^(q) x_t^(q) + Gamma z_t + eps_t,

where each group ``x^(j)`` holds ``s_j`` independent type-II fractionally
integrated noises of common order ``d_j`` (unit innovation variance), ``z_t``
holds ``s0`` independent AR(k) processes with unit innovation variance and
``eps_t ~ N(0, diag(h))``.  Loadings within every group, and in ``Gamma``,
are lower triangular (``[r, l] = 0`` for ``r < l``).

This module also converts loadings into the cointegration representations
(cointegration subspaces, fractional VECM projections, triangular system).
"""

from dataclasses import dataclass, field
import json

import numpy as np
import scipy.linalg

from . import _arma
from .exceptions import (
    DegenerateModelError,
    InvalidArgumentError,
    UnsupportedRepresentationError,
)
from .fracdiff import frac_diff, frac_integrate, frac_lag

__all__ = [
    "DofcSpec",
    "DofcParams",
    "VecmForm",
    "TriangularForm",
    "validate",
    "n_free",
    "pack",
    "unpack",
    "natural_vector",
    "natural_names",
    "lambda_mask",
    "gamma_mask",
    "orth_complement",
    "coint_subspaces",
    "vecm_form",
    "triangular_form",
    "simulate_dofc",
    "params_to_dict",
    "params_from_dict",
    "save_params",
    "load_params",
]


@dataclass(frozen=True)
class DofcSpec:
    """Structural specification of a DOFC model.

    Parameters
    ----------
    p : int
        Observation dimension.
    group_sizes : tuple of int
        ``(s_1, ..., s_q)``, sizes of the fractional groups ordered by
        decreasing memory.
    s0 : int
        Number of short-memory AR components.
    ar_order : int
        AR order ``k`` of every short-memory component.
    include_constants : bool
        Whether the observation equation carries constants ``c``.
    """

    p: int
    group_sizes: tuple = ()
    s0: int = 0
    ar_order: int = 1
    include_constants: bool = True

    def __post_init__(self):
        object.__setattr__(self, "group_sizes", tuple(int(s) for s in self.group_sizes))
        if self.p < 1:
            raise InvalidArgumentError("p must be positive")
        if any(s < 1 for s in self.group_sizes):
            raise InvalidArgumentError("every fractional group needs at least one component")
        if self.s0 < 0:
            raise InvalidArgumentError("s0 must be non-negative")
        if self.s + self.s0 > self.p:
            raise InvalidArgumentError(
                f"s + s0 = {self.s + self.s0} exceeds p = {self.p}"
            )
        if self.s0 > 0 and self.ar_order < 1:
            raise InvalidArgumentError("ar_order must be >= 1 when s0 > 0")

    @property
    def q(self):
        return len(self.group_sizes)

    @property
    def s(self):
        return int(sum(self.group_sizes))

    @property
    def group_slices(self):
        """Column slices of ``lambda`` belonging to each group."""
        bounds = np.cumsum((0,) + self.group_sizes)
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    @property
    def component_orders(self):
        """Group index of every fractional column."""
        return np.repeat(np.arange(self.q), self.group_sizes)

    def to_dict(self):
        return {
            "p": self.p,
            "group_sizes": list(self.group_sizes),
            "s0": self.s0,
            "ar_order": self.ar_order,
            "include_constants": self.include_constants,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            p=int(data["p"]),
            group_sizes=tuple(data.get("group_sizes", ())),
            s0=int(data.get("s0", 0)),
            ar_order=int(data.get("ar_order", 1)),
            include_constants=bool(data.get("include_constants", True)),
        )


def _frozen(a, shape):
    a = np.array(a, dtype=float).reshape(shape)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DofcParams:
    """Parameter values of a DOFC model; arrays are read-only after construction."""

    d: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray
    h: np.ndarray
    c: np.ndarray = field(default=None)

    def __post_init__(self):
        d = np.atleast_1d(np.array(self.d, dtype=float))
        lam = np.array(self.lam, dtype=float)
        h = np.atleast_1d(np.array(self.h, dtype=float))
        p = h.shape[0]
        if lam.size == 0:
            lam = lam.reshape(p, 0)
        gamma = np.array(self.gamma, dtype=float)
        if gamma.size == 0:
            gamma = gamma.reshape(p, 0)
        phi = np.array(self.phi, dtype=float)
        if phi.ndim == 1:
            phi = phi.reshape(gamma.shape[1], -1) if gamma.shape[1] else phi.reshape(0, 0)
        c = np.zeros(p) if self.c is None else np.atleast_1d(np.array(self.c, dtype=float))
        object.__setattr__(self, "d", _frozen(d, d.shape))
        object.__setattr__(self, "lam", _frozen(lam, lam.shape))
        object.__setattr__(self, "gamma", _frozen(gamma, gamma.shape))
        object.__setattr__(self, "phi", _frozen(phi, phi.shape))
        object.__setattr__(self, "h", _frozen(h, h.shape))
        object.__setattr__(self, "c", _frozen(c, c.shape))

    def replace(self, **changes):
        values = {k: getattr(self, k) for k in ("d", "lam", "gamma", "phi", "h", "c")}
        values.update(changes)
        return DofcParams(**values)


def _check_dims(spec, params):
    p = spec.p
    expected = {
        "d": (spec.q,),
        "lam": (p, spec.s),
        "gamma": (p, spec.s0),
        "h": (p,),
        "c": (p,),
    }
    for name, shape in expected.items():
        actual = getattr(params, name).shape
        if actual != shape:
            raise InvalidArgumentError(f"{name} has shape {actual}, expected {shape}")
    if spec.s0 == 0:
        if params.phi.size:
            raise InvalidArgumentError("phi must be empty when s0 = 0")
    elif params.phi.shape != (spec.s0, spec.ar_order):
        raise InvalidArgumentError(
            f"phi has shape {params.phi.shape}, expected {(spec.s0, spec.ar_order)}"
        )


def lambda_mask(spec):
    """Boolean ``p x s`` mask of free fractional loadings."""
    mask = np.zeros((spec.p, spec.s), dtype=bool)
    for sl in spec.group_slices:
        for local, col in enumerate(range(sl.start, sl.stop)):
            mask[local:, col] = True
    return mask


def gamma_mask(spec):
    """Boolean ``p x s0`` mask of free short-memory loadings."""
    mask = np.zeros((spec.p, spec.s0), dtype=bool)
    for col in range(spec.s0):
        mask[col:, col] = True
    return mask


def validate(spec, params):
    """
    List every violated model restriction.

    Returns
    -------
    list of str
        Empty when ``params`` satisfies all identification and stability
        restrictions of ``spec``.

    Raises
    ------
    InvalidArgumentError
        If array dimensions do not conform to ``spec``.
    """
    _check_dims(spec, params)
    problems = []
    d = params.d
    if not np.all(np.isfinite(d)):
        problems.append("memory parameter not finite")
    elif spec.q:
        if np.any(d <= 0):
            problems.append("memory parameter not positive")
        if np.any(np.diff(d) >= 0):
            problems.append("memory parameters not strictly descending")
    for j, sl in enumerate(spec.group_slices):
        block = params.lam[:, sl]
        if np.any(np.triu(block[: block.shape[1]], k=1) != 0):
            problems.append(f"upper-triangle loading nonzero in group {j + 1}")
    if spec.s0 and np.any(np.triu(params.gamma[: spec.s0], k=1) != 0):
        problems.append("upper-triangle short-memory loading nonzero")
    if not (np.all(np.isfinite(params.lam)) and np.all(np.isfinite(params.gamma))):
        problems.append("loadings not finite")
    for i in range(spec.s0):
        if not np.all(np.isfinite(params.phi[i])) or not _arma.ar_is_stable(params.phi[i]):
            problems.append(f"AR polynomial of short-memory component {i + 1} not stable")
    if not np.all(params.h > 0):
        problems.append("measurement noise variance not positive")
    if not np.all(np.isfinite(params.c)):
        problems.append("constants not finite")
    elif not spec.include_constants and np.any(params.c != 0):
        problems.append("constants nonzero while include_constants is false")
    return problems


def n_free(spec):
    """Number of free parameters (length of the packed vector)."""
    return int(
        spec.q
        + lambda_mask(spec).sum()
        + gamma_mask(spec).sum()
        + spec.s0 * spec.ar_order
        + spec.p
        + (spec.p if spec.include_constants else 0)
    )


def pack(spec, params):
    """
    Map parameters to an unconstrained real vector.

    Memory parameters use ``d_q = softplus(t_q)`` and
    ``d_j = d_{j+1} + softplus(t_j)``; AR coefficients go through partial
    autocorrelations; noise variances through ``log``.
    """
    problems = validate(spec, params)
    if problems:
        raise InvalidArgumentError("cannot pack invalid parameters: " + "; ".join(problems))
    d = params.d
    gaps = np.append(d[:-1] - d[1:], d[-1:]) if spec.q else np.zeros(0)
    parts = [
        _arma.inv_softplus(gaps),
        params.lam.T[lambda_mask(spec).T],
        params.gamma.T[gamma_mask(spec).T],
    ]
    for i in range(spec.s0):
        parts.append(_arma.from_unit_interval(_arma.ar_to_pacf(params.phi[i])))
    parts.append(np.log(params.h))
    if spec.include_constants:
        parts.append(params.c)
    return np.concatenate([np.atleast_1d(np.asarray(x, dtype=float)) for x in parts])


def unpack(spec, theta):
    """Inverse of :func:`pack`; every real vector maps to valid parameters."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n_free(spec),):
        raise InvalidArgumentError(
            f"packed vector has length {theta.size}, expected {n_free(spec)}"
        )
    pos = 0

    def take(k):
        nonlocal pos
        out = theta[pos : pos + k]
        pos += k
        return out

    gaps = _arma.softplus(take(spec.q))
    d = np.cumsum(gaps[::-1])[::-1]
    lmask = lambda_mask(spec)
    lam = np.zeros((spec.s, spec.p))
    lam[lmask.T] = take(int(lmask.sum()))
    gmask = gamma_mask(spec)
    gamma = np.zeros((spec.s0, spec.p))
    gamma[gmask.T] = take(int(gmask.sum()))
    phi = np.zeros((spec.s0, spec.ar_order if spec.s0 else 0))
    for i in range(spec.s0):
        phi[i] = _arma.pacf_to_ar(_arma.to_unit_interval(take(spec.ar_order)))
    h = np.exp(take(spec.p))
    c = take(spec.p) if spec.include_constants else np.zeros(spec.p)
    return DofcParams(d=d, lam=lam.T, gamma=gamma.T, phi=phi, h=h, c=c)


def natural_vector(spec, params):
    """Free parameters on their natural scale, ordered as :func:`natural_names`."""
    parts = [
        params.d,
        params.lam.T[lambda_mask(spec).T],
        params.gamma.T[gamma_mask(spec).T],
        params.phi.ravel(),
        params.h,
    ]
    if spec.include_constants:
        parts.append(params.c)
    return np.concatenate(parts)


def natural_names(spec):
    """Labels for :func:`natural_vector` entries (1-based indices)."""
    names = [f"d{j + 1}" for j in range(spec.q)]
    lmask = lambda_mask(spec)
    for col in range(spec.s):
        names += [f"lambda[{r + 1},{col + 1}]" for r in range(spec.p) if lmask[r, col]]
    gmask = gamma_mask(spec)
    for col in range(spec.s0):
        names += [f"gamma[{r + 1},{col + 1}]" for r in range(spec.p) if gmask[r, col]]
    for i in range(spec.s0):
        names += [f"phi[{i + 1},{k + 1}]" for k in range(spec.ar_order)]
    names += [f"h{i + 1}" for i in range(spec.p)]
    if spec.include_constants:
        names += [f"c{i + 1}" for i in range(spec.p)]
    return names


# ---------------------------------------------------------------------------
# cointegration representations


def orth_complement(a, tol=1e-10):
    """Orthonormal basis of the orthogonal complement of ``sp(a)``.

    Raises
    ------
    DegenerateModelError
        If ``a`` does not have full column rank.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    p, k = a.shape
    if k == 0:
        return np.eye(p)
    q, r = np.linalg.qr(a, mode="complete")
    diag = np.abs(np.diag(r[:k, :k]))
    if diag.min() <= tol * max(1.0, diag.max()):
        raise DegenerateModelError("loading matrix is rank deficient")
    return q[:, k:]


def coint_subspaces(lam, group_sizes):
    """
    Orthonormal bases of the nested cointegration subspaces.

    Element ``j - 1`` spans the orthogonal complement of the first ``j``
    loading groups, so later bases lie inside earlier ones.
    """
    lam = np.asarray(lam, dtype=float)
    bounds = np.cumsum(group_sizes)
    if bounds[-1] != lam.shape[1]:
        raise InvalidArgumentError("group sizes do not add up to the loading columns")
    if np.linalg.matrix_rank(lam) < lam.shape[1]:
        raise DegenerateModelError("loading matrix is rank deficient")
    return [orth_complement(lam[:, :b]) for b in bounds]


@dataclass(frozen=True)
class VecmForm:
    """Fractional error-correction form ``D^{d1} y = a b' L_{d1-d2} D^{d2} y + kappa``."""

    alpha: np.ndarray
    beta: np.ndarray
    M: np.ndarray
    N: np.ndarray
    d_high: float
    d_low: float

    def residual(self, y):
        """Error-correction residual ``kappa_t`` of a panel ``y`` (n x p)."""
        y = np.asarray(y, dtype=float)
        lhs = frac_diff(y, self.d_high)
        ect = frac_lag(frac_diff(y, self.d_low), self.d_high - self.d_low)
        return lhs - ect @ (self.alpha @ self.beta.T).T


def vecm_form(lam, group_sizes, d):
    """
    Error-correction representation of a two-group model with ``s = p``.

    Returns projections ``M`` and ``N`` with ``M + N = I`` and a factorization
    ``alpha beta' = -N`` in which ``beta`` is orthonormal (thin SVD).
    """
    lam = np.asarray(lam, dtype=float)
    group_sizes = tuple(group_sizes)
    p, s = lam.shape
    if len(group_sizes) != 2 or s != p or sum(group_sizes) != s:
        raise UnsupportedRepresentationError(
            "error correction form needs q = 2 groups and s = p"
        )
    d = np.asarray(d, dtype=float)
    s1 = group_sizes[0]
    lam1, lam2 = lam[:, :s1], lam[:, s1:]
    lam1_perp, lam2_perp = orth_complement(lam1), orth_complement(lam2)
    a12 = lam1_perp.T @ lam2
    a21 = lam2_perp.T @ lam1
    if np.linalg.cond(a12) > 1e12 or np.linalg.cond(a21) > 1e12:
        raise DegenerateModelError("loading groups are not complementary")
    N = lam2 @ np.linalg.solve(a12, lam1_perp.T)
    M = lam1 @ np.linalg.solve(a21, lam2_perp.T)
    u, sv, vt = np.linalg.svd(-N)
    r = p - s1
    alpha = u[:, :r] * sv[:r]
    beta = vt[:r].T
    return VecmForm(alpha=alpha, beta=beta, M=M, N=N, d_high=float(d[0]), d_low=float(d[1]))


@dataclass(frozen=True)
class TriangularForm:
    """Block triangular system ``B y_t[perm]`` stacking blocks of decreasing order.

    ``orders[j]`` is the integration order of row block ``j``; a trailing
    block of order zero appears when ``p > s``.
    """

    b_matrix: np.ndarray
    orders: np.ndarray
    block_sizes: tuple
    permutation: np.ndarray

    def apply(self, y):
        """Return ``B y_t`` (n x p) for a panel in the original variable order."""
        y = np.asarray(y, dtype=float)
        return y[:, self.permutation] @ self.b_matrix.T

    def block_slices(self):
        bounds = np.cumsum((0,) + tuple(self.block_sizes))
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    def omega(self, y):
        """Fractionally difference every block of ``B y_t`` by its order."""
        by = self.apply(y)
        out = np.empty_like(by)
        for sl, order in zip(self.block_slices(), self.orders):
            out[:, sl] = frac_diff(by[:, sl], order) if order else by[:, sl]
        return out


def _leading_blocks_ok(lam, perm, bounds, tol=1e-10):
    for b in bounds:
        block = lam[np.asarray(perm[:b])][:, :b]
        sv = np.linalg.svd(block, compute_uv=False)
        if sv.min() <= tol * max(1.0, sv.max()):
            return False
    return True


def _greedy_ordering(lam, group_sizes):
    p = lam.shape[0]
    chosen = []
    col_start = 0
    for size in group_sizes:
        cols = slice(col_start, col_start + size)
        remaining = [i for i in range(p) if i not in chosen]
        block = lam[remaining, cols]
        if chosen:
            prev = slice(0, col_start)
            coef = np.linalg.solve(lam[chosen, prev], lam[chosen, cols])
            block = block - lam[remaining, prev] @ coef
        _, r, piv = scipy.linalg.qr(block.T, pivoting=True, mode="economic")
        picked = sorted(remaining[i] for i in piv[:size])
        if np.abs(r[size - 1, size - 1]) <= 1e-10 * max(1.0, np.abs(r[0, 0])):
            raise DegenerateModelError("no admissible variable ordering for the triangular form")
        chosen.extend(picked)
        col_start += size
    rest = [i for i in range(p) if i not in chosen]
    return np.array(chosen + rest)


def triangular_form(lam, group_sizes, d=None):
    """
    Triangular representation of the fractional components.

    Parameters
    ----------
    lam : array_like, shape (p, s)
        Fractional loadings, ``s <= p``.
    group_sizes : sequence of int
    d : sequence of float, optional
        Group memory parameters, stored as block orders.

    Returns
    -------
    TriangularForm
        ``B`` is block lower unit-triangular with
        ``B^(j, 1:j-1) = -Lambda^(j, 1:j-1) (Lambda^(1:j-1, 1:j-1))^{-1}``.
        The natural variable order is kept whenever it is admissible;
        otherwise rows are chosen greedily by pivoted QR of Schur complements.
    """
    lam = np.asarray(lam, dtype=float)
    group_sizes = tuple(int(s) for s in group_sizes)
    p, s = lam.shape
    if sum(group_sizes) != s or s > p:
        raise InvalidArgumentError("group sizes must add up to s <= p")
    bounds = np.cumsum(group_sizes)
    perm = np.arange(p)
    if not _leading_blocks_ok(lam, perm, bounds):
        perm = _greedy_ordering(lam, group_sizes)
        if not _leading_blocks_ok(lam, perm, bounds):
            raise DegenerateModelError("no admissible variable ordering for the triangular form")
    lp = lam[perm]
    block_sizes = group_sizes + ((p - s,) if p > s else ())
    b = np.eye(p)
    starts = np.concatenate(([0], bounds))
    for j in range(1, len(block_sizes)):
        rows = slice(int(starts[j]), int(starts[j]) + block_sizes[j])
        lead = slice(0, int(starts[j]))
        # B^(j,1:j-1) = -Lambda^(j,1:j-1) (Lambda^(1:j-1,1:j-1))^{-1}
        b[rows, lead] = -np.linalg.solve(lp[lead, lead].T, lp[rows, lead].T).T
    if d is None:
        orders = np.full(len(block_sizes), np.nan)
    else:
        orders = np.asarray(d, dtype=float)
        if orders.shape != (len(group_sizes),):
            raise InvalidArgumentError("one memory parameter per group required")
    if p > s:
        orders = np.append(orders, 0.0)
    return TriangularForm(b_matrix=b, orders=orders, block_sizes=block_sizes, permutation=perm)


# ---------------------------------------------------------------------------
# simulation


def simulate_dofc(spec, params, n, rng, return_states=False):
    """
    Simulate a DOFC panel exactly (type-II fractional states, zero pre-sample).

    Parameters
    ----------
    spec : DofcSpec
    params : DofcParams
    n : int
        Number of periods.
    rng : numpy.random.Generator or int
    return_states : bool
        Also return the latent fractional and short-memory states.

    Returns
    -------
    y : ndarray, shape (n, p)
    states : dict, optional
        ``{"x": (n, s), "z": (n, s0)}`` when ``return_states`` is true.
    """
    from scipy.signal import lfilter

    problems = validate(spec, params)
    if problems:
        raise InvalidArgumentError("invalid parameters: " + "; ".join(problems))
    n = int(n)
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    rng = np.random.default_rng(rng)
    x = np.empty((n, spec.s))
    d_cols = params.d[spec.component_orders] if spec.s else np.zeros(0)
    for col in range(spec.s):
        x[:, col] = frac_integrate(rng.standard_normal(n), d_cols[col])
    z = np.empty((n, spec.s0))
    for col in range(spec.s0):
        z[:, col] = lfilter([1.0], np.r_[1.0, -params.phi[col]], rng.standard_normal(n))
    eps = rng.standard_normal((n, spec.p)) * np.sqrt(params.h)
    y = params.c + x @ params.lam.T + z @ params.gamma.T + eps
    if return_states:
        return y, {"x": x, "z": z}
    return y


# ---------------------------------------------------------------------------
# JSON serialization


def params_to_dict(params, spec=None):
    """JSON-ready dict mirroring the :class:`DofcParams` field names."""
    out = {
        "d": params.d.tolist(),
        "lambda": params.lam.tolist(),
        "gamma": params.gamma.tolist(),
        "phi": params.phi.tolist(),
        "h": params.h.tolist(),
        "c": params.c.tolist(),
    }
    if spec is not None:
        out = {"spec": spec.to_dict(), **out}
    return out


def params_from_dict(data):
    """Inverse of :func:`params_to_dict`; returns ``(spec or None, params)``."""
    spec = DofcSpec.from_dict(data["spec"]) if "spec" in data else None
    h = np.asarray(data["h"], dtype=float)
    p = h.size
    lam = np.asarray(data.get("lambda", []), dtype=float).reshape(p, -1) if data.get("lambda") else np.zeros((p, 0))
    gamma = np.asarray(data.get("gamma", []), dtype=float).reshape(p, -1) if data.get("gamma") else np.zeros((p, 0))
    phi = np.asarray(data.get("phi", []), dtype=float)
    if phi.size == 0:
        phi = np.zeros((gamma.shape[1], 0))
    params = DofcParams(
        d=np.asarray(data.get("d", []), dtype=float),
        lam=lam,
        gamma=gamma,
        phi=phi.reshape(gamma.shape[1], -1) if gamma.shape[1] else phi.reshape(0, 0),
        h=h,
        c=np.asarray(data.get("c", np.zeros(p)), dtype=float),
    )
    if spec is not None:
        problems = validate(spec, params)
        if problems:
            raise InvalidArgumentError("; ".join(problems))
    return spec, params


def save_params(path, params, spec=None):
    with open(path, "w") as fh:
        json.dump(params_to_dict(params, spec), fh, indent=2)


def load_params(path):
    with open(path) as fh:
        return params_from_dict(json.load(fh))
