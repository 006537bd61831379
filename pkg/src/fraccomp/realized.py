"""
Realized covariance panels and their vector representations.

The log/z representation of a ``k x k`` covariance matrix ``X`` is

    y = (log X_11, ..., log X_kk, Z_21, Z_31, ..., Z_k1, Z_32, ..., Z_k,k-1)

with ``Z_ij = atanh(R_ij)`` for the correlations ``R``; z-columns run down
the columns of the strict lower triangle.  A Cholesky half-vectorization
(row-major lower triangle) is provided for the Cholesky benchmark.
"""

from dataclasses import dataclass
import warnings

import numpy as np
import pandas as pd

from .exceptions import DataError, InvalidArgumentError, NumericalFailureError

__all__ = [
    "CovPanel",
    "z_pairs",
    "logz_columns",
    "to_logz",
    "from_logz",
    "nearest_pd",
    "chol_transform",
    "chol_inverse",
    "load_panel",
    "save_panel",
    "Z_CLIP",
]

#: Correlations are clipped to ``+-Z_CLIP`` before the z-transform.
Z_CLIP = 1.0 - 1e-12


def z_pairs(k):
    """``(i, j)`` index pairs (0-based, ``i > j``) in z-column order."""
    return [(i, j) for j in range(k) for i in range(j + 1, k)]


def logz_columns(k, labels=None):
    labels = labels or [str(i + 1) for i in range(k)]
    cols = [f"logX{labels[i]}{labels[i]}" for i in range(k)]
    cols += [f"Z{labels[i]}{labels[j]}" for i, j in z_pairs(k)]
    return cols


def _dim_from_p(p):
    k = int(round((np.sqrt(8 * p + 1) - 1) / 2))
    if k * (k + 1) // 2 != p:
        raise InvalidArgumentError(f"{p} is not a triangular number k(k+1)/2")
    return k


@dataclass
class CovPanel:
    """Time series of symmetric positive-definite matrices.

    Attributes
    ----------
    mats : ndarray, shape (n, k, k)
    index : pandas.Index, optional
        Time labels (dates).
    labels : list of str, optional
        Asset names.
    """

    mats: np.ndarray
    index: object = None
    labels: list = None

    def __post_init__(self):
        mats = np.asarray(self.mats, dtype=float)
        if mats.ndim == 2:
            mats = mats[None]
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise InvalidArgumentError("mats must have shape (n, k, k)")
        self.mats = mats
        if self.index is None:
            self.index = pd.RangeIndex(mats.shape[0])
        else:
            self.index = pd.Index(self.index)
        if self.labels is None:
            self.labels = [str(i + 1) for i in range(mats.shape[1])]

    @property
    def n(self):
        return self.mats.shape[0]

    @property
    def k(self):
        return self.mats.shape[1]

    def __len__(self):
        return self.n

    def __getitem__(self, item):
        if isinstance(item, slice):
            return CovPanel(self.mats[item], self.index[item], self.labels)
        return self.mats[item]

    def invalid_rows(self, tol=1e-10):
        """Row numbers (0-based) that are not symmetric positive definite."""
        bad = []
        for t, x in enumerate(self.mats):
            if not np.all(np.isfinite(x)):
                bad.append(t)
                continue
            scale = max(1.0, np.max(np.abs(x)))
            if np.max(np.abs(x - x.T)) > tol * scale:
                bad.append(t)
                continue
            try:
                np.linalg.cholesky(x)
            except np.linalg.LinAlgError:
                bad.append(t)
        return bad

    def validate(self):
        bad = self.invalid_rows()
        if bad:
            labels = [str(self.index[t]) for t in bad[:10]]
            raise DataError(
                "matrices not symmetric positive definite at rows " + ", ".join(labels),
                rows=bad,
            )
        return self


def _as_mats(panel):
    if isinstance(panel, CovPanel):
        return panel.mats, panel
    mats = np.asarray(panel, dtype=float)
    return (mats[None] if mats.ndim == 2 else mats), None


def to_logz(panel):
    """
    Log variances and z-transformed correlations.

    Parameters
    ----------
    panel : CovPanel or array_like, shape (n, k, k) or (k, k)

    Returns
    -------
    DataFrame (for a CovPanel) or ndarray of shape (n, p) / (p,)
        ``p = k + k(k-1)/2``.
    """
    mats, cp = _as_mats(panel)
    k = mats.shape[1]
    var = np.diagonal(mats, axis1=1, axis2=2)
    if np.any(var <= 0):
        raise InvalidArgumentError("variances must be positive")
    sd = np.sqrt(var)
    pairs = z_pairs(k)
    ii = np.array([i for i, _ in pairs], dtype=int)
    jj = np.array([j for _, j in pairs], dtype=int)
    r = mats[:, ii, jj] / (sd[:, ii] * sd[:, jj])
    if np.any(np.abs(r) > Z_CLIP):
        warnings.warn("correlations clipped before z-transform (near-singular input)")
        r = np.clip(r, -Z_CLIP, Z_CLIP)
    y = np.hstack([np.log(var), np.arctanh(r)])
    if cp is not None:
        return pd.DataFrame(y, index=cp.index, columns=logz_columns(k, cp.labels))
    return y[0] if np.asarray(panel).ndim == 2 else y


def _logz_point(y, k):
    var = np.exp(y[:k])
    sd = np.sqrt(var)
    corr = np.eye(k)
    for (i, j), z in zip(z_pairs(k), y[k:]):
        corr[i, j] = corr[j, i] = np.tanh(z)
    return corr * np.outer(sd, sd)


def nearest_pd(x, rel_floor=1e-10):
    """Symmetrize and clip eigenvalues at ``rel_floor`` times the largest one."""
    x = 0.5 * (x + x.T)
    w, v = np.linalg.eigh(x)
    floor = rel_floor * max(w.max(), 0.0)
    if w.min() >= floor and w.min() > 0:
        return x
    if w.max() <= 0:
        raise NumericalFailureError("matrix has no positive eigenvalue")
    w = np.maximum(w, floor)
    out = (v * w) @ v.T
    return 0.5 * (out + out.T)


def from_logz(y, pred_cov=None, n_sim=1000, rng=None):
    """
    Map a log/z vector back to a covariance matrix.

    Parameters
    ----------
    y : array_like, shape (p,)
        Point value, or predictive mean in bias-corrected mode.
    pred_cov : array_like, shape (p, p), optional
        Predictive covariance of ``y``.  When given, the result is the Monte
        Carlo mean of the inverse transform over ``n_sim`` Gaussian draws.
    n_sim : int
    rng : Generator or int, optional

    Returns
    -------
    ndarray, shape (k, k)
        Symmetric positive definite.
    """
    y = np.asarray(y, dtype=float).ravel()
    k = _dim_from_p(y.size)
    if pred_cov is None:
        return nearest_pd(_logz_point(y, k))
    pred_cov = np.asarray(pred_cov, dtype=float)
    if pred_cov.shape != (y.size, y.size):
        raise InvalidArgumentError("pred_cov has the wrong shape")
    w, v = np.linalg.eigh(0.5 * (pred_cov + pred_cov.T))
    if w.min() < -1e-8 * max(1.0, abs(w.max())):
        raise InvalidArgumentError("predictive covariance is not positive semidefinite")
    root = v * np.sqrt(np.clip(w, 0.0, None))
    if not np.any(root):
        return nearest_pd(_logz_point(y, k))
    rng = np.random.default_rng(rng)
    draws = y + rng.standard_normal((int(n_sim), y.size)) @ root.T
    var = np.exp(draws[:, :k])
    sd = np.sqrt(var)
    acc = np.zeros((k, k))
    acc[np.diag_indices(k)] = var.mean(axis=0)
    for col, (i, j) in enumerate(z_pairs(k)):
        val = np.mean(np.tanh(draws[:, k + col]) * sd[:, i] * sd[:, j])
        acc[i, j] = acc[j, i] = val
    out = nearest_pd(acc)
    try:
        np.linalg.cholesky(out)
    except np.linalg.LinAlgError:
        raise NumericalFailureError("bias-corrected matrix not positive definite") from None
    return out


def chol_transform(panel):
    """
    Row-major half-vectorization of lower Cholesky factors.

    Returns
    -------
    ndarray, shape (n, k(k+1)/2) (or (k(k+1)/2,) for one matrix)
    """
    mats, _ = _as_mats(panel)
    k = mats.shape[1]
    il = np.tril_indices(k)
    out = np.empty((mats.shape[0], il[0].size))
    for t, x in enumerate(mats):
        try:
            out[t] = np.linalg.cholesky(x)[il]
        except np.linalg.LinAlgError:
            raise InvalidArgumentError(f"matrix at row {t} is not positive definite") from None
    single = not isinstance(panel, CovPanel) and np.asarray(panel).ndim == 2
    return out[0] if single else out


def chol_inverse(v):
    """Inverse of :func:`chol_transform` for one vector or a stack of vectors."""
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    v = np.atleast_2d(v)
    k = _dim_from_p(v.shape[1])
    il = np.tril_indices(k)
    out = np.empty((v.shape[0], k, k))
    for t, row in enumerate(v):
        low = np.zeros((k, k))
        low[il] = row
        out[t] = low @ low.T
    return out[0] if single else out


# ---------------------------------------------------------------------------
# file I/O


def _half_indices(k, order):
    if order == "upper_row":
        return [(i, j) for i in range(k) for j in range(i, k)]
    if order == "lower_row":
        return [(i, j) for i in range(k) for j in range(i + 1)]
    raise InvalidArgumentError(f"unknown half-vectorization order {order!r}")


def load_panel(path, format="wide", k=None, order="upper_row", date_column=None, validate=True):
    """
    Read a realized covariance panel from CSV or whitespace-separated text.

    Parameters
    ----------
    path : str or path-like
    format : {"wide", "long"}
        ``wide``: one row per day holding the ``k(k+1)/2`` distinct entries
        (optionally preceded by a date column), in ``order``.  This is the
        layout of the published six-stock dataset.
        ``long``: columns ``date, i, j, value`` with 1-based asset indices;
        one line per distinct entry.
    k : int, optional
        Matrix dimension; inferred from the column count if omitted.
    order : {"upper_row", "lower_row"}
        Half-vectorization order for ``wide`` files.
    date_column : bool, optional
        Force or suppress a leading date column (auto-detected by default).

    Returns
    -------
    CovPanel

    Raises
    ------
    DataError
        Parse failures, wrong column counts, non-positive variances or
        non-PD days; the message names the offending rows (1-based data rows).
    """
    if format == "long":
        return _load_long(path, validate)
    if format != "wide":
        raise InvalidArgumentError(f"unknown format {format!r}")
    try:
        with open(path) as fh:
            first = fh.readline()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    sep = "," if "," in first else r"\s+"
    header = _looks_like_header(first, sep)
    try:
        raw = pd.read_csv(path, sep=sep, header=0 if header else None, dtype=str,
                          engine="python", skip_blank_lines=True)
    except Exception as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    if date_column is None:
        first_col = pd.to_numeric(raw.iloc[:, 0], errors="coerce")
        width = raw.shape[1]
        date_column = bool(first_col.isna().any()) or (
            k is not None and width == k * (k + 1) // 2 + 1
        ) or (k is None and _is_triangular(width - 1) and not _is_triangular(width))
    index = None
    if date_column:
        index = pd.Index(raw.iloc[:, 0].str.strip(), name="date")
        raw = raw.iloc[:, 1:]
    values = raw.apply(pd.to_numeric, errors="coerce")
    bad = np.flatnonzero(values.isna().any(axis=1).to_numpy())
    if bad.size:
        raise DataError("non-numeric entries in rows " + _rows(bad), rows=(bad + 1).tolist())
    values = values.to_numpy(dtype=float)
    width = values.shape[1]
    if k is None:
        k = _dim_from_p(width) if _is_triangular(width) else None
    if k is None or width != k * (k + 1) // 2:
        raise DataError(f"expected k(k+1)/2 value columns, found {width}")
    mats = np.empty((values.shape[0], k, k))
    for col, (i, j) in enumerate(_half_indices(k, order)):
        mats[:, i, j] = mats[:, j, i] = values[:, col]
    return _finish(mats, index, validate)


def _is_triangular(w):
    k = int(round((np.sqrt(8 * w + 1) - 1) / 2))
    return w > 0 and k * (k + 1) // 2 == w


def _looks_like_header(line, sep):
    import re

    fields = [f for f in re.split(sep, line.strip()) if f]
    numeric = 0
    for f in fields[1:]:
        try:
            float(f)
            numeric += 1
        except ValueError:
            pass
    return numeric == 0


def _rows(bad):
    return ", ".join(str(int(b) + 1) for b in bad[:10]) + (" ..." if len(bad) > 10 else "")


def _finish(mats, index, validate):
    var = np.diagonal(mats, axis1=1, axis2=2)
    bad = np.flatnonzero((var <= 0).any(axis=1))
    if bad.size:
        raise DataError("non-positive variance in rows " + _rows(bad), rows=(bad + 1).tolist())
    panel = CovPanel(mats, index=index)
    if validate:
        bad = panel.invalid_rows()
        if bad:
            raise DataError(
                "matrix not positive definite in rows " + _rows(np.array(bad)),
                rows=[b + 1 for b in bad],
            )
    return panel


def _load_long(path, validate):
    try:
        raw = pd.read_csv(path)
    except Exception as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    need = {"date", "i", "j", "value"}
    if not need <= set(raw.columns):
        raise DataError(f"long format needs columns {sorted(need)}")
    ij = raw[["i", "j"]].apply(pd.to_numeric, errors="coerce")
    vals = pd.to_numeric(raw["value"], errors="coerce")
    bad = np.flatnonzero((ij.isna().any(axis=1) | vals.isna()).to_numpy())
    if bad.size:
        raise DataError("non-numeric entries in rows " + _rows(bad), rows=(bad + 1).tolist())
    k = int(ij.to_numpy().max())
    dates = pd.Index(pd.unique(raw["date"].astype(str)), name="date")
    pos = {d: t for t, d in enumerate(dates)}
    mats = np.full((len(dates), k, k), np.nan)
    for row, (d, i, j, v) in enumerate(zip(raw["date"].astype(str), ij["i"], ij["j"], vals)):
        i, j = int(i) - 1, int(j) - 1
        if min(i, j) < 0:
            raise DataError(f"asset index below 1 in row {row + 1}", rows=[row + 1])
        mats[pos[d], i, j] = mats[pos[d], j, i] = v
    missing = np.flatnonzero(np.isnan(mats).any(axis=(1, 2)))
    if missing.size:
        raise DataError("incomplete matrices for dates " + ", ".join(dates[missing[:10]]),
                        rows=(missing + 1).tolist())
    return _finish(mats, dates, validate)


def save_panel(path, panel, format="wide", order="upper_row"):
    """Write a :class:`CovPanel` in full double precision (``repr`` floats)."""
    if format == "wide":
        idx = _half_indices(panel.k, order)
        data = np.column_stack([panel.mats[:, i, j] for i, j in idx])
        df = pd.DataFrame(data, columns=[f"X{i + 1}{j + 1}" for i, j in idx])
        df.insert(0, "date", [str(d) for d in panel.index])
        df.to_csv(path, index=False, float_format="%.17g")
    elif format == "long":
        rows = []
        for d, x in zip(panel.index, panel.mats):
            for i in range(panel.k):
                for j in range(i + 1):
                    rows.append((str(d), i + 1, j + 1, x[i, j]))
        pd.DataFrame(rows, columns=["date", "i", "j", "value"]).to_csv(
            path, index=False, float_format="%.17g"
        )
    else:
        raise InvalidArgumentError(f"unknown format {format!r}")
