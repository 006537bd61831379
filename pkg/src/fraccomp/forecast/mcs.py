"""
Model confidence sets with the max-t (``T_max``) elimination rule.

Losses of the models still in the set are compared with their cross-model
average.  ``t_i = dbar_i / se(dbar_i)`` uses bootstrap standard errors from a
circular moving-block bootstrap, and the model with the largest ``t_i`` is
eliminated if the bootstrap p-value of ``max_i t_i`` is small.  MCS p-values
are running maxima of the elimination p-values, so the set at level
``1 - alpha`` is every model with p-value ``>= alpha``.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np
import pandas as pd

from ..exceptions import InvalidArgumentError

__all__ = ["McsResult", "block_bootstrap_indices", "model_confidence_set"]


def block_bootstrap_indices(n, block_len, n_boot, rng):
    """
    Index sets of a circular moving-block bootstrap.

    Returns
    -------
    ndarray of int, shape (n_boot, n)
    """
    block_len = int(max(1, min(block_len, n)))
    n_blocks = -(-n // block_len)
    starts = rng.integers(0, n, size=(n_boot, n_blocks))
    idx = (starts[:, :, None] + np.arange(block_len)) % n
    return idx.reshape(n_boot, -1)[:, :n]


@dataclass
class McsResult:
    """Outcome of :func:`model_confidence_set`.

    Attributes
    ----------
    models : list of str
    pvalues : pandas.Series
        MCS p-value per model.
    elimination_order : list of str
        Models in the order they were removed (survivor last).
    best : str
        Model with the smallest average loss.
    levels : dict
        ``{0.8: [...], 0.9: [...]}`` surviving models per confidence level.
    n_obs, n_dropped : int
        Loss periods used and periods removed because some loss was missing.
    block_len, n_boot : int
    ties : bool
        True if some loss differential had zero bootstrap variance.
    """

    models: list
    pvalues: pd.Series
    elimination_order: list
    best: str
    levels: dict
    mean_loss: pd.Series
    n_obs: int
    n_dropped: int
    block_len: int
    n_boot: int
    ties: bool = False
    notes: list = field(default_factory=list)

    def included(self, level):
        """Models in the ``level`` confidence set (``level`` e.g. 0.9)."""
        return [m for m in self.models if self.pvalues[m] >= 1.0 - level]

    def marker(self, model):
        """``***`` best, ``**`` in the 80% set, ``*`` in the 90% set only."""
        if model == self.best:
            return "***"
        if self.pvalues[model] >= 0.2:
            return "**"
        if self.pvalues[model] >= 0.1:
            return "*"
        return ""

    def to_dict(self):
        return {
            "models": list(self.models),
            "pvalues": {m: float(v) for m, v in self.pvalues.items()},
            "elimination_order": list(self.elimination_order),
            "best": self.best,
            "levels": {str(k): list(v) for k, v in self.levels.items()},
            "n_obs": self.n_obs,
            "n_dropped": self.n_dropped,
            "block_len": self.block_len,
            "n_boot": self.n_boot,
            "ties": self.ties,
            "notes": list(self.notes),
        }


def model_confidence_set(losses, block_len=5, n_boot=999, levels=(0.8, 0.9), rng=None):
    """
    Model confidence set by iterative ``T_max`` elimination.

    Parameters
    ----------
    losses : DataFrame or array_like, shape (n, M)
        Per-period losses, one column per model.  Rows with any missing
        loss are dropped before the bootstrap.
    block_len : int
        Block length of the circular moving-block bootstrap; ``max(5, h)``
        for ``h``-step forecasts.
    n_boot : int
    levels : sequence of float
        Confidence levels to report.
    rng : Generator or int, optional

    Returns
    -------
    McsResult
    """
    if isinstance(losses, pd.DataFrame):
        names = [str(c) for c in losses.columns]
        arr = losses.to_numpy(dtype=float)
    else:
        arr = np.asarray(losses, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        names = [f"model{i + 1}" for i in range(arr.shape[1])]
    keep = np.all(np.isfinite(arr), axis=1)
    n_dropped = int((~keep).sum())
    arr = arr[keep]
    n, m = arr.shape
    if m < 1:
        raise InvalidArgumentError("need at least one model")
    mean_loss = pd.Series(arr.mean(axis=0) if n else np.full(m, np.nan), index=names)
    notes = []
    if n_dropped:
        notes.append(f"{n_dropped} periods with missing losses removed")
    if m == 1:
        pv = pd.Series([1.0], index=names)
        return McsResult(names, pv, list(names), names[0], {lv: list(names) for lv in levels},
                         mean_loss, n, n_dropped, int(block_len), int(n_boot), False, notes)
    if n < 30:
        raise InvalidArgumentError("need at least 30 complete loss periods")
    rng = np.random.default_rng(rng)
    idx = block_bootstrap_indices(n, block_len, n_boot, rng)
    boot_means = arr[idx].mean(axis=1)  # (n_boot, M)
    sample_means = arr.mean(axis=0)
    alive = list(range(m))
    order, elim_p = [], []
    ties = False
    while len(alive) > 1:
        a = np.array(alive)
        dbar = sample_means[a] - sample_means[a].mean()
        dboot = boot_means[:, a] - boot_means[:, a].mean(axis=1, keepdims=True)
        dev = dboot - dbar
        se = np.sqrt(np.mean(dev**2, axis=0))
        if np.any(se <= 1e-14 * max(1.0, np.abs(sample_means).max())):
            ties = True
            zero = se <= 1e-14 * max(1.0, np.abs(sample_means).max())
            if np.all(zero):
                notes.append("remaining models have identical losses; retained as ties")
                break
            se = np.where(zero, np.inf, se)
        t = dbar / se
        stat = t.max()
        boot_stat = np.max(dev / se, axis=1)
        pval = float(np.mean(boot_stat >= stat))
        worst = int(a[np.argmax(t)])
        order.append(worst)
        elim_p.append(pval)
        alive.remove(worst)
    pvals = np.ones(m)
    running = 0.0
    for model, p in zip(order, elim_p):
        running = max(running, p)
        pvals[model] = running
    if ties:
        warnings.warn("zero-variance loss differentials in the model confidence set")
    pv = pd.Series(pvals, index=names)
    best = names[int(np.argmin(sample_means))]
    sets = {lv: [names[i] for i in range(m) if pvals[i] >= 1.0 - lv] for lv in levels}
    return McsResult(
        models=names,
        pvalues=pv,
        elimination_order=[names[i] for i in order] + [names[i] for i in alive],
        best=best,
        levels=sets,
        mean_loss=mean_loss,
        n_obs=n,
        n_dropped=n_dropped,
        block_len=int(block_len),
        n_boot=int(n_boot),
        ties=ties,
        notes=notes,
    )
