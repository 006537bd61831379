"""
Specific-to-general search for groups of equal memory.

Components are sorted by their memory estimates and only contiguous
partitions of that ordering are considered, so that no group contains two
components without every component estimated in between.  For ``j = 1, 2,
...`` groups, each partition is tested with the Wald statistic

    W = 4 m sum_G sum_{i in G} (d_i - dbar_G)^2,     df = r - j,

using the ``1 / (4 m)`` variance of exact local Whittle estimates with
orthogonal components.  The search stops at the first ``j`` for which some
partition is not rejected and picks the partition with the largest p-value.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import stats

from ..exceptions import InvalidArgumentError

__all__ = ["GroupingResult", "memory_grouping", "contiguous_partitions", "wald_equal_memory"]


@dataclass
class GroupingResult:
    """Outcome of :func:`memory_grouping`.

    Attributes
    ----------
    groups : list of list of int
        Component indices per group, ordered by decreasing group memory.
    d_groups : ndarray
        Mean memory estimate per group.
    j_star : int
    pvalue : float
        P-value of the selected grouping.
    tested : list of dict
        Every tested partition with ``j``, ``sizes``, ``stat``, ``df`` and ``pvalue``.
    zero_memory_pvalue : float
        P-value of ``4 m |G| dbar_G^2`` against chi-squared(1) for the last group.
    """

    groups: list
    d_groups: np.ndarray
    j_star: int
    pvalue: float
    m: int
    alpha: float
    tested: list = field(default_factory=list)
    zero_memory_pvalue: float = np.nan

    @property
    def sizes(self):
        return tuple(len(g) for g in self.groups)


def contiguous_partitions(r, j):
    """All ways to split ``0..r-1`` into ``j`` contiguous non-empty blocks (as sizes)."""
    for cuts in combinations(range(1, r), j - 1):
        bounds = (0,) + cuts + (r,)
        yield tuple(b - a for a, b in zip(bounds[:-1], bounds[1:]))


def wald_equal_memory(d_sorted, sizes, m):
    """Wald statistic and p-value for equal memory within each block."""
    stat = 0.0
    pos = 0
    for s in sizes:
        block = d_sorted[pos : pos + s]
        stat += np.sum((block - block.mean()) ** 2)
        pos += s
    stat *= 4.0 * m
    df = len(d_sorted) - len(sizes)
    pval = 1.0 if df == 0 else float(stats.chi2.sf(stat, df))
    return float(stat), int(df), pval


def memory_grouping(d_hats, m, alpha=0.05, h=0.0):
    """
    Select groups of components with equal memory.

    Parameters
    ----------
    d_hats : array_like
        One memory estimate per component, all from bandwidth ``m``.
    m : int
        Bandwidth of the estimates.
    alpha : float
        Level of the sequential Wald tests.
    h : float
        Trimming parameter; only ``h = 0`` is supported.

    Returns
    -------
    GroupingResult
    """
    d = np.asarray(d_hats, dtype=float).ravel()
    if d.size == 0:
        raise InvalidArgumentError("memory_grouping needs at least one estimate")
    if h != 0:
        raise InvalidArgumentError("only zero trimming (h = 0) is supported")
    if int(m) < 1:
        raise InvalidArgumentError("bandwidth must be positive")
    m = int(m)
    order = np.argsort(-d, kind="stable")
    ds = d[order]
    r = d.size
    tested = []
    for j in range(1, r + 1):
        accepted = []
        for sizes in contiguous_partitions(r, j):
            stat, df, pval = wald_equal_memory(ds, sizes, m)
            tested.append({"j": j, "sizes": list(sizes), "stat": stat, "df": df, "pvalue": pval})
            if pval >= alpha:
                accepted.append((pval, sizes))
        if accepted:
            pval, sizes = max(accepted, key=lambda t: t[0])
            break
    bounds = np.cumsum((0,) + sizes)
    groups = [sorted(order[a:b].tolist()) for a, b in zip(bounds[:-1], bounds[1:])]
    d_groups = np.array([ds[a:b].mean() for a, b in zip(bounds[:-1], bounds[1:])])
    last = ds[bounds[-2] :]
    z0 = 4.0 * m * last.size * last.mean() ** 2
    return GroupingResult(
        groups=groups,
        d_groups=d_groups,
        j_star=j,
        pvalue=pval,
        m=m,
        alpha=float(alpha),
        tested=tested,
        zero_memory_pvalue=float(stats.chi2.sf(z0, 1)),
    )
