"""Rank statistics for comparing run outcomes across arms."""

from typing import NamedTuple

import numpy as np
from scipy.stats import chi2, rankdata


class KruskalResult(NamedTuple):
    h: float
    p_value: float
    degenerate: bool


def kruskal_wallis(groups):
    """Tie-corrected Kruskal-Wallis H test.

    groups: sequence of >= 2 sequences of scalars, each non-empty.  Returns
    (H, p, degenerate); when every observation is identical the test is
    undefined and (0, 1, degenerate=True) is returned.
    """
    groups = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    if any(len(g) == 0 for g in groups):
        raise ValueError("every group needs at least one observation")
    pooled = np.concatenate(groups)
    n = len(pooled)
    if np.all(pooled == pooled[0]):
        return KruskalResult(0.0, 1.0, True)
    ranks = rankdata(pooled)
    h = 0.0
    start = 0
    for g in groups:
        r = ranks[start:start + len(g)]
        h += r.sum() ** 2 / len(g)
        start += len(g)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    _, counts = np.unique(pooled, return_counts=True)
    correction = 1.0 - np.sum(counts ** 3 - counts) / (n ** 3 - n)
    h /= correction
    p = float(chi2.sf(h, df=len(groups) - 1))
    return KruskalResult(float(h), p, False)


class BonferroniResult(NamedTuple):
    significant: list
    adjusted: list
    threshold: float


def bonferroni(p_values, alpha=0.05):
    """Bonferroni correction over m comparisons: comparison i is significant
    iff p_i < alpha/m; adjusted p-values are min(1, m * p_i)."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    m = len(p_values)
    if m < 1:
        raise ValueError("need at least one comparison")
    threshold = alpha / m
    significant = [p < threshold for p in p_values]
    adjusted = [min(1.0, m * p) for p in p_values]
    return BonferroniResult(significant, adjusted, threshold)
