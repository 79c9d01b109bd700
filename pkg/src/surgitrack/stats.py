"""Correlation, agreement and feature-scoring statistics.

Degenerate-case conventions are explicit rather than silent: Pearson on a
constant series is NaN (undefined, not zero), Cohen's kappa with chance
agreement 1 is defined as 1.0, and a feature that separates classes with
zero within-group variance gets an infinite ANOVA F so it ranks first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def pearson(x, y) -> float:
    """Sample Pearson correlation; NaN when either series is constant."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError(f"series must be 1-d and equal length, got {xa.shape} vs {ya.shape}")
    if xa.size < 2:
        raise ValueError("need at least two points")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    return float(np.dot(dx, dy)) / math.sqrt(sxx * syy)


def cohen_kappa(ratings_a, ratings_b) -> float:
    """Inter-rater agreement (p_o - p_e) / (1 - p_e) over a shared category set.

    When both raters are constant and identical (p_e == 1) the agreement is
    perfect by convention and 1.0 is returned.
    """
    a = list(ratings_a)
    b = list(ratings_b)
    if len(a) != len(b):
        raise ValueError(f"rating series differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise ValueError("rating series are empty")
    cats = sorted(set(a) | set(b), key=repr)
    index = {c: i for i, c in enumerate(cats)}
    n = len(a)
    confusion = np.zeros((len(cats), len(cats)), dtype=np.float64)
    for ra, rb in zip(a, b):
        confusion[index[ra], index[rb]] += 1.0
    p_o = float(np.trace(confusion)) / n
    row = confusion.sum(axis=1) / n
    col = confusion.sum(axis=0) / n
    p_e = float(np.dot(row, col))
    if p_e >= 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def anova_f(X, y) -> np.ndarray:
    """One-way ANOVA F statistic per feature column.

    Zero within-group variance yields F = 0 when the between-group variance
    is also zero and +inf otherwise (a perfect separator).
    """
    Xa = np.asarray(X, dtype=np.float64)
    ya = np.asarray(y)
    if Xa.ndim != 2 or Xa.shape[0] != ya.shape[0]:
        raise ValueError("X must be (n_samples, n_features) aligned with y")
    classes = sorted(set(ya.tolist()), key=repr)
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    n = Xa.shape[0]
    g = len(classes)
    if n <= g:
        raise ValueError("need more samples than classes")
    grand = Xa.mean(axis=0)
    ssb = np.zeros(Xa.shape[1])
    ssw = np.zeros(Xa.shape[1])
    for c in classes:
        rows = Xa[ya == c]
        mean_c = rows.mean(axis=0)
        ssb += rows.shape[0] * (mean_c - grand) ** 2
        ssw += ((rows - mean_c) ** 2).sum(axis=0)
    msb = ssb / (g - 1)
    msw = ssw / (n - g)
    out = np.empty(Xa.shape[1], dtype=np.float64)
    for j in range(Xa.shape[1]):
        if msw[j] == 0.0:
            out[j] = 0.0 if msb[j] == 0.0 else math.inf
        else:
            out[j] = msb[j] / msw[j]
    return out


def anova_f_select(X, y, k: int) -> tuple[list[int], np.ndarray]:
    """Indices of the top-k features by ANOVA F (ties to the lower index)."""
    scores = anova_f(X, y)
    if not (1 <= k <= scores.size):
        raise ValueError(f"k must be in [1, {scores.size}], got {k}")
    order = sorted(range(scores.size), key=lambda j: (-scores[j], j))
    return sorted(order[:k]), scores


@dataclass(frozen=True)
class MosatsAssessment:
    """One video's 10-aspect skill assessment plus derived scores."""

    video_id: str
    aspects: tuple[int, ...]
    skill_label: str

    def __post_init__(self):
        aspects = tuple(int(a) for a in self.aspects)
        object.__setattr__(self, "aspects", aspects)
        if len(aspects) != 10:
            raise ValueError(f"expected 10 aspect scores, got {len(aspects)}")
        if any(not (1 <= a <= 5) for a in aspects):
            raise ValueError(f"aspect scores must be integers 1..5, got {aspects}")
        if self.skill_label not in ("novice", "expert"):
            raise ValueError(f"skill_label must be novice or expert, got {self.skill_label!r}")

    @property
    def summed(self) -> int:
        return sum(self.aspects)

    @property
    def mean_rounded(self) -> int:
        """Round-half-up of summed/10, an integer 1..5."""
        return (self.summed + 5) // 10
