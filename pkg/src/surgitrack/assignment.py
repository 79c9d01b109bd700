"""Optimal one-to-one assignment with gating and deterministic tie-breaks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class Assignment:
    matches: list[tuple[int, int]]
    unmatched_rows: list[int]
    unmatched_cols: list[int]
    total_cost: float = field(default=0.0)


def _total(clist, pairs) -> float:
    # exactly-rounded sum: equal pair multisets always compare equal
    return math.fsum(clist[i][j] for i, j in pairs)


def _solve_real_pairs(work, big, row_ids, col_ids, m, n, kernels):
    """Solve the padded square matrix; return matched real (row, col) pairs."""
    sol = kernels.lap_solve(work)
    pairs = []
    for i in range(work.shape[0]):
        j = int(sol[i])
        if work[i, j] < big:
            oi, oj = int(row_ids[i]), int(col_ids[j])
            if oi < m and oj < n:
                pairs.append((oi, oj))
    return pairs


def assign(cost, gates=None, kernels=None) -> Assignment:
    """Minimum-cost maximum-cardinality matching restricted to ungated cells.

    ``cost`` is an (m, n) array; ``gates`` an optional boolean mask of cells
    that may be matched (default: all). Among all maximum-size matchings on
    allowed cells the one with minimum total cost is returned; exact-cost
    ties resolve to the lexicographically smallest assignment (row 0 takes
    the lowest column it can, then row 1, ...), with "unmatched" ordered
    after every column.
    """
    k = kernels if kernels is not None else _kernels
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim == 1 and c.size == 0:
        c = c.reshape(0, 0)
    if c.ndim != 2:
        raise ValueError(f"cost must be 2-d, got shape {c.shape}")
    m, n = c.shape
    if gates is None:
        allowed = np.ones((m, n), dtype=bool)
    else:
        allowed = np.asarray(gates, dtype=bool).reshape(m, n)
    if m == 0 or n == 0 or not allowed.any():
        return Assignment([], list(range(m)), list(range(n)), 0.0)
    if not np.all(np.isfinite(c[allowed])):
        raise ValueError("non-finite cost on an ungated cell")

    big = float(np.abs(c[allowed]).sum()) + 1.0
    s = max(m, n)
    work = np.full((s, s), big, dtype=np.float64)
    work[:m, :n][allowed] = c[:m, :n][allowed]
    clist = c.tolist()
    row_ids = np.arange(s)
    col_ids = np.arange(s)

    base = _solve_real_pairs(work, big, row_ids, col_ids, m, n, k)
    best_card = len(base)
    best_total = _total(clist, base)

    # Lexicographic refinement: commit rows in order to the lowest column (or
    # to "unmatched") that still admits an optimal completion. Committing a
    # pair removes its row and column from the working matrix; committing
    # "unmatched" turns the row into pure padding.
    fixed: list[tuple[int, int]] = []
    for r in range(m):
        r_pos = int(np.flatnonzero(row_ids == r)[0])
        chosen = None
        for oc in np.flatnonzero(allowed[r]):
            oc = int(oc)
            hit = np.flatnonzero(col_ids == oc)
            if hit.size == 0:  # column already committed
                continue
            c_pos = int(hit[0])
            sub = np.delete(np.delete(work, r_pos, axis=0), c_pos, axis=1)
            rest = _solve_real_pairs(
                sub,
                big,
                np.delete(row_ids, r_pos),
                np.delete(col_ids, c_pos),
                m,
                n,
                k,
            )
            candidate = fixed + [(r, oc)] + rest
            if len(candidate) == best_card and _total(clist, candidate) == best_total:
                chosen = (c_pos, oc)
                break
        if chosen is None:
            # every optimal completion leaves this row unmatched
            work[r_pos, :] = big
        else:
            c_pos, oc = chosen
            fixed.append((r, oc))
            work = np.delete(np.delete(work, r_pos, axis=0), c_pos, axis=1)
            row_ids = np.delete(row_ids, r_pos)
            col_ids = np.delete(col_ids, c_pos)

    matched_rows = {i for i, _ in fixed}
    matched_cols = {j for _, j in fixed}
    return Assignment(
        sorted(fixed),
        [i for i in range(m) if i not in matched_rows],
        [j for j in range(n) if j not in matched_cols],
        _total(clist, fixed),
    )
