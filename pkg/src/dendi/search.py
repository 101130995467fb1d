"""Quantile split grids and deviance-minimizing split search."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import (AllCandidatesDegenerate, DegenerateColumn, EmptyGrid,
                         NonFiniteWeights, RankDeficient)
from .forms import (LEFT, RIGHT, FormSpec, MultiplicativeCombo, PiecewiseConstant,
                    Tree, build_design)
from .glm import FitResult, fit_irls

DEFAULT_GRID_SIZE = 9
DEFAULT_MIN_NODE = 10

# Failures that make a single candidate inadmissible without aborting a search.
CANDIDATE_ERRORS = (DegenerateColumn, RankDeficient, NonFiniteWeights)
# deviances this close count as tied; identical partitions must not be ranked by rounding noise
TIE_TOL = 1e-9


def improves(new, best):
    """True where deviance ``new`` beats ``best`` by more than the tie tolerance."""
    return new < best - TIE_TOL * (1.0 + np.abs(best))


@dataclass(frozen=True, eq=False)
class SplitGrid:
    variable: int
    thresholds: np.ndarray


@dataclass(frozen=True, eq=False)
class SearchResult:
    best_form: FormSpec
    fit: FitResult
    trace: list = field(default_factory=list)


def quantile_levels_index(size: int, grid_size: int) -> np.ndarray:
    """Order-statistic positions of the levels ``i / (grid_size + 1)``.

    Lower interpolation: position ``floor(i * (size - 1) / (grid_size + 1))``,
    computed in integer arithmetic.
    """
    levels = np.arange(1, grid_size + 1)
    return (levels * (size - 1)) // (grid_size + 1)


def quantile_grid(values, grid_size: int = DEFAULT_GRID_SIZE,
                  min_node: int = DEFAULT_MIN_NODE) -> np.ndarray:
    """Admissible quantile thresholds of ``values``.

    Raises
    ------
    EmptyGrid
        If no threshold leaves ``min_node`` observations on both sides.
    """
    if grid_size < 1:
        raise ValueError("grid_size must be at least 1")
    v = np.sort(np.asarray(values, dtype=float))
    size = len(v)
    if size < 2:
        raise EmptyGrid(f"cannot split {size} observation(s)")
    t = np.unique(v[quantile_levels_index(size, grid_size)])
    left = np.searchsorted(v, t, side="right")
    t = t[(left >= min_node) & (size - left >= min_node)]
    if t.size == 0:
        raise EmptyGrid("no threshold satisfies the minimum node size")
    return t


def make_grid(data, j: int, grid_size: int = DEFAULT_GRID_SIZE,
              min_node: int = DEFAULT_MIN_NODE, rows=None) -> SplitGrid:
    """Candidate thresholds for covariate ``j``, optionally within ``rows``."""
    x = data.X[:, j] if rows is None else data.X[rows, j]
    return SplitGrid(j, quantile_grid(x, grid_size, min_node))


def fit_best(candidates: Sequence[FormSpec], data, adjust: Sequence[FormSpec] = (),
             family=None) -> SearchResult:
    """Fit every candidate and return the one with the smallest deviance.

    Candidates are visited in tie-break order (``FormSpec.tie_key``); the
    first minimum wins, with deviances within ``TIE_TOL`` treated as equal. Inadmissible candidates are kept in the trace with
    infinite deviance.
    """
    family = data.family if family is None else family
    best = None
    trace = []
    for form in sorted(candidates, key=lambda f: f.tie_key()):
        try:
            fit = fit_irls(build_design(form, data, adjust), data.y, family)
        except CANDIDATE_ERRORS:
            trace.append((form, np.inf))
            continue
        trace.append((form, fit.deviance))
        if best is None or improves(fit.deviance, best[1].deviance):
            best = (form, fit)
    if best is None:
        raise AllCandidatesDegenerate(f"no admissible candidate among {len(trace)}")
    return SearchResult(best[0], best[1], trace)


def single_split_candidates(template: FormSpec, grid: SplitGrid) -> list:
    if grid.variable != template.split_variable:
        raise ValueError("grid variable does not match the template's split variable")
    return [template.with_split(t) for t in grid.thresholds]


def search_single_split(template: FormSpec, data, adjust: Sequence[FormSpec],
                        grid: SplitGrid, family=None) -> SearchResult:
    """Best split for a one-split form (P, A or M with a fixed modifier)."""
    if len(grid.thresholds) == 0:
        raise EmptyGrid("empty grid")
    return fit_best(single_split_candidates(template, grid), data, adjust, family)


def modifier_candidates(j: int, data, modifiers: Sequence[int],
                        grid_size: int = DEFAULT_GRID_SIZE,
                        min_node: int = DEFAULT_MIN_NODE) -> list:
    out = []
    for k in modifiers:
        try:
            grid = make_grid(data, k, grid_size, min_node)
        except EmptyGrid:
            continue
        out.extend(single_split_candidates(MultiplicativeCombo(j, k), grid))
    return out


def search_modifier(j: int, data, adjust: Sequence[FormSpec], modifiers: Sequence[int],
                    grid_size: int = DEFAULT_GRID_SIZE, min_node: int = DEFAULT_MIN_NODE,
                    family=None) -> SearchResult:
    """Best slope break of ``x_j`` over all modifiers and their thresholds."""
    cands = modifier_candidates(j, data, modifiers, grid_size, min_node)
    if not cands:
        raise AllCandidatesDegenerate(f"no modifier of covariate {j} has a usable grid")
    return fit_best(cands, data, adjust, family)


def node_rows(data, base: PiecewiseConstant, node: str) -> np.ndarray:
    x = data.X[:, base.j]
    return x <= base.c if node == LEFT else x > base.c


def second_split_candidates(base: PiecewiseConstant, data, modifiers: Sequence[int],
                            grid_size: int = DEFAULT_GRID_SIZE,
                            min_node: int = DEFAULT_MIN_NODE) -> list:
    """All admissible second splits of a fitted one-split form.

    Each node is re-gridded from its own observations; a second split of the
    first split's variable must fall strictly inside the node.
    """
    out = []
    for node in (LEFT, RIGHT):
        rows = node_rows(data, base, node)
        for k in modifiers:
            try:
                t = make_grid(data, k, grid_size, min_node, rows=rows).thresholds
            except EmptyGrid:
                continue
            if k == base.j:
                t = t[t < base.c] if node == LEFT else t[t > base.c]
            out.extend(Tree(base.j, base.c, node, k, float(c2)) for c2 in t)
    return out


def search_second_split(base: PiecewiseConstant, data, adjust: Sequence[FormSpec],
                        modifiers: Sequence[int] = None,
                        grid_size: int = DEFAULT_GRID_SIZE,
                        min_node: int = DEFAULT_MIN_NODE, family=None) -> SearchResult:
    """Best second split over both nodes and all candidate variables.

    Ties go to the smaller variable index, then the left node, then the
    smaller threshold.
    """
    if base.c is None:
        raise ValueError("the first split must be fixed")
    modifiers = range(data.p) if modifiers is None else modifiers
    cands = second_split_candidates(base, data, modifiers, grid_size, min_node)
    if not cands:
        raise AllCandidatesDegenerate("no admissible second split")
    return fit_best(cands, data, adjust, family)


def fold_grid(x, rows, grid_size: int = DEFAULT_GRID_SIZE,
              min_node: int = DEFAULT_MIN_NODE, lower: float = -np.inf,
              upper: float = np.inf):
    """Split grids of every leave-one-out training set at once.

    Fold ``i`` trains on all observations but ``i``; its grid is the
    quantile grid of ``x`` over ``rows`` minus ``i``. Removing one value
    shifts each order statistic by at most one position, so the grids are
    read off the full sorted sample instead of re-sorting per fold.

    Returns
    -------
    thresholds : ndarray, shape (T,)
        Sorted union of the fold grids, restricted to ``(lower, upper)``.
    mask : ndarray of bool, shape (n, T)
        ``mask[i, t]`` is true iff threshold ``t`` is in fold ``i``'s grid.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    rows = np.ones(n, dtype=bool) if rows is None else np.asarray(rows, dtype=bool)
    members = np.flatnonzero(rows)
    m = len(members)
    order = np.argsort(x[members], kind="stable")
    v = x[members][order]

    try:
        full = quantile_grid(v, grid_size, min_node)
    except EmptyGrid:
        full = np.empty(0)

    if m >= 3:
        rank = np.empty(m, dtype=int)
        rank[order] = np.arange(m)
        idx = quantile_levels_index(m - 1, grid_size)[None, :]
        pos = idx + (idx >= rank[:, None])
        fold_t = v[pos]
        left = np.searchsorted(v, fold_t, side="right") - (x[members][:, None] <= fold_t)
        ok = (left >= min_node) & ((m - 1) - left >= min_node)
    else:
        fold_t = np.empty((m, 0))
        ok = np.zeros((m, 0), dtype=bool)

    union = np.unique(np.concatenate([full, fold_t[ok]]))
    union = union[(union > lower) & (union < upper)]
    mask = np.zeros((n, len(union)), dtype=bool)
    if len(union) == 0:
        return union, mask

    in_full = np.isin(union, full)
    mask[~rows] = in_full
    col = np.searchsorted(union, fold_t)
    col_ok = ok & (col < len(union))
    col_ok[col_ok] &= union[col[col_ok]] == fold_t[col_ok]
    r, cidx = np.nonzero(col_ok)
    mask[members[r], col[r, cidx]] = True
    return union, mask
