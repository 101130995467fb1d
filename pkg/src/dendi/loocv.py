"""Leave-one-out predictive log-likelihoods of fit recipes.

A *recipe* turns a training set into a fitted form, including any split
search. ``loocv_score`` reruns the whole recipe on each of the ``n``
training sets. Two routes compute the same numbers:

* ``naive`` refits from scratch on every fold (any family);
* ``fast`` (Gaussian only) enumerates each fold's candidate splits in one
  vectorized pass and obtains every fold's training RSS and held-out
  prediction from the hat matrix of the full-data design.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from joblib import Parallel, delayed

from .config import DendiConfig
from .exceptions import (AllCandidatesDegenerate, DegenerateColumn, EmptyGrid,
                         NonFiniteWeights, RankDeficient, TooManyFailedFolds)
from .forms import (LEFT, RIGHT, FormSpec, MultiplicativeCombo, Null, PiecewiseConstant,
                    Tree, build_design, design_from_keys, joint_keys)
from .glm import LN2PI, Gaussian, fit_irls
from .search import (DEFAULT_GRID_SIZE, DEFAULT_MIN_NODE, SearchResult,
                     fit_best, fold_grid, improves, make_grid, node_rows,
                     second_split_candidates, single_split_candidates)

FOLD_ERRORS = (AllCandidatesDegenerate, DegenerateColumn, EmptyGrid, NonFiniteWeights,
               RankDeficient)
LEVERAGE_TOL = 1e-10
# rss - e^2/(1-h) carries rounding error of order eps * rss; below this it is an exact fit
RSS_ZERO = 1e-12


@dataclass(frozen=True, eq=False)
class LoocvResult:
    per_obs: np.ndarray
    mean: float
    se: float
    n_failed_folds: int = 0

    @classmethod
    def from_values(cls, per_obs, n_failed_folds: int = 0) -> "LoocvResult":
        per_obs = np.asarray(per_obs, dtype=float)
        n = len(per_obs)
        if n > 1 and np.all(np.isfinite(per_obs)):
            se = float(np.sqrt(np.var(per_obs, ddof=1) / n))
        else:
            # a fold that predicts its observation with zero variance scores -inf
            se = 0.0 if n <= 1 else np.inf
        return cls(per_obs, float(np.mean(per_obs)), se, int(n_failed_folds))


class Recipe:
    """A fit procedure that can be rerun on any training set."""

    adjust: tuple = ()

    def candidates(self, data) -> list:
        """Candidate forms for ``data``; the recipe fits the best of them."""
        raise NotImplementedError

    def fold_candidates(self, data):
        """Candidates of every leave-one-out fold of ``data``.

        Returns the tie-ordered union of forms and an ``(n, C)`` mask whose
        row ``i`` marks the candidates of the fold without observation ``i``.
        """
        raise NotImplementedError

    def fit(self, data) -> SearchResult:
        cands = self.candidates(data)
        if not cands:
            raise AllCandidatesDegenerate(f"{self!r} has no candidate")
        return fit_best(cands, data, self.adjust)


@dataclass(frozen=True)
class FixedRecipe(Recipe):
    form: FormSpec
    adjust: tuple = ()

    def candidates(self, data):
        return [self.form]

    def fold_candidates(self, data):
        return [self.form], np.ones((data.n, 1), dtype=bool)


@dataclass(frozen=True)
class SplitRecipe(Recipe):
    """One-split form whose threshold is searched on the quantile grid."""

    template: FormSpec
    adjust: tuple = ()
    grid_size: int = DEFAULT_GRID_SIZE
    min_node: int = DEFAULT_MIN_NODE

    def candidates(self, data):
        grid = make_grid(data, self.template.split_variable, self.grid_size, self.min_node)
        return single_split_candidates(self.template, grid)

    def fold_candidates(self, data):
        t, mask = fold_grid(data.X[:, self.template.split_variable], None,
                            self.grid_size, self.min_node)
        return [self.template.with_split(c) for c in t], mask


@dataclass(frozen=True)
class ModifierRecipe(Recipe):
    """Slope break of ``x_j`` searched over modifiers and thresholds."""

    j: int
    modifiers: tuple
    adjust: tuple = ()
    grid_size: int = DEFAULT_GRID_SIZE
    min_node: int = DEFAULT_MIN_NODE

    def _parts(self):
        return [SplitRecipe(MultiplicativeCombo(self.j, k), self.adjust,
                            self.grid_size, self.min_node) for k in self.modifiers]

    def candidates(self, data):
        out = []
        for part in self._parts():
            try:
                out.extend(part.candidates(data))
            except EmptyGrid:
                continue
        return out

    def fold_candidates(self, data):
        forms, masks = [], []
        for part in self._parts():
            f, m = part.fold_candidates(data)
            forms.extend(f)
            masks.append(m)
        return _tie_ordered(forms, masks, data.n)


@dataclass(frozen=True)
class SecondSplitRecipe(Recipe):
    """Tree grown from a fixed first split by a searched second split."""

    base: PiecewiseConstant
    modifiers: tuple
    adjust: tuple = ()
    grid_size: int = DEFAULT_GRID_SIZE
    min_node: int = DEFAULT_MIN_NODE

    def candidates(self, data):
        return second_split_candidates(self.base, data, self.modifiers,
                                       self.grid_size, self.min_node)

    def fold_candidates(self, data):
        b = self.base
        forms, masks = [], []
        for node in (LEFT, RIGHT):
            rows = node_rows(data, b, node)
            for k in self.modifiers:
                lower, upper = -np.inf, np.inf
                if k == b.j:
                    if node == LEFT:
                        upper = b.c
                    else:
                        lower = b.c
                t, m = fold_grid(data.X[:, k], rows, self.grid_size, self.min_node,
                                 lower, upper)
                forms.extend(Tree(b.j, b.c, node, k, float(c2)) for c2 in t)
                masks.append(m)
        return _tie_ordered(forms, masks, data.n)


def _tie_ordered(forms, masks, n):
    if not forms:
        return [], np.zeros((n, 0), dtype=bool)
    mask = np.concatenate(masks, axis=1)
    order = sorted(range(len(forms)), key=lambda i: forms[i].tie_key())
    return [forms[i] for i in order], mask[:, order]


def _gaussian_loo(D: np.ndarray, y: np.ndarray):
    """Training deviance and held-out log-likelihood of every fold for design ``D``.

    Returns ``None`` when ``D`` is rank deficient on the full data. Folds in
    which removing the observation makes ``D`` singular (leverage 1) are
    flagged in the returned ``ok`` mask.
    """
    n = D.shape[0]
    Q, R = np.linalg.qr(D)
    d = np.abs(np.diag(R))
    if d.size == 0 or d.max() == 0.0 or d.min() <= 1e-10 * d.max():
        return None
    h = np.einsum("ij,ij->i", Q, Q)
    e = y - Q @ (Q.T @ y)
    rss = float(e @ e)
    ok = h < 1.0 - LEVERAGE_TOL
    denom = np.where(ok, 1.0 - h, 1.0)
    loo_resid = e / denom
    rss_train = rss - e**2 / denom
    rss_train[rss_train <= RSS_ZERO * rss] = 0.0
    disp = np.maximum(rss_train / (n - 1), np.finfo(float).tiny)
    with np.errstate(over="ignore"):
        ll = -0.5 * (LN2PI + np.log(disp)) - loo_resid**2 / (2.0 * disp)
    m = n - 1
    dev_train = m * (LN2PI + np.log(np.maximum(rss_train / m, np.finfo(float).tiny)) + 1.0)
    return dev_train, ll, ok


def _loocv_fast(recipe: Recipe, data):
    y = data.y
    n = data.n
    null = _gaussian_loo(build_design(Null(), data, check=False).values, y)
    if null is None:
        raise RankDeficient("null model design is rank deficient")

    forms, mask = recipe.fold_candidates(data)
    best_dev = np.full(n, np.inf)
    per_obs = np.full(n, np.nan)
    for c, form in enumerate(forms):
        col = mask[:, c]
        if not col.any():
            continue
        D = build_design(form, data, recipe.adjust, check=False).values
        res = _gaussian_loo(D, y)
        if res is None:
            continue
        dev_train, ll, ok = res
        first = ~np.isfinite(best_dev)
        with np.errstate(invalid="ignore"):
            better = first | improves(dev_train, best_dev)
        upd = col & ok & better
        best_dev[upd] = dev_train[upd]
        per_obs[upd] = ll[upd]
    failed = ~np.isfinite(best_dev)
    per_obs[failed] = null[1][failed]
    return per_obs, int(failed.sum())


def _fold_prediction(recipe: Recipe, data, i: int):
    train = data.drop(i)
    failed = False
    try:
        res = recipe.fit(train)
        form, fit, adjust = res.best_form, res.fit, recipe.adjust
    except FOLD_ERRORS:
        failed = True
        form, adjust = Null(), ()
        fit = fit_irls(build_design(form, train), train.y, train.family)
    keys = joint_keys([form, *adjust], data.q, data.confounder_names)
    row = design_from_keys(keys, data.X[i:i + 1], data.Z[i:i + 1]).values
    eta = float((row @ fit.coefficients)[0])
    ll = float(data.family.loglik(data.y[i], eta, fit.dispersion))
    return ll, failed


def _loocv_naive(recipe: Recipe, data, workers: int = 1):
    if workers > 1:
        out = Parallel(n_jobs=workers)(
            delayed(_fold_prediction)(recipe, data, i) for i in range(data.n))
    else:
        out = [_fold_prediction(recipe, data, i) for i in range(data.n)]
    per_obs = np.array([o[0] for o in out])
    return per_obs, sum(o[1] for o in out)


def loocv_score(recipe: Recipe, data, config: DendiConfig = None,
                method: str = None) -> LoocvResult:
    """Leave-one-out predictive log-likelihoods of ``recipe`` on ``data``.

    Folds whose recipe cannot be fitted fall back to the null model's
    prediction for that fold and are counted in ``n_failed_folds``.

    Raises
    ------
    TooManyFailedFolds
        If more than ``config.max_failed_share`` of the folds failed.
    """
    config = config or DendiConfig()
    if data.n < 3:
        raise ValueError("LOOCV needs at least 3 observations")
    method = method or config.loocv_method
    if method == "auto":
        method = "fast" if isinstance(data.family, Gaussian) else "naive"
    if method == "fast":
        if not isinstance(data.family, Gaussian):
            raise ValueError("the fast LOOCV route is only available for the gaussian family")
        per_obs, failed = _loocv_fast(recipe, data)
    else:
        per_obs, failed = _loocv_naive(recipe, data, config.workers)
    if failed > config.max_failed_share * data.n:
        raise TooManyFailedFolds(f"{failed} of {data.n} folds failed for {recipe!r}")
    return LoocvResult.from_values(per_obs, failed)


def one_se_gate(candidate: LoocvResult, reference: LoocvResult,
                config: DendiConfig = None) -> bool:
    """True iff ``candidate`` beats ``reference`` by more than its standard error."""
    mult = 1.0 if config is None else config.se_multiplier
    if len(candidate.per_obs) != len(reference.per_obs):
        raise ValueError("both results must come from the same observations")
    if not np.isfinite(reference.mean):
        return candidate.mean > reference.mean
    return candidate.mean > reference.mean + mult * reference.se
