"""The two-step DENDI selection procedure.

Step 1 compares a linear and a piecewise constant effect of each covariate
against the null model. Step 2 tries the two refinements of the step-1
winner, each adjusted for the step-1 effects of all other covariates. A
richer model is accepted only if its mean LOOCV log-likelihood exceeds the
simpler model's by more than one standard error of the simpler model.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import DendiConfig
from .data import Dataset
from .exceptions import DendiError, RankDeficient
from .forms import (AdditiveCombo, FormSpec, Linear, Null, PiecewiseConstant,
                    column_label, design_from_keys, joint_keys)
from .glm import FitResult, fit_irls, get_family
from .loocv import (FixedRecipe, LoocvResult, ModifierRecipe, SecondSplitRecipe,
                    SplitRecipe, loocv_score, one_se_gate)

logger = logging.getLogger(__name__)

CURVE_POINTS = 101


@dataclass(frozen=True, eq=False)
class StepOutcome:
    covariate: int
    step: int
    selected: FormSpec
    reference_loocv: LoocvResult
    candidate_loocvs: dict
    gate_passed: bool
    best_kind: str = None
    reference_kind: str = "N"
    candidate_forms: dict = field(default_factory=dict)
    unavailable: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class DendiReport:
    names: tuple
    confounder_names: tuple
    family: str
    config: DendiConfig
    step1: list
    step2: dict
    forms: list
    fit: FitResult
    column_keys: tuple
    column_labels: tuple
    coefficients: np.ndarray
    dropped_columns: tuple
    interactions: list
    reference_point: np.ndarray
    curves: dict

    def final_outcome(self, j: int) -> StepOutcome:
        return self.step2.get(j, self.step1[j])

    def labels(self) -> list:
        return [f.kind for f in self.forms]

    def split_points(self) -> dict:
        return {self.names[j]: [(self.names[v], c) for v, c in f.split_points()]
                for j, f in enumerate(self.forms) if f.split_points()}

    def predict_eta(self, X, Z=None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if Z is None:
            Z = np.zeros((X.shape[0], len(self.confounder_names)))
        D = design_from_keys(self.column_keys, X, np.asarray(Z, dtype=float), self.names)
        return D.values @ self.coefficients

    def summary(self) -> str:
        lines = []
        for j, form in enumerate(self.forms):
            lines.append(f"{self.names[j]}: {form.describe(self.names)}")
        if self.interactions:
            pairs = ", ".join(f"{self.names[a]}:{self.names[b]}" for a, b in self.interactions)
            lines.append(f"interactions: {pairs}")
        return "\n".join(lines)


def _modifiers(j: int, step1_all, p: int, config: DendiConfig) -> tuple:
    if config.candidate_modifiers == "all":
        return tuple(range(p))
    chosen = {o.covariate for o in step1_all if o.selected.kind != "N"}
    return tuple(sorted(chosen | {j}))


def _evaluate(name, recipe, data, config, scores, forms, unavailable):
    """Full-data fit plus LOOCV of one candidate kind; failures mark it absent."""
    try:
        forms[name] = recipe.fit(data).best_form
        scores[name] = loocv_score(recipe, data, config)
    except DendiError as exc:
        forms.pop(name, None)
        unavailable[name] = f"{type(exc).__name__}: {exc}"


def null_loocv(data: Dataset, config: DendiConfig = None) -> LoocvResult:
    return loocv_score(FixedRecipe(Null()), data, config)


def step1(j: int, data: Dataset, config: DendiConfig = None,
          null: LoocvResult = None) -> StepOutcome:
    """Linear vs piecewise constant effect of ``x_j``, gated against the null model."""
    config = config or DendiConfig()
    null = null if null is not None else null_loocv(data, config)
    scores, forms, unavailable = {}, {}, {}
    _evaluate("L", FixedRecipe(Linear(j)), data, config, scores, forms, unavailable)
    _evaluate("P", SplitRecipe(PiecewiseConstant(j), (), config.grid_size, config.min_node),
              data, config, scores, forms, unavailable)
    if not scores:
        return StepOutcome(j, 1, Null(), null, scores, False, None, "N", forms, unavailable)
    best = "L" if "L" in scores and ("P" not in scores
                                     or scores["L"].mean >= scores["P"].mean) else "P"
    passed = one_se_gate(scores[best], null, config)
    selected = forms[best] if passed else Null()
    return StepOutcome(j, 1, selected, null, scores, passed, best, "N", forms, unavailable)


def step2(j: int, step1_all, data: Dataset, config: DendiConfig = None) -> StepOutcome:
    """Refinement of the step-1 form of ``x_j``, adjusted for the other step-1 effects."""
    config = config or DendiConfig()
    base = step1_all[j].selected
    if base.kind == "N":
        raise ValueError(f"covariate {j} has no step-1 effect")
    adjust = tuple(o.selected for o in step1_all
                   if o.covariate != j and o.selected.kind != "N")
    modifiers = _modifiers(j, step1_all, data.p, config)
    gs, mn = config.grid_size, config.min_node

    if base.kind == "L":
        kinds = [("A", SplitRecipe(AdditiveCombo(j), adjust, gs, mn)),
                 ("M", ModifierRecipe(j, modifiers, adjust, gs, mn))]
    else:
        kinds = [("A", FixedRecipe(AdditiveCombo(j, base.c), adjust)),
                 ("T", SecondSplitRecipe(base, modifiers, adjust, gs, mn))]

    try:
        reference = loocv_score(FixedRecipe(base, adjust), data, config)
    except DendiError as exc:
        logger.warning("step-2 reference for %s unavailable: %s", data.names[j], exc)
        return StepOutcome(j, 2, base, None, {}, False, None, base.kind, {},
                           {"reference": str(exc)})

    scores, forms, unavailable = {}, {}, {}
    for name, recipe in kinds:
        _evaluate(name, recipe, data, config, scores, forms, unavailable)
    best = None
    for name, _ in kinds:
        if name in scores and (best is None or scores[name].mean > scores[best].mean):
            best = name
    passed = best is not None and one_se_gate(scores[best], reference, config)
    selected = forms[best] if passed else base
    return StepOutcome(j, 2, selected, reference, scores, passed, best, base.kind,
                       forms, unavailable)


def _independent_columns(D: np.ndarray) -> list:
    kept = []
    for c in range(D.shape[1]):
        trial = D[:, kept + [c]]
        if np.linalg.matrix_rank(trial, tol=1e-10 * max(1.0, np.abs(trial).max())) == len(kept) + 1:
            kept.append(c)
    return kept


def joint_fit(forms, data: Dataset):
    """Fit all selected forms jointly; collinear columns are dropped with a warning."""
    keys = joint_keys([f for f in forms if f.kind != "N"], data.q, data.confounder_names)
    D = design_from_keys(keys, data.X, data.Z, data.names)
    try:
        return keys, fit_irls(D, data.y, data.family), ()
    except RankDeficient:
        kept = _independent_columns(D.values)
        dropped = tuple(D.column_labels[c] for c in range(len(keys)) if c not in kept)
        logger.info("dropping collinear columns from the joint fit: %s", dropped)
        keys = [keys[c] for c in kept]
        D = design_from_keys(keys, data.X, data.Z, data.names)
        return keys, fit_irls(D, data.y, data.family), dropped


def effect_curves(report_keys, coefficients, data: Dataset, reference_point,
                  points: int = CURVE_POINTS) -> dict:
    """``(x, eta, mu)`` tables per covariate, other covariates held at ``reference_point``."""
    curves = {}
    Z0 = np.zeros((points, data.q))
    for j in range(data.p):
        grid = np.linspace(data.X[:, j].min(), data.X[:, j].max(), points)
        Xe = np.tile(reference_point, (points, 1))
        Xe[:, j] = grid
        eta = design_from_keys(report_keys, Xe, Z0, data.names).values @ coefficients
        curves[j] = np.column_stack([grid, eta, data.family.inverse_link(eta)])
    return curves


def run_dendi(data: Dataset, config: DendiConfig = None) -> DendiReport:
    """Select a functional form for every covariate and refit the joint model.

    Parameters
    ----------
    data : Dataset
        Outcome, covariates and confounders.
    config : DendiConfig, optional
        Grid, node-size and gate settings.

    Returns
    -------
    DendiReport
    """
    config = config or DendiConfig()
    data.validate()
    if config.family is not None and get_family(config.family) != data.family:
        raise ValueError(
            f"config family {config.family!r} does not match dataset family {data.family.name!r}"
        )
    null = null_loocv(data, config)
    first = [step1(j, data, config, null) for j in range(data.p)]
    second = {o.covariate: step2(o.covariate, first, data, config)
              for o in first if o.selected.kind != "N"}
    forms = [second[j].selected if j in second else first[j].selected for j in range(data.p)]

    keys, fit, dropped = joint_fit(forms, data)
    interactions = sorted({f.interaction() for f in forms if f.interaction() is not None})
    ref = np.median(data.X, axis=0)
    curves = effect_curves(keys, fit.coefficients, data, ref)
    return DendiReport(
        names=data.names,
        confounder_names=data.confounder_names,
        family=data.family.name,
        config=config,
        step1=first,
        step2=second,
        forms=forms,
        fit=fit,
        column_keys=tuple(keys),
        column_labels=tuple(column_label(k, data.names) for k in keys),
        coefficients=fit.coefficients,
        dropped_columns=dropped,
        interactions=interactions,
        reference_point=ref,
        curves=curves,
    )
