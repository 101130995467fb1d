"""Simulation scenarios and replicated detection-rate experiments.

Scenarios 1-5 have a single standard-normal covariate with a linear, piecewise
constant, additive, slope-break and tree-structured effect respectively.
Scenario 6 has five covariates: ``x1`` modified by ``x2``, a tree-structured
interaction of ``x3`` and ``x4``, and a noise covariate ``x5``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .config import DendiConfig
from .data import Dataset
from .engine import run_dendi

SCENARIOS = (1, 2, 3, 4, 5, 6)
LABELS = ("N", "L", "P", "A", "M", "T")
DEFAULT_NS = (200, 500, 800)
DEFAULT_SIGMAS = (1.0, 1.5, 2.0)

# scenario -> label of the true effect of x1
_UNIVARIATE_TARGETS = {1: "L", 2: "P", 3: "A", 4: "M", 5: "T"}
MULTIVARIATE_TARGETS = ("x1(x2)", "x3,x4", "x5")


def n_covariates(scenario: int) -> int:
    return 5 if scenario == 6 else 1


def targets(scenario: int) -> tuple:
    if scenario == 6:
        return MULTIVARIATE_TARGETS
    return (f"x1 ({_UNIVARIATE_TARGETS[scenario]})",)


def signal(scenario: int, X: np.ndarray) -> np.ndarray:
    """Noise-free outcome of ``scenario`` at covariates ``X``."""
    x = X[:, 0]
    if scenario == 1:
        return 0.5 * x
    if scenario == 2:
        return 1.0 * (x > 0)
    if scenario == 3:
        return 0.7 * x + 1.4 * (x > 0)
    if scenario == 4:
        return 0.6 * x + 1.2 * (x > 0) * x
    if scenario == 5:
        return 1.0 - 1.0 * (x <= 0) + 2.0 * (x > 0.675)
    if scenario == 6:
        x1, x2, x3, x4 = X[:, 0], X[:, 1], X[:, 2], X[:, 3]
        return 0.6 * x1 + 1.2 * (x2 > 0) * x1 + 1.0 * (x3 > 0) + 2.0 * ((x3 > 0) & (x4 > 0))
    raise ValueError(f"unknown scenario {scenario!r}; expected 1-6")


def replication_seed(base_seed: int, scenario: int, n: int, sigma: float,
                     rep: int) -> np.random.SeedSequence:
    """Independent seed per (scenario, cell, replication), insensitive to run order."""
    return np.random.SeedSequence(
        int(base_seed), spawn_key=(int(scenario), int(n), int(round(sigma * 1e6)), int(rep)))


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: int
    n: int
    sigma: float
    seed: object = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")
        if self.n < 1 or not self.sigma > 0:
            raise ValueError("n must be positive and sigma > 0")

    def rng(self) -> np.random.Generator:
        seed = self.seed
        if not isinstance(seed, np.random.SeedSequence):
            seed = np.random.SeedSequence(seed)
        return np.random.Generator(np.random.Philox(seed))


def generate(spec: ScenarioSpec, rng: np.random.Generator = None) -> Dataset:
    rng = spec.rng() if rng is None else rng
    X = rng.standard_normal((spec.n, n_covariates(spec.scenario)))
    y = signal(spec.scenario, X) + spec.sigma * rng.standard_normal(spec.n)
    return Dataset(y, X, family="gaussian")


def explained_variance(spec: ScenarioSpec) -> float:
    """Share of the outcome's sample variance due to the covariates."""
    rng = spec.rng()
    X = rng.standard_normal((spec.n, n_covariates(spec.scenario)))
    f = signal(spec.scenario, X)
    y = f + spec.sigma * rng.standard_normal(spec.n)
    return float(np.var(f) / np.var(y))


@dataclass(frozen=True)
class RunClassification:
    labels: tuple
    partners: tuple
    splits: tuple
    correct: dict = field(default_factory=dict)


def _partner(form):
    if form.kind in ("M", "T"):
        return form.k
    return None


def _first_split(form):
    return form.c if form.kind in ("P", "A", "M", "T") else None


def classify(report, truth) -> RunClassification:
    """Label each covariate's final form and score it against the scenario."""
    scenario = truth.scenario if isinstance(truth, ScenarioSpec) else int(truth)
    forms = report.forms
    labels = tuple(f.kind for f in forms)
    partners = tuple(_partner(f) for f in forms)
    splits = tuple(_first_split(f) for f in forms)
    if scenario == 6:
        x1 = forms[0]
        correct = {
            "x1(x2)": x1.kind == "M" and x1.k == 1,
            "x3,x4": any(f.kind == "T" and f.interaction() == (2, 3) for f in forms),
            "x5": forms[4].kind == "N",
        }
    else:
        want = _UNIVARIATE_TARGETS[scenario]
        f = forms[0]
        ok = f.kind == want and (want not in ("M", "T") or f.k == f.j)
        correct = {targets(scenario)[0]: ok}
    return RunClassification(labels, partners, splits, correct)


def run_replication(scenario: int, n: int, sigma: float, rep: int, base_seed: int,
                    config: DendiConfig) -> RunClassification:
    spec = ScenarioSpec(scenario, n, sigma, replication_seed(base_seed, scenario, n, sigma, rep))
    return classify(run_dendi(generate(spec), config), spec)


@dataclass(frozen=True, eq=False)
class DetectionTable:
    targets: tuple
    cells: tuple
    values: np.ndarray
    R: int

    def rate(self, target: str, n: int, sigma: float) -> float:
        return float(self.values[self.targets.index(target), self.cells.index((n, sigma))])


@dataclass(frozen=True, eq=False)
class GridResult:
    scenario: int
    detection: DetectionTable
    runs: dict

    def label_counts(self, cell) -> np.ndarray:
        """``(p, 6)`` counts of each label per covariate over the cell's runs."""
        runs = self.runs[cell]
        p = len(runs[0].labels)
        out = np.zeros((p, len(LABELS)), dtype=int)
        for run in runs:
            for j, lab in enumerate(run.labels):
                out[j, LABELS.index(lab)] += 1
        return out

    def label_rates(self, cell, covariate: int = 0) -> dict:
        counts = self.label_counts(cell)[covariate]
        return dict(zip(LABELS, counts / counts.sum()))

    def directional_counts(self, cell) -> dict:
        """Counts of (covariate, label, partner) over the cell's runs."""
        out: dict = {}
        for run in self.runs[cell]:
            for j, (lab, k) in enumerate(zip(run.labels, run.partners)):
                out[(j, lab, k)] = out.get((j, lab, k), 0) + 1
        return dict(sorted(out.items(), key=lambda kv: (kv[0][0], LABELS.index(kv[0][1]),
                                                        -1 if kv[0][2] is None else kv[0][2])))

    def split_summary(self, cell, covariate: int = 0, label: str = None) -> dict:
        vals = np.array([r.splits[covariate] for r in self.runs[cell]
                         if r.splits[covariate] is not None
                         and (label is None or r.labels[covariate] == label)], dtype=float)
        if vals.size == 0:
            return {"count": 0}
        q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
        return {"count": int(vals.size), "mean": float(vals.mean()),
                "sd": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
                "min": float(vals.min()), "q1": float(q1), "median": float(med),
                "q3": float(q3), "max": float(vals.max())}


def run_grid(scenario: int, ns=DEFAULT_NS, sigmas=DEFAULT_SIGMAS, R: int = 100,
             config: DendiConfig = None, base_seed: int = 0, workers: int = 1) -> GridResult:
    """Replicate DENDI over every ``(n, sigma)`` cell and tabulate detection rates."""
    if R < 1:
        raise ValueError("R must be at least 1")
    config = config or DendiConfig()
    cells = tuple((int(n), float(s)) for n in ns for s in sigmas)
    tasks = [(cell, rep) for cell in cells for rep in range(R)]
    call = delayed(run_replication)
    jobs = (call(scenario, n, s, rep, base_seed, config) for (n, s), rep in tasks)
    if workers > 1:
        results = Parallel(n_jobs=workers)(jobs)
    else:
        results = [f(*a, **kw) for f, a, kw in jobs]
    runs = {cell: results[i * R:(i + 1) * R] for i, cell in enumerate(cells)}
    tgt = targets(scenario)
    values = np.array([[np.mean([r.correct[t] for r in runs[cell]]) for cell in cells]
                       for t in tgt])
    return GridResult(scenario, DetectionTable(tgt, cells, values, R), runs)
