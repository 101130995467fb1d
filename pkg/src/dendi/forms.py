"""Predictor forms and the design matrices that realize them.

Every form is a frozen dataclass naming a covariate (0-based index into
``Dataset.X``) and, where applicable, its split point(s). A form expands to
a list of *column keys*; a key is a hashable tuple describing one design
column, so identical columns contributed by different forms are merged
structurally rather than by comparing numbers.

Column keys::

    ("lin", j)            x_j
    ("gt", j, c)          I(x_j > c)
    ("le", j, c)          I(x_j <= c)
    ("vary", j, k, c)     I(x_k > c) * x_j
    ("hinge", j, c)       I(x_j > c) * (x_j - c)
    ("cell", conds)       product of indicators, conds = ((var, "le"|"gt", c), ...)
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import ClassVar, Iterable, Sequence

import numpy as np

from .exceptions import DegenerateColumn

INTERCEPT = ("intercept",)

LEFT = "left"
RIGHT = "right"


def _cell(*conds) -> tuple:
    """Canonical key for a conjunction of threshold conditions."""
    by_var: dict = {}
    for var, op, c in conds:
        lo, hi = by_var.get(var, (-np.inf, np.inf))
        if op == "gt":
            lo = max(lo, c)
        else:
            hi = min(hi, c)
        by_var[var] = (lo, hi)
    out = []
    for var in sorted(by_var):
        lo, hi = by_var[var]
        if lo > -np.inf:
            out.append((var, "gt", lo))
        if hi < np.inf:
            out.append((var, "le", hi))
    if len(out) == 1:
        var, op, c = out[0]
        return (op, var, c)
    return ("cell", tuple(out))


@dataclass(frozen=True)
class FormSpec:
    """Base class of the predictor forms."""

    kind: ClassVar[str] = "?"

    def column_keys(self) -> list:
        return []

    def variables(self) -> tuple:
        return ()

    def split_points(self) -> list:
        """``(variable, value)`` pairs of every split in the form."""
        return []

    def tie_key(self) -> tuple:
        return ()

    def interaction(self):
        """Unordered covariate pair if the form couples two covariates."""
        return None

    def describe(self, names: Sequence[str]) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Null(FormSpec):
    kind: ClassVar[str] = "N"

    def describe(self, names):
        return "no effect detected"


@dataclass(frozen=True)
class Linear(FormSpec):
    j: int
    kind: ClassVar[str] = "L"

    def column_keys(self):
        return [("lin", self.j)]

    def variables(self):
        return (self.j,)

    def describe(self, names):
        return f"linear effect of {names[self.j]}"


@dataclass(frozen=True)
class PiecewiseConstant(FormSpec):
    j: int
    c: float = None
    kind: ClassVar[str] = "P"

    @property
    def split_variable(self):
        return self.j

    def with_split(self, c):
        return replace(self, c=float(c))

    def column_keys(self):
        return [("gt", self.j, self.c)]

    def variables(self):
        return (self.j,)

    def split_points(self):
        return [(self.j, self.c)]

    def tie_key(self):
        return (self.c,)

    def describe(self, names):
        return f"piecewise constant effect of {names[self.j]} with split at {self.c:.6g}"


@dataclass(frozen=True)
class AdditiveCombo(FormSpec):
    j: int
    c: float = None
    kind: ClassVar[str] = "A"

    @property
    def split_variable(self):
        return self.j

    def with_split(self, c):
        return replace(self, c=float(c))

    def column_keys(self):
        return [("lin", self.j), ("gt", self.j, self.c)]

    def variables(self):
        return (self.j,)

    def split_points(self):
        return [(self.j, self.c)]

    def tie_key(self):
        return (self.c,)

    def describe(self, names):
        return (
            f"linear effect of {names[self.j]} plus a jump in level at {self.c:.6g}"
        )


@dataclass(frozen=True)
class MultiplicativeCombo(FormSpec):
    """Slope of ``x_j`` changes where ``x_k`` crosses ``c``.

    With ``k == j`` the change is a continuous hinge ``I(x_j > c)(x_j - c)``;
    otherwise ``x_k`` acts as an effect modifier, ``I(x_k > c) x_j``.
    """

    j: int
    k: int
    c: float = None
    kind: ClassVar[str] = "M"

    @property
    def split_variable(self):
        return self.k

    def with_split(self, c):
        return replace(self, c=float(c))

    def column_keys(self):
        if self.k == self.j:
            return [("lin", self.j), ("hinge", self.j, self.c)]
        return [("lin", self.j), ("vary", self.j, self.k, self.c)]

    def variables(self):
        return (self.j,) if self.k == self.j else (self.j, self.k)

    def split_points(self):
        return [(self.k, self.c)]

    def tie_key(self):
        return (self.k, self.c)

    def interaction(self):
        return None if self.k == self.j else tuple(sorted((self.j, self.k)))

    def describe(self, names):
        if self.k == self.j:
            return f"slope of {names[self.j]} changes at {self.c:.6g} (continuous break)"
        return (
            f"slope of {names[self.j]} modified by {names[self.k]} "
            f"(changes where {names[self.k]} > {self.c:.6g})"
        )


@dataclass(frozen=True)
class Tree(FormSpec):
    """Three-leaf tree: first split of ``x_j`` at ``c``, second split of
    ``x_k`` at ``c2`` inside the ``node`` side of the first split."""

    j: int
    c: float
    node: str
    k: int
    c2: float = None
    kind: ClassVar[str] = "T"

    def __post_init__(self):
        if self.node not in (LEFT, RIGHT):
            raise ValueError(f"node must be 'left' or 'right', got {self.node!r}")
        if self.c2 is not None and self.k == self.j:
            if self.node == LEFT and not self.c2 < self.c:
                raise ValueError("a left-node split of the same variable needs c2 < c")
            if self.node == RIGHT and not self.c2 > self.c:
                raise ValueError("a right-node split of the same variable needs c2 > c")

    @property
    def split_variable(self):
        return self.k

    def with_split(self, c2):
        return replace(self, c2=float(c2))

    def column_keys(self):
        if self.node == LEFT:
            return [
                ("gt", self.j, self.c),
                _cell((self.j, "le", self.c), (self.k, "gt", self.c2)),
            ]
        return [
            ("le", self.j, self.c),
            _cell((self.j, "gt", self.c), (self.k, "gt", self.c2)),
        ]

    def variables(self):
        return (self.j,) if self.k == self.j else (self.j, self.k)

    def split_points(self):
        return [(self.j, self.c), (self.k, self.c2)]

    def tie_key(self):
        return (self.k, 0 if self.node == LEFT else 1, self.c2)

    def interaction(self):
        return None if self.k == self.j else tuple(sorted((self.j, self.k)))

    def describe(self, names):
        return (
            f"tree-structured effect of {names[self.j]}: split at {self.c:.6g}, "
            f"second split in the {self.node} node on {names[self.k]} at {self.c2:.6g}"
        )


FORM_TYPES = {cls.kind: cls for cls in (Null, Linear, PiecewiseConstant, AdditiveCombo,
                                        MultiplicativeCombo, Tree)}


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    values: np.ndarray
    column_labels: tuple
    keys: tuple

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def column_label(key, names: Sequence[str]) -> str:
    tag = key[0]
    if tag == "intercept":
        return "intercept"
    if tag == "lin":
        return names[key[1]]
    if tag == "gt":
        return f"I({names[key[1]]}>{key[2]!r})"
    if tag == "le":
        return f"I({names[key[1]]}<={key[2]!r})"
    if tag == "vary":
        return f"I({names[key[2]]}>{key[3]!r})*{names[key[1]]}"
    if tag == "hinge":
        return f"I({names[key[1]]}>{key[2]!r})*({names[key[1]]}-{key[2]!r})"
    if tag == "cell":
        parts = [f"{names[v]}{'>' if op == 'gt' else '<='}{c!r}" for v, op, c in key[1]]
        return f"I({' & '.join(parts)})"
    if tag == "z":
        return key[2]
    raise ValueError(f"unknown column key {key!r}")


def evaluate_column(key, X: np.ndarray, Z: np.ndarray = None) -> np.ndarray:
    tag = key[0]
    if tag == "intercept":
        return np.ones(X.shape[0])
    if tag == "lin":
        return X[:, key[1]].astype(float)
    if tag == "gt":
        return (X[:, key[1]] > key[2]).astype(float)
    if tag == "le":
        return (X[:, key[1]] <= key[2]).astype(float)
    if tag == "vary":
        _, j, k, c = key
        return (X[:, k] > c) * X[:, j]
    if tag == "hinge":
        _, j, c = key
        return (X[:, j] > c) * (X[:, j] - c)
    if tag == "cell":
        col = np.ones(X.shape[0], dtype=bool)
        for var, op, c in key[1]:
            col &= (X[:, var] > c) if op == "gt" else (X[:, var] <= c)
        return col.astype(float)
    if tag == "z":
        return Z[:, key[1]].astype(float)
    raise ValueError(f"unknown column key {key!r}")


def joint_keys(forms: Iterable[FormSpec], q: int = 0, confounder_names=()) -> list:
    """Intercept, the forms' columns in order without duplicates, then confounders."""
    keys = [INTERCEPT]
    seen = {INTERCEPT}
    for form in forms:
        for key in form.column_keys():
            if key not in seen:
                seen.add(key)
                keys.append(key)
    names = tuple(confounder_names) or tuple(f"z{i + 1}" for i in range(q))
    keys.extend(("z", i, names[i]) for i in range(q))
    return keys


def design_from_keys(keys, X, Z=None, names=None, check: bool = False) -> DesignMatrix:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Z is None:
        Z = np.empty((X.shape[0], 0))
    names = names or tuple(f"x{j + 1}" for j in range(X.shape[1]))
    cols = [evaluate_column(key, X, Z) for key in keys]
    values = np.column_stack(cols) if cols else np.empty((X.shape[0], 0))
    if check:
        for key, col in zip(keys, cols):
            if key[0] not in ("intercept", "z") and np.ptp(col) == 0.0:
                raise DegenerateColumn(f"column {column_label(key, names)} is constant")
    labels = tuple(column_label(key, names) for key in keys)
    return DesignMatrix(values, labels, tuple(keys))


def build_design(form: FormSpec, data, adjust: Sequence[FormSpec] = (),
                 check: bool = True) -> DesignMatrix:
    """Design matrix for ``form`` adjusted for ``adjust`` and the confounders.

    Columns are the intercept, the columns of ``form``, the columns of every
    adjustment form not already present, and one column per confounder.

    Raises
    ------
    DegenerateColumn
        If ``check`` is true and a covariate-derived column is constant.
    """
    keys = joint_keys([form, *adjust], data.q, data.confounder_names)
    return design_from_keys(keys, data.X, data.Z, data.names, check=check)
