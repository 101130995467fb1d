from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .glm import Family, get_family


@dataclass(frozen=True, eq=False)
class Dataset:
    """Outcome, continuous covariates and confounders for one analysis.

    ``X`` holds the covariates whose functional form is selected; ``Z`` holds
    numeric-coded confounders that enter every model linearly.
    """

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray = None
    family: Family = field(default_factory=lambda: get_family("gaussian"))
    names: tuple = ()
    confounder_names: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        Z = np.empty((len(y), 0)) if self.Z is None else np.asarray(self.Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "family", get_family(self.family))
        if not self.names:
            object.__setattr__(self, "names", tuple(f"x{j + 1}" for j in range(X.shape[1])))
        if not self.confounder_names:
            object.__setattr__(
                self, "confounder_names", tuple(f"z{j + 1}" for j in range(Z.shape[1]))
            )
        if X.shape[0] != len(y) or Z.shape[0] != len(y):
            raise ValueError(
                f"row mismatch: y has {len(y)}, X has {X.shape[0]}, Z has {Z.shape[0]}"
            )
        if len(self.names) != X.shape[1] or len(self.confounder_names) != Z.shape[1]:
            raise ValueError("name lists do not match the number of columns")

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Z.shape[1]

    def validate(self) -> "Dataset":
        """Check the invariants every analysis relies on; return ``self``."""
        for arr, what in ((self.y, "y"), (self.X, "X"), (self.Z, "Z")):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{what} contains missing or non-finite values")
        self.family.check_outcome(self.y)
        if self.n < 2 * (self.q + 6):
            raise ValueError(
                f"need at least {2 * (self.q + 6)} observations for {self.q} confounders, "
                f"got {self.n}"
            )
        if len(set(self.names)) != self.p:
            raise ValueError("covariate names must be distinct")
        return self

    def subset(self, rows) -> "Dataset":
        return Dataset(
            self.y[rows], self.X[rows], self.Z[rows], self.family,
            self.names, self.confounder_names,
        )

    def drop(self, i: int) -> "Dataset":
        """The dataset without observation ``i`` (one LOOCV training set)."""
        keep = np.ones(self.n, dtype=bool)
        keep[i] = False
        return self.subset(keep)
