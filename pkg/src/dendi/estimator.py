"""scikit-learn compatible wrapper around the DENDI procedure."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .config import DendiConfig
from .data import Dataset
from .engine import run_dendi
from .forms import design_from_keys
from .glm import get_family


class DendiRegressor(RegressorMixin, TransformerMixin, BaseEstimator):
    """Select interpretable covariate effects and fit the resulting GLM.

    Parameters
    ----------
    family : {"gaussian", "binomial", "poisson"}
    grid_size : int
        Number of inner quantiles tried as split points.
    min_node : int
        Minimum number of observations on each side of a split.
    se_multiplier : float
        Multiple of the reference model's standard error a richer model must
        exceed; 1 is the one-standard-error rule.
    confounders : sequence of int, optional
        Columns of ``X`` entered linearly in every model instead of being
        subject to form selection.
    candidate_modifiers : {"all", "step1-selected"}
        Covariates allowed as effect modifiers or second-split variables.
    n_jobs : int
        Workers for the per-fold refits of non-Gaussian families.

    Attributes
    ----------
    report_ : DendiReport
    forms_ : list of FormSpec
        Selected form of every non-confounder column, in column order.
    coef_ : ndarray
        Coefficients of the joint refit, matching ``feature_names_out_``.
    """

    def __init__(self, family="gaussian", grid_size=9, min_node=10, se_multiplier=1.0,
                 confounders=None, candidate_modifiers="all", n_jobs=1):
        self.family = family
        self.grid_size = grid_size
        self.min_node = min_node
        self.se_multiplier = se_multiplier
        self.confounders = confounders
        self.candidate_modifiers = candidate_modifiers
        self.n_jobs = n_jobs

    def _split(self, X):
        conf = list(self.confounders or [])
        cov = [c for c in range(X.shape[1]) if c not in conf]
        return X[:, cov], X[:, conf], cov, conf

    def _config(self) -> DendiConfig:
        return DendiConfig(grid_size=self.grid_size, min_node=self.min_node,
                           se_multiplier=self.se_multiplier,
                           confounder_columns=tuple(self.confounders or ()),
                           candidate_modifiers=self.candidate_modifiers,
                           workers=self.n_jobs or 1)

    def fit(self, X, y):
        names = getattr(X, "columns", None)
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        Xc, Z, cov, conf = self._split(X)
        if not cov:
            raise ValueError("at least one non-confounder column is required")
        need = 2 * (len(conf) + 6)
        if X.shape[0] < need:
            raise ValueError(f"n_samples = {X.shape[0]} is too small; at least {need} are "
                             f"required with {len(conf)} confounder(s)")
        all_names = ([str(c) for c in names] if names is not None
                     else [f"x{i + 1}" for i in range(X.shape[1])])
        if names is not None:
            self.feature_names_in_ = np.asarray(all_names, dtype=object)
        data = Dataset(y, Xc, Z, self.family, tuple(all_names[c] for c in cov),
                       tuple(all_names[c] for c in conf))
        self.report_ = run_dendi(data, self._config())
        self.forms_ = list(self.report_.forms)
        self.coef_ = self.report_.coefficients
        self.feature_names_out_ = np.asarray(self.report_.column_labels, dtype=object)
        return self

    def _design(self, X):
        check_is_fitted(self, "report_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        Xc, Z, _, _ = self._split(X)
        return design_from_keys(self.report_.column_keys, Xc, Z, self.report_.names).values

    def decision_function(self, X):
        """Linear predictor of the selected joint model."""
        return self._design(X) @ self.coef_

    def predict(self, X):
        """Expected outcome on the response scale."""
        eta = self.decision_function(X)
        return get_family(self.report_.family).inverse_link(eta)

    def transform(self, X):
        """Columns of the selected joint model (intercept first)."""
        return self._design(X)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "report_")
        return self.feature_names_out_
