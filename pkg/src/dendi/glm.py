"""Generalized linear model fitting by IRLS for a fixed design matrix.

Three families are supported: Gaussian with identity link, Bernoulli with
logit link and Poisson with log link. The Gaussian dispersion is the
maximum-likelihood estimate ``RSS / n`` so that predictive log-likelihoods
use the plug-in density.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar, Sequence

import numpy as np
import scipy.linalg
from scipy.special import expit, gammaln, logit

from .exceptions import NonFiniteWeights, RankDeficient

LN2PI = np.log(2.0 * np.pi)
MU_CLAMP = 1e-12
RANK_TOL = 1e-10
MAX_ITER = 50
DEV_TOL = 1e-8


class Family:
    """Exponential family with its canonical link."""

    name: ClassVar[str]
    tag: ClassVar[str]

    def link(self, mu):
        raise NotImplementedError

    def inverse_link(self, eta):
        raise NotImplementedError

    def mu_eta(self, eta):
        """Derivative of the inverse link with respect to ``eta``."""
        raise NotImplementedError

    def variance(self, mu):
        raise NotImplementedError

    def start_mu(self, y):
        raise NotImplementedError

    def loglik(self, y, eta, dispersion=1.0):
        """Per-observation log-likelihood, vectorized over ``y`` and ``eta``."""
        raise NotImplementedError

    def check_outcome(self, y) -> None:
        if not np.all(np.isfinite(y)):
            raise ValueError("outcome contains non-finite values")

    def __eq__(self, other):
        return isinstance(other, Family) and other.name == self.name

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return f"{type(self).__name__}()"


class Gaussian(Family):
    name = "gaussian"
    tag = "gaussian-identity"

    def link(self, mu):
        return np.asarray(mu, dtype=float)

    def inverse_link(self, eta):
        return np.asarray(eta, dtype=float)

    def mu_eta(self, eta):
        return np.ones_like(np.asarray(eta, dtype=float))

    def variance(self, mu):
        return np.ones_like(np.asarray(mu, dtype=float))

    def start_mu(self, y):
        return np.asarray(y, dtype=float)

    def loglik(self, y, eta, dispersion=1.0):
        resid = np.asarray(y, dtype=float) - np.asarray(eta, dtype=float)
        with np.errstate(over="ignore"):
            return -0.5 * (LN2PI + np.log(dispersion)) - resid**2 / (2.0 * dispersion)


class Binomial(Family):
    name = "binomial"
    tag = "bernoulli-logit"

    def link(self, mu):
        return logit(np.asarray(mu, dtype=float))

    def inverse_link(self, eta):
        return expit(np.asarray(eta, dtype=float))

    def mu_eta(self, eta):
        mu = expit(np.asarray(eta, dtype=float))
        return mu * (1.0 - mu)

    def variance(self, mu):
        mu = np.asarray(mu, dtype=float)
        return mu * (1.0 - mu)

    def start_mu(self, y):
        return (np.asarray(y, dtype=float) + 0.5) / 2.0

    def loglik(self, y, eta, dispersion=1.0):
        y = np.asarray(y, dtype=float)
        mu = np.clip(expit(np.asarray(eta, dtype=float)), MU_CLAMP, 1.0 - MU_CLAMP)
        return y * np.log(mu) + (1.0 - y) * np.log1p(-mu)

    def check_outcome(self, y) -> None:
        super().check_outcome(y)
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("binomial outcome must be coded 0/1")


class Poisson(Family):
    name = "poisson"
    tag = "poisson-log"
    # exp() overflows just above 709
    _ETA_MAX = 700.0

    def link(self, mu):
        return np.log(np.asarray(mu, dtype=float))

    def inverse_link(self, eta):
        return np.exp(np.minimum(np.asarray(eta, dtype=float), self._ETA_MAX))

    def mu_eta(self, eta):
        return self.inverse_link(eta)

    def variance(self, mu):
        return np.asarray(mu, dtype=float)

    def start_mu(self, y):
        return np.asarray(y, dtype=float) + 0.1

    def loglik(self, y, eta, dispersion=1.0):
        y = np.asarray(y, dtype=float)
        eta = np.minimum(np.asarray(eta, dtype=float), self._ETA_MAX)
        return y * eta - np.exp(eta) - gammaln(y + 1.0)

    def check_outcome(self, y) -> None:
        super().check_outcome(y)
        if not np.all((y >= 0) & (y == np.floor(y))):
            raise ValueError("poisson outcome must be nonnegative integers")


_FAMILIES = {
    "gaussian": Gaussian,
    "gaussian-identity": Gaussian,
    "normal": Gaussian,
    "binomial": Binomial,
    "bernoulli": Binomial,
    "bernoulli-logit": Binomial,
    "logistic": Binomial,
    "poisson": Poisson,
    "poisson-log": Poisson,
}


def get_family(family: str | Family) -> Family:
    if isinstance(family, Family):
        return family
    try:
        return _FAMILIES[str(family).lower()]()
    except KeyError:
        raise ValueError(
            f"unknown family {family!r}; expected one of gaussian, binomial, poisson"
        ) from None


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of one maximum-likelihood fit."""

    coefficients: np.ndarray
    eta: np.ndarray
    loglik: float
    per_obs_loglik: np.ndarray
    deviance: float
    dispersion: float
    converged: bool
    iterations: int
    labels: tuple = field(default=())

    def predict_eta(self, design) -> np.ndarray:
        return np.asarray(design, dtype=float) @ self.coefficients


def _as_matrix(design) -> tuple[np.ndarray, tuple]:
    values = getattr(design, "values", design)
    labels = tuple(getattr(design, "column_labels", ()))
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("design must be a 2-D matrix")
    return values, labels


def check_rank(X: np.ndarray, labels: Sequence[str] = ()) -> None:
    """Raise RankDeficient unless ``X`` has full column rank.

    Uses a column-pivoted QR; a pivot below ``1e-10`` times the largest
    pivot counts as a dependent column.
    """
    n, m = X.shape
    if m > n:
        raise RankDeficient(f"{m} columns but only {n} observations")
    if m == 0:
        return
    _, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    bad = d <= RANK_TOL * d[0]
    if d[0] == 0.0 or np.any(bad):
        dropped = [labels[i] if labels else i for i in piv[bad]] if d[0] else "all"
        raise RankDeficient(f"collinear design columns: {dropped}")


def gaussian_dispersion(rss: float, n: int) -> float:
    return max(rss / n, np.finfo(float).tiny)


def fit_irls(design, y, family: str | Family = "gaussian") -> FitResult:
    """Fit a GLM by iteratively reweighted least squares.

    Parameters
    ----------
    design : DesignMatrix or array_like, shape (n, m)
        Full-rank design matrix, intercept included by the caller.
    y : array_like, shape (n,)
        Outcome vector.
    family : str or Family
        ``"gaussian"``, ``"binomial"`` or ``"poisson"``.

    Returns
    -------
    FitResult
        For the Gaussian family this is the ordinary least-squares solution
        obtained in a single step.

    Raises
    ------
    RankDeficient
        If the design columns are collinear.
    NonFiniteWeights
        If the first iteration already produces non-finite weights. Later
        breakdowns (separation) return the last finite iterate with
        ``converged=False``.
    """
    X, labels = _as_matrix(design)
    y = np.asarray(y, dtype=float)
    fam = get_family(family)
    n = X.shape[0]
    if y.shape != (n,):
        raise ValueError(f"design has {n} rows but y has shape {y.shape}")
    check_rank(X, labels)

    if isinstance(fam, Gaussian):
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        eta = X @ beta
        dispersion = gaussian_dispersion(float(np.sum((y - eta) ** 2)), n)
        ll = fam.loglik(y, eta, dispersion)
        total = float(np.sum(ll))
        return FitResult(beta, eta, total, ll, -2.0 * total, dispersion, True, 1, labels)

    mu = fam.start_mu(y)
    eta = fam.link(mu)
    beta = np.zeros(X.shape[1])
    dev_old = np.inf
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        d = fam.mu_eta(eta)
        var = fam.variance(fam.inverse_link(eta))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            z = eta + (y - fam.inverse_link(eta)) / d
            w = d**2 / var
        keep = w > 0
        sw = np.sqrt(w[keep])
        finite = np.all(np.isfinite(w)) and np.all(np.isfinite(z[keep]))
        if finite and keep.any():
            new_beta, *_ = np.linalg.lstsq(X[keep] * sw[:, None], z[keep] * sw, rcond=None)
            finite = np.all(np.isfinite(new_beta))
        if not finite or not keep.any():
            # separation drives fitted means to 0 or 1; keep the last finite iterate
            if it == 1:
                raise NonFiniteWeights(f"non-finite IRLS weights at iteration {it}")
            it -= 1
            break
        beta = new_beta
        eta = X @ beta
        dev = -2.0 * float(np.sum(fam.loglik(y, eta)))
        if abs(dev - dev_old) / (abs(dev) + 0.1) < DEV_TOL:
            converged = True
            break
        dev_old = dev

    ll = fam.loglik(y, eta)
    total = float(np.sum(ll))
    return FitResult(beta, eta, total, ll, -2.0 * total, 1.0, converged, it, labels)


def per_obs_loglik(family: str | Family, y_i, eta_i, dispersion: float = 1.0) -> float:
    """Log-likelihood of a single observation under the fitted family."""
    fam = get_family(family)
    if isinstance(fam, Gaussian) and not dispersion > 0:
        raise ValueError("gaussian dispersion must be positive")
    return float(fam.loglik(np.asarray(y_i, dtype=float), np.asarray(eta_i, dtype=float), dispersion))


def deviance_of(fit: FitResult) -> float:
    """Minus two times the log-likelihood of ``fit``."""
    return -2.0 * fit.loglik
