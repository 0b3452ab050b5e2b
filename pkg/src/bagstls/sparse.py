"""Sequential thresholding least squares and coordinate-descent lasso."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend
from .core import (
    Dataset,
    DesignStats,
    LinearFit,
    as_support,
    fit_ols,
    fit_restricted_ols,
    zero_fit,
)
from .errors import NoConvergence


class UnstandardizedWarning(UserWarning):
    """Lasso called on covariates that were not standardized."""


@dataclass(frozen=True)
class ThresholdRule:
    """Per-column threshold ``t_j = multiplier * sigma * sqrt(gamma / X_j'X_j)``.

    ``gaussian_tail`` uses ``gamma = 2 log(1/delta)``; when ``delta`` is None
    it defaults to ``1 / n_rows`` of whatever sample is being thresholded.
    ``multiplier`` is 1 for the canonical rule; 2 gives the inflated
    threshold used in some bound derivations.
    """

    kind: str
    sigma: float
    delta: Optional[float] = None
    gamma: Optional[float] = None
    multiplier: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian_tail", "gamma_scaled"):
            raise ValueError(f"unknown threshold rule {self.kind!r}")
        if not self.sigma > 0:
            raise ValueError("threshold sigma must be positive")
        if self.kind == "gaussian_tail" and self.delta is not None:
            if not 0.0 < self.delta < 1.0:
                raise ValueError("delta must lie in (0, 1)")
        if self.kind == "gamma_scaled" and not (self.gamma is not None and self.gamma > 0):
            raise ValueError("gamma_scaled needs gamma > 0")

    @classmethod
    def gaussian_tail(cls, delta=None, sigma=1.0, multiplier=1.0):
        return cls("gaussian_tail", float(sigma), delta=delta, multiplier=multiplier)

    @classmethod
    def gamma_scaled(cls, gamma, sigma=1.0, multiplier=1.0):
        return cls("gamma_scaled", float(sigma), gamma=float(gamma), multiplier=multiplier)

    def effective_gamma(self, n_rows: int) -> float:
        if self.kind == "gamma_scaled":
            return self.gamma
        delta = self.delta if self.delta is not None else 1.0 / n_rows
        return 2.0 * math.log(1.0 / delta)

    def thresholds(self, column_norms_sq, n_rows: int) -> np.ndarray:
        """Per-column thresholds; zero-norm columns get ``inf``."""
        norms = np.asarray(column_norms_sq, dtype=float)
        gamma = self.effective_gamma(n_rows)
        with np.errstate(divide="ignore"):
            t = self.multiplier * self.sigma * np.sqrt(gamma / norms)
        return t

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "sigma": self.sigma, "multiplier": self.multiplier}
        if self.kind == "gamma_scaled":
            out["gamma"] = self.gamma
        else:
            out["delta"] = self.delta
        return out


@dataclass(frozen=True, eq=False)
class SparseFit:
    fit: LinearFit
    inactive_set: tuple
    passes_used: int
    rule: Optional[ThresholdRule] = None
    penalty: Optional[float] = None

    @property
    def support(self) -> tuple:
        return self.fit.support

    @property
    def coefficients(self) -> np.ndarray:
        return self.fit.coefficients


def threshold_support(fit: LinearFit, rule: ThresholdRule, stats) -> tuple:
    """Inactive set ``{j : |b_j| <= t_j}``; equality counts as inactive.

    ``stats`` is a :class:`DesignStats` or a plain vector of column norms
    ``X_j'X_j``.
    """
    norms = stats.column_norms_sq if isinstance(stats, DesignStats) else stats
    t = rule.thresholds(norms, fit.residuals.shape[0])
    return as_support(np.flatnonzero(np.abs(fit.coefficients) <= t))


def stls_fit(
    data: Dataset, target_index: int = 0, rule: ThresholdRule = None, max_passes: int = 2
) -> SparseFit:
    """Sequential thresholding least squares.

    Each pass thresholds the current fit and refits OLS on the survivors.
    ``max_passes=2`` (OLS, threshold, refit, threshold, refit) is the
    variant with known error bounds; larger values iterate further and stop
    as soon as the support no longer changes.
    """
    if rule is None:
        raise ValueError("stls_fit needs a ThresholdRule")
    if max_passes < 1:
        raise ValueError("max_passes must be >= 1")
    norms = np.einsum("ij,ij->j", data.covariates, data.covariates)
    fit = fit_ols(data, target_index)
    support = fit.support
    passes = 0
    for _ in range(max_passes):
        passes += 1
        inactive = set(threshold_support(fit, rule, norms))
        new_support = tuple(j for j in range(data.p) if j not in inactive)
        if not new_support:
            return SparseFit(zero_fit(data, target_index), tuple(range(data.p)), passes, rule)
        if new_support == support and passes > 1:
            break
        support = new_support
        fit = fit_restricted_ols(data, target_index, support)
    kept = set(fit.support)
    inactive = tuple(j for j in range(data.p) if j not in kept)
    return SparseFit(fit, inactive, passes, rule)


def lasso_objective(data: Dataset, target_index: int, coefficients, lam: float) -> float:
    y = data.response(target_index)
    r = y - data.covariates @ coefficients
    return float(r @ r) / (2 * data.n) + lam * float(np.abs(coefficients).sum())


def lasso_coefficients(X, y, lam, tol=1e-8, max_iter=100_000, fit_intercept=False):
    """Raw coordinate-descent solve; returns ``(beta, sweeps, last_max_change)``."""
    n = X.shape[0]
    if fit_intercept:
        constant = np.ptp(X, axis=0) == 0
        X = X - X.mean(axis=0)
        X[:, constant] = 0.0
        y = y - y.mean()
    gram = np.ascontiguousarray(X.T @ X / n)
    xty = np.ascontiguousarray(X.T @ y / n)
    beta = np.zeros(X.shape[1])
    iters, delta = _backend.lasso_cd_gram(gram, xty, float(lam), beta, float(tol), int(max_iter))
    return beta, iters, delta


def lasso_fit(
    data: Dataset,
    target_index: int = 0,
    lam: float = 0.1,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    fit_intercept: bool = False,
) -> SparseFit:
    """Lasso by cyclic coordinate descent on ``(1/2n)|y - Xb|^2 + lam |b|_1``.

    With ``fit_intercept`` the covariates and response are centered first
    (an unpenalized intercept), so exactly-constant columns can never enter
    the model.

    Raises
    ------
    NoConvergence
        If the largest coordinate change is still ``>= tol`` after
        ``max_iter`` sweeps.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    X = data.covariates
    y = data.response(target_index)
    n = data.n
    if not data.is_standardized:
        warnings.warn(
            "lasso_fit on covariates that were not standardized",
            UnstandardizedWarning,
            stacklevel=2,
        )
    beta, iters, delta = lasso_coefficients(X, y, lam, tol, max_iter, fit_intercept)
    if delta >= tol:
        raise NoConvergence(iters, delta)
    support = as_support(np.flatnonzero(beta))
    resid = data.response(target_index) - data.covariates @ beta
    if fit_intercept:
        resid = resid - resid.mean()
    dof = max(n - len(support), 1)
    fit = LinearFit(
        coefficients=beta,
        support=support,
        residuals=resid,
        sigma_hat_sq=float(resid @ resid) / dof,
        target_index=target_index,
    )
    kept = set(support)
    inactive = tuple(j for j in range(data.p) if j not in kept)
    return SparseFit(fit, inactive, iters, None, penalty=float(lam))
