"""Bagging inclusion-probability selection and residual-bootstrap UQ.

Replicates are drawn from independent substreams keyed by
``(seed, "rows", r)`` so that any replicate can be regenerated on its own
and results never depend on the order replicates are evaluated in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    SINGULAR_RTOL,
    Dataset,
    as_support,
    fit_restricted_ols,
    zero_fit,
)
from .errors import AllReplicatesFailed, EmptySupport
from .rng import substream
from .sparse import SparseFit, ThresholdRule, lasso_coefficients

#: abort when more than this fraction of replicates is singular
MAX_FAILED_FRACTION = 0.2


@dataclass(frozen=True)
class ResamplePlan:
    replicates: int
    fraction: float = 0.8
    with_replacement: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")

    def sample_size(self, n: int) -> int:
        return int(math.ceil(self.fraction * n - 1e-12))

    def to_dict(self) -> dict:
        return {
            "replicates": self.replicates,
            "fraction": self.fraction,
            "with_replacement": self.with_replacement,
            "seed": self.seed,
        }


def replicate_rows(plan: ResamplePlan, n: int, r: int) -> np.ndarray:
    """Row indices drawn for replicate ``r``."""
    rng = substream(plan.seed, "rows", r)
    m = plan.sample_size(n)
    if plan.with_replacement:
        return rng.integers(0, n, size=m)
    return np.sort(rng.choice(n, size=m, replace=False))


def out_of_bag_rows(rows: np.ndarray, n: int) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[rows] = False
    return np.flatnonzero(mask)


@dataclass(frozen=True, eq=False)
class ReplicateResult:
    """Raw per-replicate output; failed replicates are dropped from the rows."""

    included: np.ndarray
    oob_mse: Optional[np.ndarray]
    coefficients: np.ndarray
    replicate_ids: np.ndarray
    failed: tuple


def _batched_ols(Xb, yb):
    gram = np.einsum("bij,bik->bjk", Xb, Xb)
    xty = np.einsum("bij,bi->bj", Xb, yb)
    m = Xb.shape[1]
    eig = np.linalg.eigvalsh(gram / m)
    ok = (eig[:, -1] > 0) & (eig[:, 0] > SINGULAR_RTOL * eig[:, -1])
    coef = np.zeros(xty.shape)
    if ok.any():
        coef[ok] = np.linalg.solve(gram[ok], xty[ok][..., None])[..., 0]
    norms = np.einsum("bii->bi", gram)
    return coef, norms, ok


def run_replicates(
    data: Dataset,
    target_index: int,
    rule: Optional[ThresholdRule],
    plan: ResamplePlan,
    lasso_lambda: Optional[float] = None,
    lasso_intercept: bool = False,
    lasso_tol: float = 1e-8,
    chunk: int = 64,
) -> ReplicateResult:
    """Fit every replicate and record which columns it keeps.

    With ``lasso_lambda`` unset each replicate is OLS on its rows followed by
    the threshold rule evaluated with that replicate's column norms; with
    it set, a column is kept when the replicate's lasso coefficient is
    nonzero. When the plan leaves rows out, the out-of-bag mean squared
    prediction error of each replicate fit is recorded.

    Raises
    ------
    AllReplicatesFailed
        When more than 20% of replicates have a singular design.
    """
    if lasso_lambda is None and rule is None:
        raise ValueError("either a threshold rule or a lasso penalty is required")
    n, p = data.n, data.p
    X = data.covariates
    y = data.response(target_index)
    B = plan.replicates
    m = plan.sample_size(n)
    rows = [replicate_rows(plan, n, r) for r in range(B)]
    has_oob = plan.with_replacement or m < n

    included = np.zeros((B, p), dtype=bool)
    coefs = np.zeros((B, p))
    ok = np.zeros(B, dtype=bool)
    oob = np.full(B, np.nan)

    if lasso_lambda is None:
        if m > p:
            for start in range(0, B, chunk):
                idx = np.array(rows[start:start + chunk])
                c, norms, good = _batched_ols(X[idx], y[idx])
                t = np.stack([rule.thresholds(nr, m) for nr in norms])
                included[start:start + len(idx)] = (np.abs(c) > t) & good[:, None]
                coefs[start:start + len(idx)] = c
                ok[start:start + len(idx)] = good
    else:
        for r in range(B):
            b, _, _ = lasso_coefficients(
                X[rows[r]], y[rows[r]], lasso_lambda, lasso_tol, 100_000, lasso_intercept
            )
            coefs[r] = b
            included[r] = b != 0
            ok[r] = True

    if has_oob:
        for r in range(B):
            if not ok[r]:
                continue
            held = out_of_bag_rows(rows[r], n)
            if held.size == 0:
                continue
            resid = y[held] - X[held] @ coefs[r]
            if lasso_lambda is not None and lasso_intercept:
                resid = resid - (y[rows[r]] - X[rows[r]] @ coefs[r]).mean()
            oob[r] = float(np.mean(resid * resid))

    failed = tuple(int(r) for r in np.flatnonzero(~ok))
    if len(failed) > MAX_FAILED_FRACTION * B or len(failed) == B:
        raise AllReplicatesFailed(len(failed), B)
    keep = ok
    return ReplicateResult(
        included=included[keep],
        oob_mse=oob[keep] if has_oob else None,
        coefficients=coefs[keep],
        replicate_ids=np.flatnonzero(keep),
        failed=failed,
    )


@dataclass(frozen=True, eq=False)
class InclusionProfile:
    probabilities: np.ndarray
    weights: np.ndarray
    per_replicate_included: np.ndarray
    per_replicate_oob_mse: Optional[np.ndarray] = None
    excluded_replicates: tuple = field(default_factory=tuple)


def oob_weights(oob_mse) -> np.ndarray:
    """Softmax of the negated out-of-bag errors (shifted by the minimum)."""
    mse = np.asarray(oob_mse, dtype=float)
    if not np.all(np.isfinite(mse)):
        raise ValueError("out-of-bag errors must be finite")
    w = np.exp(-(mse - mse.min()))
    return w / w.sum()


def inclusion_probability(included, weights=None, oob_mse=None, excluded=()) -> InclusionProfile:
    inc = np.asarray(included, dtype=bool)
    B = inc.shape[0]
    if weights is None:
        w = np.full(B, 1.0 / B)
        probs = inc.mean(axis=0)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (B,) or np.any(w < 0) or not w.sum() > 0:
            raise ValueError("weights must be non-negative, length B, not all zero")
        w = w / w.sum()
        if np.all(w == w[0]):
            probs = inc.mean(axis=0)
        else:
            probs = w @ inc.astype(float)
    return InclusionProfile(
        probabilities=probs,
        weights=w,
        per_replicate_included=inc,
        per_replicate_oob_mse=None if oob_mse is None else np.asarray(oob_mse, dtype=float),
        excluded_replicates=tuple(excluded),
    )


def select_support(profile: InclusionProfile, p_c: float) -> tuple:
    """Columns whose inclusion probability is strictly above ``p_c``."""
    return as_support(np.flatnonzero(profile.probabilities > p_c))


def inclusion_gap(profile: InclusionProfile, true_support=None) -> float:
    """Gap between active and null inclusion probabilities.

    With ``true_support`` this is ``min(active) - max(null)``. Without it,
    it is the largest gap between consecutive sorted probabilities (the
    first one, scanning from the top, on ties).
    """
    probs = np.asarray(profile.probabilities, dtype=float)
    if true_support is not None:
        active = np.zeros(probs.size, dtype=bool)
        active[list(as_support(true_support))] = True
        if not active.any() or active.all():
            return float("nan")
        return float(probs[active].min() - probs[~active].max())
    if probs.size < 2:
        return 0.0
    ordered = np.sort(probs)[::-1]
    gaps = ordered[:-1] - ordered[1:]
    return float(gaps[int(np.argmax(gaps))])


def bip_fit(
    data: Dataset,
    target_index: int,
    rule: Optional[ThresholdRule],
    plan: ResamplePlan,
    p_c: float,
    use_oob: bool = False,
    lasso_lambda: Optional[float] = None,
    lasso_intercept: bool = False,
):
    """Bagging inclusion-probability selection followed by an OLS refit.

    Returns ``(SparseFit, InclusionProfile)``. The refit uses the full
    dataset restricted to the selected columns; an empty selection gives
    the zero fit.
    """
    rep = run_replicates(data, target_index, rule, plan, lasso_lambda, lasso_intercept)
    weights = None
    if use_oob:
        if rep.oob_mse is None or not np.all(np.isfinite(rep.oob_mse)):
            raise ValueError("out-of-bag weighting needs a plan that leaves rows out")
        weights = oob_weights(rep.oob_mse)
    profile = inclusion_probability(rep.included, weights, rep.oob_mse, rep.failed)
    support = select_support(profile, p_c)
    if support:
        fit = fit_restricted_ols(data, target_index, support)
    else:
        fit = zero_fit(data, target_index)
    kept = set(fit.support)
    inactive = tuple(j for j in range(data.p) if j not in kept)
    return SparseFit(fit, inactive, 1, rule, penalty=lasso_lambda), profile


# ---------------------------------------------------------------------------
# residual bootstrap


@dataclass(frozen=True, eq=False)
class EnsembleDistribution:
    support: tuple
    beta_hat: np.ndarray
    coefficient_samples: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    quantiles: dict
    mu_star: float
    sigma_star_sq: float
    per_replicate_sigma_star_sq: np.ndarray
    s_hat: Optional[float] = None
    per_replicate_s_hat: Optional[np.ndarray] = None
    pivots: Optional[np.ndarray] = None
    excluded_replicates: int = 0

    @property
    def replicate_count(self) -> int:
        return self.coefficient_samples.shape[0]

    def interval(self, level: float):
        """Equal-tailed percentile interval at coverage ``level``."""
        lo = np.quantile(self.coefficient_samples, (1 - level) / 2, axis=0)
        hi = np.quantile(self.coefficient_samples, (1 + level) / 2, axis=0)
        return lo, hi

    def to_json_dict(self) -> dict:
        return {
            "support": list(self.support),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "quantiles": {f"{k:g}": v.tolist() for k, v in sorted(self.quantiles.items())},
            "mu_star": self.mu_star,
            "sigma_star_sq": self.sigma_star_sq,
            "replicate_count": self.replicate_count,
            "excluded_replicates": self.excluded_replicates,
        }


def summarize_samples(samples, levels=(0.05, 0.5, 0.95)):
    samples = np.asarray(samples, dtype=float)
    ddof = 1 if samples.shape[0] > 1 else 0
    return (
        samples.mean(axis=0),
        samples.std(axis=0, ddof=ddof),
        {float(q): np.quantile(samples, q, axis=0) for q in levels},
    )


def residual_bootstrap_uq(
    data: Dataset,
    target_index: int,
    support,
    replicates: int,
    seed: int,
    contrast: Optional[Sequence[float]] = None,
    levels=(0.05, 0.5, 0.95),
    center_residuals: bool = True,
) -> EnsembleDistribution:
    """Residual bootstrap of the OLS fit restricted to a fixed support.

    Each replicate resamples the fitted residuals with replacement, rebuilds
    ``y* = X b_hat + e*`` and refits on the same support. For a contrast
    ``a`` the studentized pivots ``(a'b* - a'b_hat) / sqrt(s_hat)`` use
    each replicate's own starred-residual variance.
    """
    support = as_support(support)
    n, p = data.n, data.p
    y = data.response(target_index)
    try:
        fit = fit_restricted_ols(data, target_index, support)
    except EmptySupport:
        fit = zero_fit(data, target_index)
    beta_hat = fit.coefficients
    resid = fit.residuals
    if center_residuals:
        resid = resid - resid.mean()
    fitted = y - fit.residuals

    draws = np.empty((replicates, n), dtype=np.intp)
    for b in range(replicates):
        draws[b] = substream(seed, "residuals", b).integers(0, n, size=n)
    y_star = fitted[None, :] + resid[draws]

    samples = np.zeros((replicates, p))
    if support:
        cols = list(support)
        Xs = data.covariates[:, cols]
        gram_inv = np.linalg.inv(Xs.T @ Xs)
        proj = Xs @ gram_inv
        b_star = y_star @ proj
        samples[:, cols] = b_star
        starred = y_star - b_star @ Xs.T
    else:
        gram_inv = None
        starred = y_star
    mu_b = starred.mean(axis=1)
    sig_b = np.maximum((starred * starred).mean(axis=1) - mu_b * mu_b, 0.0)
    mu_star = float(starred.mean())
    sigma_star_sq = max(float((starred * starred).mean()) - mu_star * mu_star, 0.0)

    s_hat = s_b = pivots = None
    if contrast is not None:
        a = np.asarray(contrast, dtype=float)
        if a.shape != (p,):
            raise ValueError("contrast must have length p")
        if support:
            a_j = a[list(support)]
            # n^{-1} sigma*^2 a'(n^{-1} X'X)^{-1} a
            quad = float(a_j @ gram_inv @ a_j)
        else:
            quad = 0.0
        s_hat = sigma_star_sq * quad
        s_b = sig_b * quad
        with np.errstate(divide="ignore", invalid="ignore"):
            pivots = (samples @ a - beta_hat @ a) / np.sqrt(s_b)

    mean, std, quants = summarize_samples(samples, levels)
    return EnsembleDistribution(
        support=support,
        beta_hat=beta_hat,
        coefficient_samples=samples,
        mean=mean,
        std=std,
        quantiles=quants,
        mu_star=mu_star,
        sigma_star_sq=sigma_star_sq,
        per_replicate_sigma_star_sq=sig_b,
        s_hat=s_hat,
        per_replicate_s_hat=s_b,
        pivots=pivots,
    )
