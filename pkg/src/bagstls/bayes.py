"""Spike-and-slab Gibbs sampler for the Gaussian linear model."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg as sla

from .core import Dataset
from .errors import NumericalBreakdown
from .rng import substream


@dataclass(frozen=True)
class SpikeSlabConfig:
    """Hyperparameters and chain settings.

    ``sigma`` set means the noise standard deviation is known; otherwise
    ``sigma^2`` gets an inverse-gamma(``a0``, ``b0``) prior.
    """

    slab_sd: float = 10.0
    spike_sd: float = 0.01
    prior_inclusion: float = 0.5
    sigma: Optional[float] = None
    a0: float = 1.0
    b0: float = 1.0
    iterations: int = 3000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (self.slab_sd > 0 and self.spike_sd > 0 and self.spike_sd < self.slab_sd):
            raise ValueError("need 0 < spike_sd < slab_sd")
        if not 0.0 < self.prior_inclusion <= 1.0:
            raise ValueError("prior_inclusion must lie in (0, 1]")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("known sigma must be positive")
        if self.sigma is None and not (self.a0 > 0 and self.b0 > 0):
            raise ValueError("inverse-gamma shape and scale must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    def to_dict(self) -> dict:
        return {
            "slab_sd": self.slab_sd,
            "spike_sd": self.spike_sd,
            "prior_inclusion": self.prior_inclusion,
            "sigma": self.sigma,
            "a0": self.a0,
            "b0": self.b0,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class PosteriorSamples:
    beta_samples: np.ndarray
    lambda_samples: np.ndarray
    sigma_sq_samples: np.ndarray

    @property
    def inclusion_posterior(self) -> np.ndarray:
        return self.lambda_samples.mean(axis=0)

    def to_json_dict(self, levels=(0.05, 0.5, 0.95)) -> dict:
        b = self.beta_samples
        ddof = 1 if b.shape[0] > 1 else 0
        return {
            "support": [int(j) for j in np.flatnonzero(self.inclusion_posterior > 0.5)],
            "mean": b.mean(axis=0).tolist(),
            "std": b.std(axis=0, ddof=ddof).tolist(),
            "quantiles": {f"{q:g}": np.quantile(b, q, axis=0).tolist() for q in levels},
            "mu_star": 0.0,
            "sigma_star_sq": float(self.sigma_sq_samples.mean()),
            "replicate_count": int(b.shape[0]),
            "excluded_replicates": 0,
            "inclusion_posterior": self.inclusion_posterior.tolist(),
        }

    def write_csv(self, path, names=None) -> None:
        p = self.beta_samples.shape[1]
        names = list(names or [f"beta{j}" for j in range(p)])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names + [f"lambda_{c}" for c in names] + ["sigma_sq"])
            for b, lam, s in zip(self.beta_samples, self.lambda_samples, self.sigma_sq_samples):
                w.writerow(
                    [repr(float(v)) for v in b] + [int(v) for v in lam] + [repr(float(s))]
                )


def _log_normal_pdf(x, sd):
    return -0.5 * (x / sd) ** 2 - math.log(sd) - 0.5 * math.log(2 * math.pi)


def gibbs_sample(data: Dataset, target_index: int = 0, config: SpikeSlabConfig = None,
                 columns=None) -> PosteriorSamples:
    """Systematic-scan Gibbs sampler.

    Each sweep draws ``beta`` jointly given the indicators and noise
    variance, then each indicator given its coefficient (in log space),
    then the noise variance from its inverse-gamma conditional. The chain
    starts from the full model (all indicators on). ``columns`` restricts
    the model to a subset of covariates; the returned samples are then
    zero outside it.
    """
    config = config or SpikeSlabConfig()
    X = data.covariates
    if columns is not None:
        cols = list(columns)
        X = X[:, cols]
    y = data.response(target_index)
    n, k = X.shape
    if n <= 1:
        raise ValueError("gibbs_sample needs n > 1")
    rng = substream(config.seed, "gibbs", target_index)
    xtx = X.T @ X
    xty = X.T @ y
    c2 = config.slab_sd ** 2
    e2 = config.spike_sd ** 2
    pi = config.prior_inclusion
    log_prior_odds = math.inf if pi >= 1.0 else math.log(pi) - math.log1p(-pi)
    known = config.sigma is not None

    lam = np.ones(k, dtype=bool)
    if known:
        sigma_sq = config.sigma ** 2
    else:
        try:
            b0 = np.linalg.lstsq(X, y, rcond=None)[0]
            r = y - X @ b0
            sigma_sq = max(float(r @ r) / max(n - k, 1), 1e-12)
        except np.linalg.LinAlgError:
            sigma_sq = 1.0
    beta = np.zeros(k)

    keep = range(config.burn_in, config.iterations, config.thin)
    S = len(keep)
    out_b = np.empty((S, k))
    out_l = np.empty((S, k), dtype=bool)
    out_s = np.empty(S)
    s = 0
    for it in range(config.iterations):
        prior_prec = np.where(lam, 1.0 / c2, 1.0 / e2)
        A = xtx / sigma_sq + np.diag(prior_prec)
        try:
            L = sla.cholesky(A, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown(f"posterior precision not positive definite at sweep {it}") from exc
        mean = sla.cho_solve((L, True), xty / sigma_sq, check_finite=False)
        z = rng.standard_normal(k)
        beta = mean + sla.solve_triangular(L, z, lower=True, trans="T", check_finite=False)

        if math.isinf(log_prior_odds):
            lam = np.ones(k, dtype=bool)
        else:
            log_odds = (
                log_prior_odds
                + _log_normal_pdf(beta, config.slab_sd)
                - _log_normal_pdf(beta, config.spike_sd)
            )
            prob = 0.5 * (1.0 + np.tanh(0.5 * log_odds))
            lam = rng.random(k) < prob

        if not known:
            r = y - X @ beta
            shape = config.a0 + 0.5 * n
            scale = config.b0 + 0.5 * float(r @ r)
            sigma_sq = scale / rng.gamma(shape)

        if s < S and it == keep[s]:
            out_b[s] = beta
            out_l[s] = lam
            out_s[s] = sigma_sq
            s += 1

    if columns is not None:
        full_b = np.zeros((S, data.p))
        full_l = np.zeros((S, data.p), dtype=bool)
        full_b[:, cols] = out_b
        full_l[:, cols] = out_l
        out_b, out_l = full_b, full_l
    return PosteriorSamples(out_b, out_l, out_s)


def complexity_report(n: int, p: int, B: int, iterations: int, data: Dataset = None,
                      target_index: int = 0) -> dict:
    """Dominant-term operation counts of the MCMC and bootstrap pipelines.

    Counts are ``n^2 p`` per MCMC sweep and ``n p^2`` per bootstrap
    replicate. When ``data`` is given both pipelines are also timed on it
    (informational only).
    """
    mcmc_ops = float(n) ** 2 * p * iterations
    ensemble_ops = float(n) * p ** 2 * B
    report = {
        "n": n,
        "p": p,
        "B": B,
        "iterations": iterations,
        "mcmc_ops": mcmc_ops,
        "ensemble_ops": ensemble_ops,
        "ratio": mcmc_ops / ensemble_ops if ensemble_ops > 0 else math.inf,
    }
    if data is not None:
        from .ensemble import ResamplePlan, run_replicates
        from .sparse import ThresholdRule

        t0 = time.perf_counter()
        if B > 0:
            run_replicates(data, target_index, ThresholdRule.gaussian_tail(), ResamplePlan(B))
        t1 = time.perf_counter()
        gibbs_sample(data, target_index, SpikeSlabConfig(iterations=max(iterations, 1), burn_in=0))
        t2 = time.perf_counter()
        report["ensemble_seconds"] = t1 - t0
        report["mcmc_seconds"] = t2 - t1
    return report
