"""Experiment configuration, runners and reports.

Each runner maps an :class:`ExperimentConfig` to a JSON-ready report. Work
items are independent and may run on a thread pool; results are reduced
in a fixed order, and every random stream is derived from the root seed
plus labels, so the report content is the same for any thread count.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib
import tomli_w

from . import _backend
from . import datagen as dg
from .bayes import SpikeSlabConfig, complexity_report, gibbs_sample
from .bounds import BoundInputs, bound_report
from .core import Dataset, fit_ols, standardize
from .ensemble import ResamplePlan, bip_fit, residual_bootstrap_uq
from .errors import ConfigError, EmptySupport
from .metrics import (
    TrialOutcome,
    empirical_fdp,
    empirical_tdp,
    relative_frequency,
    wasserstein2_1d,
)
from .rng import derive_seed
from .sparse import ThresholdRule, lasso_coefficients, stls_fit

EXPERIMENTS = ("model_sweep", "robustness_sweep", "lotka_volterra", "bounds_overlay", "bayes_compare")
ESTIMATORS = ("lasso", "stls", "blasso", "bstls")
MODELS = ("model1", "model2", "model3")
DESK_TRIALS = 50
DESK_REPLICATES = 100


@dataclass
class EstimatorHyper:
    """Hyperparameters shared by the four estimators on one model.

    The threshold is ``sigma * sqrt(gamma / X_j'X_j)`` with
    ``gamma = gamma_factor * p * log(p)`` (``gamma_scaled``) or
    ``2 log(1/delta)`` (``gaussian_tail``; ``delta`` unset means
    ``1/n_b``). ``sigma_policy`` is ``known`` (use ``sigma``, or the
    generating noise level when ``sigma`` is unset) or ``estimated`` (the
    full-data OLS residual standard deviation).
    """

    gamma_factor: float = 0.15
    lasso_lambda: float = 0.4
    fraction: float = 0.8
    p_c: float = 0.45
    max_passes: int = 2
    threshold: str = "gamma_scaled"
    delta: Optional[float] = None
    sigma_policy: str = "known"
    sigma: Optional[float] = None
    with_replacement: bool = False
    use_oob: bool = False
    lasso_intercept: bool = True


DEFAULT_HYPER = {
    "model1": EstimatorHyper(0.15, 0.4, 0.8, 0.45),
    "model2": EstimatorHyper(0.1, 0.2, 0.8, 0.7),
    "model3": EstimatorHyper(50.0, 0.5, 0.5, 0.8),
    "lv": EstimatorHyper(50.0, 0.5, 0.8, 0.8, sigma=0.1),
}


@dataclass
class RobustnessSpec:
    axis: str = "q"
    values: list = field(default_factory=lambda: [1, 5, 10, 15])
    sigma: float = 0.5
    q: int = 15


@dataclass
class LVSpec:
    params: list = field(default_factory=lambda: list(dg.LV_PARAMS))
    x0: list = field(default_factory=lambda: list(dg.LV_X0))
    t_span: list = field(default_factory=lambda: [0.0, 24.0])
    sampling: str = "uniform_random"
    noise_sd: float = 0.1
    noise_target: str = "initial_condition"
    max_degree: int = 2
    derivative_source: str = "finite_difference"
    step: float = 1e-3
    uq_replicates: int = 0
    gibbs: bool = True


@dataclass
class BayesSpec:
    slab_sd: float = 10.0
    spike_sd: float = 0.01
    prior_inclusion: float = 0.5
    sigma: Optional[float] = None
    a0: float = 1.0
    b0: float = 1.0
    iterations: int = 3000
    burn_in: int = 1000
    thin: int = 1

    def sampler(self, seed: int) -> SpikeSlabConfig:
        return SpikeSlabConfig(seed=seed, **asdict(self))


_DEFAULT_GRIDS = {
    "lotka_volterra": [100, 200, 300, 400, 500],
    "bayes_compare": [50, 100, 200],
}
_DEFAULT_TRIALS = {"lotka_volterra": 10, "bayes_compare": 10}
_DEFAULT_ESTIMATORS = {
    "lotka_volterra": ["bstls"],
    "bayes_compare": ["bstls"],
    "bounds_overlay": ["bstls", "stls"],
}


@dataclass
class ExperimentConfig:
    experiment: str = "model_sweep"
    seed: int = 0
    trials: int = 200
    n_grid: list = field(default_factory=lambda: [50, 100, 150, 200, 250])
    models: list = field(default_factory=lambda: ["model1"])
    estimators: list = field(default_factory=lambda: list(ESTIMATORS))
    replicates: int = 0
    standardize: bool = True
    output_dir: str = "results"
    hyper: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_HYPER))
    robustness: RobustnessSpec = field(default_factory=RobustnessSpec)
    lv: LVSpec = field(default_factory=LVSpec)
    bayes: BayesSpec = field(default_factory=BayesSpec)
    bounds: dict = field(default_factory=dict)

    # ------------------------------------------------------------------
    @classmethod
    def for_experiment(cls, experiment: str, **overrides) -> "ExperimentConfig":
        """Defaults for one experiment kind, with keyword overrides."""
        base = {"experiment": experiment}
        if experiment in _DEFAULT_GRIDS:
            base["n_grid"] = list(_DEFAULT_GRIDS[experiment])
        if experiment in _DEFAULT_TRIALS:
            base["trials"] = _DEFAULT_TRIALS[experiment]
        if experiment in _DEFAULT_ESTIMATORS:
            base["estimators"] = list(_DEFAULT_ESTIMATORS[experiment])
        base.update(overrides)
        return cls.from_dict(base)

    def replicates_for(self, n: int) -> int:
        return self.replicates if self.replicates > 0 else max(n, 100)

    def desk(self) -> "ExperimentConfig":
        out = copy.deepcopy(self)
        out.trials = min(out.trials, DESK_TRIALS)
        out.replicates = DESK_REPLICATES
        return out

    def to_dict(self) -> dict:
        d = {
            "experiment": self.experiment,
            "seed": int(self.seed),
            "trials": int(self.trials),
            "n_grid": [int(v) for v in self.n_grid],
            "models": list(self.models),
            "estimators": list(self.estimators),
            "replicates": int(self.replicates),
            "standardize": bool(self.standardize),
            "output_dir": self.output_dir,
            "hyper": {k: _drop_none(asdict(v)) for k, v in sorted(self.hyper.items())},
            "robustness": asdict(self.robustness),
            "lv": asdict(self.lv),
            "bayes": _drop_none(asdict(self.bayes)),
            "bounds": dict(self.bounds),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown field")
        hyper = copy.deepcopy(DEFAULT_HYPER)
        for name, block in (d.pop("hyper", None) or {}).items():
            if not isinstance(block, dict):
                raise ConfigError(f"hyper.{name}", "must be a table")
            base = asdict(hyper.get(name, EstimatorHyper()))
            base.update(block)
            hyper[name] = _build(EstimatorHyper, base, f"hyper.{name}")
        cfg = cls(
            hyper=hyper,
            robustness=_build(RobustnessSpec, d.pop("robustness", {}), "robustness"),
            lv=_build(LVSpec, d.pop("lv", {}), "lv"),
            bayes=_build(BayesSpec, d.pop("bayes", {}), "bayes"),
            **d,
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(str(path), str(exc)) from exc
        return cls.from_dict(raw)

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def validate(self) -> None:
        def need(cond, path, msg):
            if not cond:
                raise ConfigError(path, msg)

        need(self.experiment in EXPERIMENTS, "experiment", f"must be one of {EXPERIMENTS}")
        need(isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64, "seed", "must be a u64")
        need(isinstance(self.trials, int) and self.trials >= 1, "trials", "must be >= 1")
        need(len(self.n_grid) >= 1, "n_grid", "must be nonempty")
        for i, n in enumerate(self.n_grid):
            need(isinstance(n, int) and n >= 2, f"n_grid[{i}]", "must be an integer >= 2")
        need(isinstance(self.replicates, int) and self.replicates >= 0, "replicates", "must be >= 0")
        need(len(self.estimators) >= 1, "estimators", "must name at least one estimator")
        for i, e in enumerate(self.estimators):
            need(e in ESTIMATORS, f"estimators[{i}]", f"must be one of {ESTIMATORS}")
        for i, m in enumerate(self.models):
            need(m in MODELS, f"models[{i}]", f"must be one of {MODELS}")
        if self.experiment in ("model_sweep",):
            need(len(self.models) >= 1, "models", "must be nonempty")
        for name, hp in self.hyper.items():
            path = f"hyper.{name}"
            need(hp.threshold in ("gamma_scaled", "gaussian_tail"), f"{path}.threshold",
                 "must be gamma_scaled or gaussian_tail")
            need(hp.sigma_policy in ("known", "estimated"), f"{path}.sigma_policy",
                 "must be known or estimated")
            need(hp.gamma_factor > 0, f"{path}.gamma_factor", "must be > 0")
            need(hp.lasso_lambda >= 0, f"{path}.lasso_lambda", "must be >= 0")
            need(0 < hp.fraction <= 1, f"{path}.fraction", "must lie in (0, 1]")
            need(0 < hp.p_c < 1, f"{path}.p_c", "must lie in (0, 1)")
            need(hp.max_passes >= 1, f"{path}.max_passes", "must be >= 1")
            need(hp.delta is None or 0 < hp.delta < 1, f"{path}.delta", "must lie in (0, 1)")
            need(hp.sigma is None or hp.sigma > 0, f"{path}.sigma", "must be > 0")
        for m in self._models_used():
            need(m in self.hyper, f"hyper.{m}", "missing hyperparameters for a model in use")
        r = self.robustness
        need(r.axis in ("q", "sigma"), "robustness.axis", "must be q or sigma")
        need(len(r.values) >= 1, "robustness.values", "must be nonempty")
        if r.axis == "q":
            for i, v in enumerate(r.values):
                need(isinstance(v, int) and 0 <= v <= 30, f"robustness.values[{i}]", "q must lie in [0, 30]")
        else:
            for i, v in enumerate(r.values):
                need(v >= 0, f"robustness.values[{i}]", "sigma must be >= 0")
        lv = self.lv
        need(len(lv.params) == 4, "lv.params", "needs four entries")
        need(len(lv.x0) == 2 and min(lv.x0) > 0, "lv.x0", "needs two positive entries")
        need(len(lv.t_span) == 2 and lv.t_span[1] > lv.t_span[0], "lv.t_span", "needs t0 < t1")
        need(lv.sampling in ("uniform_random", "uniform_grid"), "lv.sampling", "unknown sampling")
        need(lv.noise_target in ("initial_condition", "measurement", "none"), "lv.noise_target",
             "must be initial_condition, measurement or none")
        need(lv.noise_sd >= 0, "lv.noise_sd", "must be >= 0")
        need(lv.max_degree >= 1, "lv.max_degree", "must be >= 1")
        need(lv.derivative_source in ("exact", "finite_difference"), "lv.derivative_source",
             "must be exact or finite_difference")
        need(lv.step > 0, "lv.step", "must be > 0")
        need(lv.uq_replicates >= 0, "lv.uq_replicates", "must be >= 0")
        try:
            self.bayes.sampler(0)
        except (TypeError, ValueError) as exc:
            raise ConfigError("bayes", str(exc)) from exc
        if self.experiment == "bounds_overlay" and self.bounds:
            try:
                _bound_inputs(self, self.n_grid[0], "model1")
            except (TypeError, ValueError) as exc:
                raise ConfigError("bounds", str(exc)) from exc

    def _models_used(self):
        if self.experiment == "model_sweep":
            return list(self.models)
        if self.experiment == "lotka_volterra":
            return ["lv"]
        if self.experiment in ("robustness_sweep", "bounds_overlay", "bayes_compare"):
            return list(self.models[:1] or ["model1"])
        return []


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def _build(cls, block, path):
    if not isinstance(block, dict):
        raise ConfigError(path, "must be a table")
    names = {f.name for f in fields(cls)}
    for key in block:
        if key not in names:
            raise ConfigError(f"{path}.{key}", "unknown field")
    try:
        return cls(**block)
    except TypeError as exc:  # pragma: no cover
        raise ConfigError(path, str(exc)) from exc


# ---------------------------------------------------------------------------
# estimators


def threshold_rule(hp: EstimatorHyper, p: int, sigma: float) -> ThresholdRule:
    if hp.threshold == "gamma_scaled":
        return ThresholdRule.gamma_scaled(hp.gamma_factor * p * math.log(p), sigma)
    return ThresholdRule.gaussian_tail(hp.delta, sigma)


def threshold_sigma(hp: EstimatorHyper, data: Dataset, target_index: int, noise_sigma: float) -> float:
    if hp.sigma_policy == "estimated":
        return math.sqrt(max(fit_ols(data, target_index).sigma_hat_sq, 1e-300))
    return float(hp.sigma if hp.sigma is not None else noise_sigma)


def fit_estimator(name, data: Dataset, target_index: int, hp: EstimatorHyper, replicates: int,
                  seed: int, sigma: float):
    """Run one named estimator; returns ``(support, coefficients, excluded)``."""
    p = data.p
    if name == "lasso":
        b, _, _ = lasso_coefficients(
            data.covariates, data.response(target_index), hp.lasso_lambda,
            fit_intercept=hp.lasso_intercept,
        )
        return tuple(int(j) for j in np.flatnonzero(b)), b, 0
    rule = threshold_rule(hp, p, sigma)
    if name == "stls":
        fit = stls_fit(data, target_index, rule, hp.max_passes)
        return fit.support, fit.coefficients, 0
    plan = ResamplePlan(replicates, hp.fraction, hp.with_replacement, seed)
    if name == "bstls":
        fit, prof = bip_fit(data, target_index, rule, plan, hp.p_c, hp.use_oob)
    elif name == "blasso":
        fit, prof = bip_fit(
            data, target_index, None, plan, hp.p_c, hp.use_oob,
            lasso_lambda=hp.lasso_lambda, lasso_intercept=hp.lasso_intercept,
        )
    else:
        raise ValueError(f"unknown estimator {name!r}")
    return fit.support, fit.coefficients, len(prof.excluded_replicates)


def prepare_dataset(data: Dataset, model: str, standardize_data: bool) -> Dataset:
    if not standardize_data:
        return data
    return standardize(data, discovery=(model == "model3"))


# ---------------------------------------------------------------------------
# reports


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def content_hash(report: dict) -> str:
    """sha256 of the canonical report with the runtime block removed."""
    body = {k: v for k, v in report.items() if k not in ("runtime", "content_hash")}
    return hashlib.sha256(canonical_json(body).encode()).hexdigest()


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_json(cfg.to_dict()).encode()).hexdigest()


def _finish(cfg: ExperimentConfig, body: dict, started: float, threads: int) -> dict:
    report = {"config": cfg.to_dict(), "config_hash": config_hash(cfg)}
    report.update(_jsonable(body))
    report["content_hash"] = content_hash(report)
    report["runtime"] = {
        "seconds": time.perf_counter() - started,
        "threads": int(threads),
        "compiled_kernels": bool(_backend.COMPILED),
    }
    return report


def write_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _wilson(k: int, n: int, z: float = 1.96):
    if n == 0:
        return (0.0, 1.0)
    ph = k / n
    den = 1 + z * z / n
    mid = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return (max(mid - half, 0.0), min(mid + half, 1.0))


def _summarize_outcomes(outcomes) -> dict:
    S = len(outcomes)
    fdp = empirical_fdp(outcomes)
    tdp = empirical_tdp(outcomes)
    return {
        "trials": S,
        "efdp": fdp,
        "efdp_band": _wilson(round(fdp * S), S),
        "etdp": tdp,
        "etdp_band": _wilson(round(tdp * S), S),
        "exact_rate": sum(o.exact for o in outcomes) / S,
        "relative_frequency": relative_frequency(outcomes),
    }


# ---------------------------------------------------------------------------
# synthetic sweeps


def _synthetic_trial(cfg, model, key, n, trial, sigma=None, n_active=15):
    seed = derive_seed(cfg.seed, cfg.experiment, key, n, trial)
    spec = dg.SyntheticSpec(model, n, sigma, seed, n_active=n_active)
    syn = dg.generate(spec)
    data = prepare_dataset(syn.data, model, cfg.standardize)
    hp = cfg.hyper[model]
    B = cfg.replicates_for(n)
    out = {}
    for est in cfg.estimators:
        for k in range(data.d):
            sig = threshold_sigma(hp, data, k, spec.sigma if spec.sigma > 0 else 1.0)
            support, _, excluded = fit_estimator(est, data, k, hp, B, seed, sig)
            out[(est, k)] = (support, excluded)
    return out, syn.supports, data.p


def _sweep(cfg, settings, threads):
    """``settings`` is a list of ``(label, model, key, sigma, n_active)``."""
    items = [
        (label, model, key, sigma, q, n, s)
        for (label, model, key, sigma, q) in settings
        for n in cfg.n_grid
        for s in range(cfg.trials)
    ]

    def work(it):
        label, model, key, sigma, q, n, s = it
        return _synthetic_trial(cfg, model, key, n, s, sigma, q)

    results = _map(work, items, threads)
    table = {}
    excluded = 0
    for it, (out, supports, p) in zip(items, results):
        label, model, key, sigma, q, n, s = it
        for (est, k), (support, exc) in out.items():
            excluded += exc
            outcome = TrialOutcome(support, supports[k], p)
            table.setdefault((label, model, est, n, k), []).append(outcome)
    rows = []
    for (label, model, est, n, k), outcomes in sorted(table.items(), key=lambda kv: (
        [lbl for lbl, *_ in settings].index(kv[0][0]), kv[0][2], kv[0][3], kv[0][4]
    )):
        row = {"setting": label, "model": model, "estimator": est, "n": n, "target": k}
        row.update(_summarize_outcomes(outcomes))
        rows.append(row)
    return rows, excluded


def run_model_sweep(cfg: ExperimentConfig, threads: int = 1) -> dict:
    started = time.perf_counter()
    settings = [(m, m, m, None, 15) for m in cfg.models]
    rows, excluded = _sweep(cfg, settings, threads)
    return _finish(cfg, {"results": rows, "excluded_replicates": excluded}, started, threads)


def run_robustness_sweep(cfg: ExperimentConfig, threads: int = 1) -> dict:
    started = time.perf_counter()
    r = cfg.robustness
    model = cfg.models[0] if cfg.models else "model1"
    settings = []
    for v in r.values:
        if r.axis == "q":
            sigma, q = r.sigma, int(v)
        else:
            sigma, q = float(v), r.q
        label = f"{r.axis}={v}"
        settings.append((label, model, f"{model}:{label}", sigma, q))
    rows, excluded = _sweep(cfg, settings, threads)
    spread = {}
    for est in cfg.estimators:
        for n in cfg.n_grid:
            vals = [row["efdp"] for row in rows if row["estimator"] == est and row["n"] == n]
            spread.setdefault(est, {})[str(n)] = max(vals) - min(vals)
    body = {"axis": r.axis, "values": list(r.values), "results": rows,
            "efdp_spread": spread, "excluded_replicates": excluded}
    return _finish(cfg, body, started, threads)


# ---------------------------------------------------------------------------
# bound overlay


def _population_rho(model: str):
    if model == "model2":
        eig = np.linalg.eigvalsh(dg.toeplitz_covariance(30, 0.3))
        return float(eig[0]), float(eig[-1])
    return 1.0, 1.0


def _bound_inputs(cfg: ExperimentConfig, n: int, model: str) -> BoundInputs:
    hp = cfg.hyper[model]
    beta = dg.model_beta(model)[:, 0]
    active = beta[beta != 0]
    rho1, rho2 = _population_rho(model)
    base = {
        "n": n,
        "p": 30,
        "q": int(active.size),
        "p_c": hp.p_c,
        "sigma": hp.sigma if hp.sigma is not None else dg.MODEL_DEFAULT_SIGMA[model],
        "rho1": rho1,
        "rho2": rho2,
        "beta_min": float(np.abs(active).min()),
        "gamma": hp.gamma_factor * 30 * math.log(30),
    }
    base.update(cfg.bounds)
    base["n"] = n
    return BoundInputs(**base)


def run_bounds_overlay(cfg: ExperimentConfig, threads: int = 1) -> dict:
    from scipy.stats import beta as beta_dist

    started = time.perf_counter()
    model = cfg.models[0] if cfg.models else "model1"
    if not cfg.estimators:
        raise ConfigError("estimators", "must name at least one estimator")
    rows, excluded = _sweep(cfg, [(model, model, model, None, 15)], threads)
    overlay = []
    for n in cfg.n_grid:
        rep = bound_report(_bound_inputs(cfg, n, model))
        entry = {"n": n, "bounds": rep["bounds"], "notes": rep["notes"], "empirical": {}}
        for row in rows:
            if row["n"] != n:
                continue
            S = row["trials"]
            k = round(row["efdp"] * S)
            lower = 0.0 if k == 0 else float(beta_dist.ppf(0.05, k, S - k + 1))
            bound_key = "bip_fdp" if row["estimator"] in ("bstls", "blasso") else "stls_fdp"
            bound = rep["bounds"][bound_key]
            entry["empirical"][row["estimator"]] = {
                "efdp": row["efdp"],
                "etdp": row["etdp"],
                "efdp_lower95": lower,
                "fdp_bound": bound_key,
                "consistent": bool(bound["vacuous"] or lower <= bound["value"]),
            }
        overlay.append(entry)
    body = {"model": model, "results": rows, "overlay": overlay, "excluded_replicates": excluded}
    return _finish(cfg, body, started, threads)


# ---------------------------------------------------------------------------
# uncertainty quantification against the Gibbs reference


def _compare_distributions(data, k, support, true_support, names, B_uq, seed, bayes, gibbs):
    """Residual-bootstrap UQ on ``support`` and optional posterior comparison
    for every column in ``true_support``."""
    try:
        dist = residual_bootstrap_uq(data, k, support, B_uq, derive_seed(seed, "uq", k))
    except EmptySupport:  # pragma: no cover
        dist = None
    out = {}
    post_full = post_sel = None
    if gibbs:
        post_full = gibbs_sample(data, k, bayes.sampler(derive_seed(seed, "gibbs", k)))
        if support:
            post_sel = gibbs_sample(data, k, bayes.sampler(derive_seed(seed, "gibbs", k)),
                                    columns=support)
    for j in true_support:
        ens = dist.coefficient_samples[:, j]
        rec = {
            "name": names[j],
            "ensemble": _five(ens),
        }
        if post_full is not None:
            rec["posterior"] = _five(post_full.beta_samples[:, j])
            rec["w2_full"] = wasserstein2_1d(ens, post_full.beta_samples[:, j])
            rec["w2_support"] = (
                wasserstein2_1d(ens, post_sel.beta_samples[:, j]) if post_sel is not None else None
            )
            rec["inclusion_posterior"] = float(post_full.inclusion_posterior[j])
        out[j] = rec
    return dist, out


def _five(x) -> dict:
    x = np.asarray(x, dtype=float)
    return {
        "mean": float(x.mean()),
        "std": float(x.std(ddof=1)) if x.size > 1 else 0.0,
        "q05": float(np.quantile(x, 0.05)),
        "q50": float(np.quantile(x, 0.5)),
        "q95": float(np.quantile(x, 0.95)),
    }


def _lv_trial(cfg: ExperimentConfig, n: int, s: int) -> dict:
    lv = cfg.lv
    seed = derive_seed(cfg.seed, cfg.experiment, "lv", n, s)
    x0 = tuple(lv.x0)
    if lv.noise_target == "initial_condition" and lv.noise_sd > 0:
        x0 = dg.perturb_initial_condition(x0, lv.noise_sd, seed)
    traj = dg.simulate_lotka_volterra(
        tuple(lv.params), x0, tuple(lv.t_span), n, lv.sampling, seed, lv.step
    )
    if lv.noise_target == "measurement" and lv.noise_sd > 0:
        traj = dg.add_lognormal_noise(traj, lv.noise_sd, seed)
    data = dg.build_discovery_dataset(traj, lv.max_degree, lv.derivative_source)
    hp = cfg.hyper["lv"]
    B = cfg.replicates_for(n)
    B_uq = lv.uq_replicates or B
    truth = dg.lv_true_supports(lv.max_degree)
    true_coef = dg.lv_true_coefficients(lv.max_degree, traj.normalization_scales)
    names = data.names()
    eqs = []
    for k in range(2):
        sig = threshold_sigma(hp, data, k, lv.noise_sd or 1.0)
        support, coef, excluded = fit_estimator("bstls", data, k, hp, B, seed, sig)
        _, comp = _compare_distributions(
            data, k, support, truth[k], names, B_uq, seed, cfg.bayes, lv.gibbs
        )
        eqs.append({
            "equation": data.target_names()[k],
            "support": list(support),
            "exact": support == truth[k],
            "coefficients": coef,
            "true_coefficients": true_coef[:, k],
            "excluded_replicates": excluded,
            "active": [comp[j] for j in truth[k]],
        })
    return {"scales": traj.normalization_scales, "x0": list(x0), "equations": eqs}


def _w2_curves(per_n: dict, grid, key="w2_full"):
    curves = {}
    for n in grid:
        trials = per_n[n]
        labels = []
        for eq in trials[0]["equations"]:
            for a in eq["active"]:
                labels.append((eq["equation"], a["name"]))
        for idx, (eqname, cname) in enumerate(labels):
            vals = []
            for t in trials:
                flat = [a for eq in t["equations"] for a in eq["active"]]
                v = flat[idx].get(key)
                if v is not None:
                    vals.append(v)
            if not vals:
                continue
            label = f"{eqname}:{cname}"
            curves.setdefault(label, []).append({
                "n": n,
                "mean": float(np.mean(vals)),
                "lo": float(np.quantile(vals, 0.1)),
                "hi": float(np.quantile(vals, 0.9)),
            })
    return curves


def run_lotka_volterra(cfg: ExperimentConfig, threads: int = 1) -> dict:
    started = time.perf_counter()
    items = [(n, s) for n in cfg.n_grid for s in range(cfg.trials)]
    results = _map(lambda it: _lv_trial(cfg, *it), items, threads)
    per_n = {}
    for (n, s), res in zip(items, results):
        per_n.setdefault(n, []).append(res)
    distribution = []
    for n in cfg.n_grid:
        trials = per_n[n]
        for e in range(2):
            eqs = [t["equations"][e] for t in trials]
            for a_idx, a in enumerate(eqs[0]["active"]):
                ens_means = [q["active"][a_idx]["ensemble"]["mean"] for q in eqs]
                row = {
                    "n": n,
                    "equation": eqs[0]["equation"],
                    "term": a["name"],
                    "ensemble_mean": float(np.mean(ens_means)),
                    "ensemble_q05": float(np.mean([q["active"][a_idx]["ensemble"]["q05"] for q in eqs])),
                    "ensemble_q95": float(np.mean([q["active"][a_idx]["ensemble"]["q95"] for q in eqs])),
                }
                if "posterior" in a:
                    row["posterior_mean"] = float(np.mean([q["active"][a_idx]["posterior"]["mean"] for q in eqs]))
                    row["posterior_q05"] = float(np.mean([q["active"][a_idx]["posterior"]["q05"] for q in eqs]))
                    row["posterior_q95"] = float(np.mean([q["active"][a_idx]["posterior"]["q95"] for q in eqs]))
                distribution.append(row)
    selection = [
        {"n": n, "exact_rate": float(np.mean([all(eq["exact"] for eq in t["equations"]) for t in per_n[n]]))}
        for n in cfg.n_grid
    ]
    body = {
        "normalized_targets": list(dg.LV_NORMALIZED),
        "trials": {str(n): per_n[n] for n in cfg.n_grid},
        "selection": selection,
        "distribution": distribution,
        "w2": _w2_curves(per_n, cfg.n_grid, "w2_full") if cfg.lv.gibbs else {},
        "w2_support": _w2_curves(per_n, cfg.n_grid, "w2_support") if cfg.lv.gibbs else {},
    }
    return _finish(cfg, body, started, threads)


def _bayes_trial(cfg: ExperimentConfig, model: str, n: int, s: int) -> dict:
    seed = derive_seed(cfg.seed, cfg.experiment, model, n, s)
    syn = dg.generate(dg.SyntheticSpec(model, n, None, seed))
    data = syn.data
    hp = cfg.hyper[model]
    B = cfg.replicates_for(n)
    sig = threshold_sigma(hp, data, 0, dg.MODEL_DEFAULT_SIGMA[model])
    support, coef, excluded = fit_estimator("bstls", data, 0, hp, B, seed, sig)
    dist, comp = _compare_distributions(
        data, 0, support, syn.true_support(0), data.names(), B, seed, cfg.bayes, True
    )
    lo, hi = dist.interval(0.9)
    truth = syn.beta[:, 0]
    covered = [bool(lo[j] <= truth[j] <= hi[j]) for j in syn.true_support(0)]
    return {
        "support": list(support),
        "exact": support == syn.true_support(0),
        "excluded_replicates": excluded,
        "coverage_90": covered,
        "equations": [{"equation": "y0", "active": [comp[j] for j in syn.true_support(0)]}],
    }


def run_bayes_compare(cfg: ExperimentConfig, threads: int = 1) -> dict:
    started = time.perf_counter()
    model = cfg.models[0] if cfg.models else "model1"
    items = [(n, s) for n in cfg.n_grid for s in range(cfg.trials)]
    results = _map(lambda it: _bayes_trial(cfg, model, *it), items, threads)
    per_n = {}
    for (n, s), res in zip(items, results):
        per_n.setdefault(n, []).append(res)
    coverage = {
        str(n): np.mean([t["coverage_90"] for t in per_n[n]], axis=0) for n in cfg.n_grid
    }
    n_last = cfg.n_grid[-1]
    counts = complexity_report(n_last, 30, cfg.replicates_for(n_last), cfg.bayes.iterations)
    body = {
        "model": model,
        "trials": {str(n): per_n[n] for n in cfg.n_grid},
        "coverage_90": coverage,
        "w2": _w2_curves(per_n, cfg.n_grid, "w2_full"),
        "w2_support": _w2_curves(per_n, cfg.n_grid, "w2_support"),
        "complexity": counts,
    }
    return _finish(cfg, body, started, threads)


RUNNERS = {
    "model_sweep": run_model_sweep,
    "robustness_sweep": run_robustness_sweep,
    "lotka_volterra": run_lotka_volterra,
    "bounds_overlay": run_bounds_overlay,
    "bayes_compare": run_bayes_compare,
}


def run(cfg: ExperimentConfig, threads: int = 1) -> dict:
    return RUNNERS[cfg.experiment](cfg, threads)
