"""Acceptance checks, one test per criterion.

Each test prints a ``criterion k: PASS|FAIL`` line (collected again in the
terminal summary) and fails when the criterion is not met.
"""

import math
import time
from itertools import permutations

import mpmath as mp
import numpy as np
import pytest
from scipy import stats

from bagstls import datagen as dg
from bagstls.bayes import SpikeSlabConfig, gibbs_sample
from bagstls.bounds import (
    BoundInputs,
    bip_fdp_bound,
    bip_tdp_bound_large,
    bip_tdp_bound_small,
    gap_bound,
    stls_bounds,
)
from bagstls.core import Dataset
from bagstls.ensemble import ResamplePlan, bip_fit, residual_bootstrap_uq
from bagstls.experiments import (
    DEFAULT_HYPER,
    ExperimentConfig,
    fit_estimator,
    run,
    threshold_rule,
)
from bagstls.metrics import interval_coverage, wasserstein2_1d
from bagstls.rng import derive_seed
from bagstls.sparse import lasso_fit, stls_fit

pytestmark = pytest.mark.slow
ESTIMATORS = ("lasso", "stls", "blasso")


def _desk_sweep(model, n_grid, estimators, trials=50, threads=4, **kw):
    cfg = ExperimentConfig.for_experiment(
        "model_sweep", trials=trials, replicates=100, models=[model], n_grid=n_grid,
        estimators=list(estimators), **kw,
    )
    return run(cfg, threads=threads)


@pytest.fixture(scope="module")
def fig2_runs():
    """Criterion 2's experiment at 1 and 8 threads, with timings."""
    out = {}
    for threads in (1, 8):
        t0 = time.perf_counter()
        rep = _desk_sweep("model1", [50, 100, 150, 200, 250], ("lasso", "stls", "blasso", "bstls"),
                          threads=threads)
        out[threads] = (rep, time.perf_counter() - t0)
    return out


def test_c01_zero_noise_oracle_recovery(verdict):
    t0 = time.perf_counter()
    bad = []
    for model in ("model1", "model2", "model3"):
        hp = DEFAULT_HYPER[model]
        for s in range(20):
            syn = dg.generate(dg.SyntheticSpec(model, 150, sigma_noise=0.0, seed=derive_seed(1, model, s)))
            rule = threshold_rule(hp, syn.data.p, dg.MODEL_DEFAULT_SIGMA[model])
            plan = ResamplePlan(50, hp.fraction, seed=s)
            for k in range(syn.data.d):
                truth, beta = syn.true_support(k), syn.beta[:, k]
                for fit in (stls_fit(syn.data, k, rule), bip_fit(syn.data, k, rule, plan, hp.p_c)[0]):
                    if fit.support != truth or np.max(np.abs(fit.coefficients - beta)) > 1e-8:
                        bad.append((model, s, k))
    secs = time.perf_counter() - t0
    verdict(1, not bad and secs < 10, f"failures={len(bad)} of 2x80 fits; {secs:.1f}s (< 10s)")


def test_c02_fig2_desk_replication(verdict, fig2_runs):
    rep, secs = fig2_runs[1]
    mins = {}
    for r in rep["results"]:
        mins[(r["estimator"], r["n"])] = min(r["relative_frequency"])
    at250 = [r for r in rep["results"] if r["estimator"] == "bstls" and r["n"] == 250][0]
    top_ok = min(at250["relative_frequency"]) >= 0.95
    violations = [
        (e, n) for n in [50, 100, 150, 200, 250] for e in ESTIMATORS
        if mins[("bstls", n)] < mins[(e, n)]
    ]
    ok = top_ok and len(violations) <= 1 and secs < 300
    bst = ", ".join(f"{mins[('bstls', n)]:.2f}" for n in [50, 100, 150, 200, 250])
    verdict(2, ok, f"bstls min rel-freq by n=[{bst}]; violations={violations}; {secs:.0f}s (< 300s)")


def test_c03_model2_perfect_selection(verdict):
    t0 = time.perf_counter()
    rep = _desk_sweep("model2", [150], ["bstls"])
    secs = time.perf_counter() - t0
    rate = rep["results"][0]["exact_rate"]
    verdict(3, rate >= 0.9 and secs < 120, f"exact-support rate {rate:.2f} (>= 0.90); {secs:.0f}s (< 120s)")


def test_c04_model3_lasso_constant_term(verdict):
    t0 = time.perf_counter()
    selected_const = {}
    for lam in (0.01, 0.5, 100.0):
        rep = _desk_sweep("model3", [150], ["lasso"], hyper={"model3": {"lasso_lambda": lam}})
        # the constant is a null column: relative frequency 1 means never selected
        selected_const[lam] = max(1 - r["relative_frequency"][0] for r in rep["results"])
    rep = _desk_sweep("model3", [150], ["bstls"])
    rates = [r["exact_rate"] for r in rep["results"]]
    secs = time.perf_counter() - t0
    ok = all(v == 0 for v in selected_const.values()) and min(rates) >= 0.9 and secs < 180
    verdict(4, ok, f"lasso constant-selection rate {selected_const}; bstls exact rates {rates}; {secs:.0f}s")


def test_c05_exponential_fdp_decay(verdict):
    t0 = time.perf_counter()
    grid = [50, 100, 150, 200, 250]
    rep = _desk_sweep("model1", grid, ["bstls"], trials=200)
    secs = time.perf_counter() - t0
    rows = sorted(rep["results"], key=lambda r: r["n"])
    efdp = [r["efdp"] for r in rows]
    # an increase counts as an inversion only if it leaves the previous Wilson band
    inversions = sum(
        1 for a, b in zip(rows, rows[1:]) if b["efdp"] > a["efdp"] and b["efdp"] > a["efdp_band"][1]
    )
    raw_increases = sum(1 for a, b in zip(efdp, efdp[1:]) if b > a)
    positive = [(n, v) for n, v in zip(grid, efdp) if v > 0]
    drop = math.log(efdp[0]) - math.log(positive[-1][1]) if efdp[0] > 0 and positive else 0.0
    ok = inversions <= 1 and raw_increases <= 1 and drop >= 1.5 and secs < 600
    verdict(5, ok, f"EFDP by n={efdp}; log drop {drop:.2f} (>= 1.5) at n={positive[-1][0]}; "
                   f"increases={raw_increases}; {secs:.0f}s")


def _mp_bounds(inp):
    n, p, q, pc, eps = (mp.mpf(v) for v in (inp.n, inp.p, inp.q, inp.p_c, inp.eps))
    m = (mp.sqrt(n * mp.mpf(inp.rho1)) * abs(mp.mpf(inp.beta_min)) / mp.mpf(inp.sigma)
         - mp.sqrt(2 * mp.log(n)) - mp.sqrt(2 * mp.log(p - q)))
    return [
        (p - q) * mp.exp(mp.mpf(1) / 3 - n * pc / 3),
        1 - q * mp.exp(-n * (1 - 2 * pc) ** 2 / 6),
        1 - q * mp.exp(-n * pc ** 2 / (3 * p) + 2 * n * pc / 3 - n * p / 3),
        1 - p * mp.exp(-n * (mp.mpf(1) / 4 - eps / 2 - 1 / (2 * n)) ** 2 / 2),
        q / n,
        1 - 2 * mp.exp(-m * m / 2),
    ]


def _strictly_below(fn, oracle, idx, lo_inp, hi_inp):
    """``fn(lo_inp) < fn(hi_inp)`` whenever the exact values differ by more
    than a few ulps; otherwise the doubles may coincide but must not cross."""
    a, b = fn(lo_inp), fn(hi_inp)
    gap = oracle(hi_inp)[idx] - oracle(lo_inp)[idx]
    if gap > 8 * math.ulp(max(abs(a), abs(b), 1e-300)):
        return a < b
    return a <= b


def test_c06_bound_evaluators(verdict):
    mp.mp.dps = 60
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst = 0.0
    monotone_ok = True
    for _ in range(1000):
        p = int(rng.integers(2, 200))
        inp = BoundInputs(
            n=int(rng.integers(5, 2000)), p=p, q=int(rng.integers(1, p)),
            p_c=float(rng.uniform(0.01, 0.99)), eps=float(rng.uniform(0.01, 0.49)),
            sigma=float(rng.uniform(0.1, 5)), rho1=float(rng.uniform(0.05, 1)), rho2=1.0,
            beta_min=float(rng.uniform(0.05, 3)),
        )
        got = [bip_fdp_bound(inp), bip_tdp_bound_large(inp), bip_tdp_bound_small(inp),
               gap_bound(inp), *stls_bounds(inp)]
        for g, o in zip(got, _mp_bounds(inp)):
            if o != 0:
                worst = max(worst, float(abs(mp.mpf(g) - o) / abs(o)))
        bigger = BoundInputs(**{**inp.to_dict(), "n": inp.n + int(rng.integers(1, 100))})
        monotone_ok &= _strictly_below(bip_fdp_bound, _mp_bounds, 0, bigger, inp)
        if inp.p_c < 0.5:
            monotone_ok &= _strictly_below(bip_tdp_bound_large, _mp_bounds, 1, inp, bigger)
        if inp.p_c < 0.98:
            higher = BoundInputs(**{**inp.to_dict(), "p_c": inp.p_c + 0.01})
            monotone_ok &= _strictly_below(bip_fdp_bound, _mp_bounds, 0, higher, inp)
    secs = time.perf_counter() - t0
    ok = worst <= 1e-12 and monotone_ok and secs < 30
    verdict(6, ok, f"max relative error {worst:.2e} (<= 1e-12); monotone={monotone_ok}; {secs:.1f}s")


def test_c07_w2_exact_and_metric(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(500):
        m = int(rng.integers(1, 7))
        a = rng.integers(-50, 51, m).astype(float)
        b = rng.integers(-50, 51, m).astype(float)
        brute = min(sum((x - y) ** 2 for x, y in zip(a, perm)) for perm in permutations(b))
        mismatches += wasserstein2_1d(a, b) != math.sqrt(brute / m)
    axioms = True
    for _ in range(500):
        m = int(rng.integers(1, 10))
        a, b, c = (rng.standard_normal(m) for _ in range(3))
        axioms &= wasserstein2_1d(a, b) == wasserstein2_1d(b, a)
        axioms &= wasserstein2_1d(a, a) == 0.0
        axioms &= wasserstein2_1d(a, c) <= wasserstein2_1d(a, b) + wasserstein2_1d(b, c) + 1e-12
    secs = time.perf_counter() - t0
    verdict(7, mismatches == 0 and axioms and secs < 30,
            f"brute-force mismatches {mismatches}/500; axioms={axioms}; {secs:.1f}s")


def test_c08_lasso_soft_threshold(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        n, p = int(rng.integers(8, 40)), int(rng.integers(1, 8))
        Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
        X = Q * math.sqrt(n)
        y = X @ rng.uniform(-2, 2, p) + 0.3 * rng.standard_normal(n)
        lam = float(rng.uniform(0, 2))
        fit = lasso_fit(Dataset(X, y, is_standardized=True), 0, lam=lam, tol=1e-12)
        z = X.T @ y / n
        closed = np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)
        worst = max(worst, float(np.max(np.abs(fit.coefficients - closed))))
    secs = time.perf_counter() - t0
    verdict(8, worst <= 1e-6 and secs < 10, f"max deviation {worst:.1e} (<= 1e-6); {secs:.1f}s")


def test_c09_bootstrap_uq_validity(verdict):
    t0 = time.perf_counter()
    dists, pivots = [], []
    a = np.zeros(30)
    a[15] = 1.0
    hp = DEFAULT_HYPER["model1"]
    for s in range(100):
        seed = derive_seed(0, "uq", s)
        syn = dg.generate(dg.SyntheticSpec("model1", 200, None, seed))
        support, _, _ = fit_estimator("bstls", syn.data, 0, hp, 200, seed, 1.0)
        dist = residual_bootstrap_uq(syn.data, 0, support, 200, seed, contrast=a)
        dists.append(dist)
        pivots.append(dist.pivots)
    cov = interval_coverage(dists, syn.beta[:, 0], 0.9)[15:]
    lo, hi = np.quantile(np.concatenate(pivots), [0.05, 0.95])
    secs = time.perf_counter() - t0
    ok = cov.min() >= 0.8 and abs(lo + 1.645) <= 0.3 and abs(hi - 1.645) <= 0.3 and secs < 300
    verdict(9, ok, f"min coverage {cov.min():.2f} (>= 0.80); pivot quantiles ({lo:.3f}, {hi:.3f}); {secs:.0f}s")


def test_c10_lotka_volterra(verdict):
    t0 = time.perf_counter()
    cfg = ExperimentConfig.for_experiment("lotka_volterra", trials=5, replicates=100, n_grid=[100, 500])
    rep = run(cfg, threads=4)
    secs = time.perf_counter() - t0
    sel = {s["n"]: s["exact_rate"] for s in rep["selection"]}
    means = [r["ensemble_mean"] for r in rep["distribution"] if r["n"] == 500]
    mean_ok = all(abs(m - t) <= 0.15 for m, t in zip(means, dg.LV_NORMALIZED))
    w2 = {k: (v[0]["mean"], v[-1]["mean"]) for k, v in rep["w2"].items()}
    w2_ok = len(w2) == 4 and all(b < a for a, b in w2.values())
    ok = sel[500] == 1.0 and mean_ok and w2_ok and secs < 600
    shown = ", ".join(f"{k} {a:.3f}->{b:.3f}" for k, (a, b) in w2.items())
    verdict(10, ok, f"exact rate at n=500 {sel[500]:.1f}; means {np.round(means, 3).tolist()}; "
                    f"W2 n=100->500: {shown}; {secs:.0f}s")


def test_c11_gibbs_sanity(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    X = rng.standard_normal((40, 4))
    y = X @ np.array([1.0, -0.5, 0.0, 2.0]) + 0.5 * rng.standard_normal(40)
    sigma, c = 0.5, 1.0
    post = gibbs_sample(Dataset(X, y), 0, SpikeSlabConfig(
        slab_sd=c, prior_inclusion=1.0, sigma=sigma, iterations=5500, burn_in=500, seed=1))
    ridge = np.linalg.solve(X.T @ X + (sigma / c) ** 2 * np.eye(4), X.T @ y)
    se = post.beta_samples.std(axis=0, ddof=1) / math.sqrt(post.beta_samples.shape[0])
    z = np.abs(post.beta_samples.mean(axis=0) - ridge) / se
    x = X[:, 0]
    post1 = gibbs_sample(Dataset(x[:, None], y), 0, SpikeSlabConfig(
        slab_sd=c, prior_inclusion=1.0, sigma=sigma, iterations=5500, burn_in=500, seed=2))
    v = 1 / (x @ x / sigma ** 2 + 1 / c ** 2)
    ks = stats.kstest(post1.beta_samples[:, 0], "norm", args=(v * (x @ y) / sigma ** 2, math.sqrt(v))).statistic
    secs = time.perf_counter() - t0
    ok = z.max() <= 3 and ks < 0.05 and secs < 60
    verdict(11, ok, f"ridge max |z| {z.max():.2f} (<= 3); KS {ks:.4f} (< 0.05) at 5000 draws; {secs:.1f}s")


def test_c12_robustness_spread(verdict):
    t0 = time.perf_counter()
    spreads = {"bstls": [], "lasso": []}
    for seed in range(10):
        cfg = ExperimentConfig.for_experiment(
            "robustness_sweep", trials=20, replicates=100, n_grid=[250], seed=seed,
            estimators=["lasso", "bstls"], robustness={"axis": "q", "values": [1, 5, 10, 15]},
        )
        rep = run(cfg, threads=4)
        for est in spreads:
            spreads[est].append(rep["efdp_spread"][est]["250"])
    secs = time.perf_counter() - t0
    b, lz = float(np.mean(spreads["bstls"])), float(np.mean(spreads["lasso"]))
    verdict(12, b <= lz and secs < 300, f"mean EFDP spread bstls {b:.3f} <= lasso {lz:.3f}; {secs:.0f}s")


def test_c13_determinism_across_threads(verdict, fig2_runs):
    h1 = fig2_runs[1][0]["content_hash"]
    h8 = fig2_runs[8][0]["content_hash"]
    verdict(13, h1 == h8, f"hash threads=1 {h1[:16]} vs threads=8 {h8[:16]}")
