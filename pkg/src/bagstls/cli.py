"""Command line entry point: ``bagstls <subcommand>``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import csv
import json
import os
import sys

import click

from . import datagen as dg
from .bounds import BoundInputs, bound_report
from .core import read_dataset_csv, write_dataset_csv
from .ensemble import residual_bootstrap_uq
from .errors import BagstlsError, ConfigError, NumericalError
from .experiments import (
    DEFAULT_HYPER,
    ExperimentConfig,
    EstimatorHyper,
    canonical_json,
    fit_estimator,
    load_report,
    run,
    write_report,
)
from .metrics import write_metric_csv
from .plotdata import FIGURES, emit_plot_data

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib
import tomli_w


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            ctx.exit(2)
        except NumericalError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            ctx.exit(3)
        except (BagstlsError, ValueError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(2)


@click.group(cls=_Group)
@click.version_option(package_name="artifact")
def cli():
    """Bagging inclusion-probability STLS experiments."""


def _common(f):
    f = click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
                     help="Worker threads; results do not depend on it.")(f)
    f = click.option("--desk", is_flag=True, help="Desk budget: at most 50 trials and 100 replicates.")(f)
    f = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                     help="Output directory (defaults to the config's output_dir).")(f)
    f = click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=None,
                     help="Override the root seed.")(f)
    f = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="Experiment TOML file.")(f)
    return f


def _load_config(path, experiment, seed, desk) -> ExperimentConfig:
    if path is None:
        cfg = ExperimentConfig.for_experiment(experiment)
    else:
        cfg = ExperimentConfig.load(path)
        if cfg.experiment != experiment:
            raise ConfigError("experiment", f"expected {experiment!r}, file says {cfg.experiment!r}")
    if seed is not None:
        cfg.seed = seed
    if desk:
        cfg = cfg.desk()
    cfg.validate()
    return cfg


def _report_metric_rows(report) -> list:
    h = report["config_hash"]
    rows = []
    for r in report.get("results", []):
        label = f"{r.get('setting', r['model'])}:{r['estimator']}:n={r['n']}:y{r['target']}"
        S = r["trials"]
        rows.append((f"{label}:efdp", "set", r["efdp"], S, h))
        rows.append((f"{label}:etdp", "set", r["etdp"], S, h))
        rows.append((f"{label}:exact_rate", "set", r["exact_rate"], S, h))
        for j, v in enumerate(r["relative_frequency"]):
            rows.append((f"{label}:relative_frequency", j, v, S, h))
    return rows


def _run_and_write(experiment, config_path, seed, out_dir, desk, threads):
    cfg = _load_config(config_path, experiment, seed, desk)
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    report = run(cfg, threads)
    path = os.path.join(out_dir, "report.json")
    write_report(report, path)
    rows = _report_metric_rows(report)
    if rows:
        write_metric_csv(os.path.join(out_dir, "metrics.csv"), rows)
    with open(os.path.join(out_dir, "config.toml"), "w") as fh:
        fh.write(cfg.dumps())
    click.echo(json.dumps({"report": path, "content_hash": report["content_hash"]}))
    return report


@cli.command()
@_common
def sweep(config_path, seed, out_dir, desk, threads):
    """Model 1-3 relative-frequency sweep over the n grid."""
    _run_and_write("model_sweep", config_path, seed, out_dir, desk, threads)


@cli.command()
@_common
def robustness(config_path, seed, out_dir, desk, threads):
    """Noise-level or active-count sweep on Model 1."""
    _run_and_write("robustness_sweep", config_path, seed, out_dir, desk, threads)


@cli.command()
@_common
def lv(config_path, seed, out_dir, desk, threads):
    """Lotka-Volterra discovery with ensemble UQ and the Gibbs reference."""
    _run_and_write("lotka_volterra", config_path, seed, out_dir, desk, threads)


@cli.command("bayes-compare")
@_common
def bayes_compare(config_path, seed, out_dir, desk, threads):
    """Bootstrap UQ against the spike-and-slab posterior on a synthetic model."""
    _run_and_write("bayes_compare", config_path, seed, out_dir, desk, threads)


def _read_table(path) -> dict:
    try:
        if str(path).endswith(".json"):
            with open(path) as fh:
                return json.load(fh)
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(path), str(exc)) from exc


@cli.command()
@click.option("--inputs", "inputs_path", type=click.Path(dir_okay=False), default=None,
              help="BoundInputs as TOML or JSON; prints every bound.")
@_common
def bounds(inputs_path, config_path, seed, out_dir, desk, threads):
    """Evaluate the closed-form bounds, or run the empirical overlay."""
    if inputs_path is not None:
        raw = _read_table(inputs_path)
        try:
            inp = BoundInputs.from_dict(raw.get("bounds", raw))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(inputs_path), str(exc)) from exc
        text = json.dumps(json.loads(canonical_json(bound_report(inp))), indent=2, sort_keys=True)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, "bounds.json"), "w") as fh:
                fh.write(text + "\n")
        click.echo(text)
        return
    _run_and_write("bounds_overlay", config_path, seed, out_dir, desk, threads)


@cli.command("plot-data")
@click.option("--report", "report_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--figure", "figure_id", type=click.Choice(sorted(FIGURES)), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="plots", show_default=True)
def plot_data(report_path, figure_id, out_dir):
    """Tidy CSV files (x, series, value, lo, hi), one per figure panel."""
    for path in emit_plot_data(load_report(report_path), figure_id, out_dir):
        click.echo(path)


@cli.command()
@click.option("--model", type=click.Choice(["model1", "model2", "model3", "lv"]), required=True)
@click.option("--n", type=click.IntRange(min=2), required=True)
@click.option("--sigma", type=click.FloatRange(min=0), default=None,
              help="Noise level (model default when omitted; lognormal sd for lv).")
@click.option("--q", "n_active", type=click.IntRange(0, 30), default=15, show_default=True,
              help="Active columns for model1.")
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Lotka-Volterra experiment TOML (its [lv] table is used).")
def generate(model, n, sigma, n_active, seed, out_dir, config_path):
    """Write a seeded synthetic dataset (and trajectory for lv) as CSV."""
    os.makedirs(out_dir, exist_ok=True)
    if model == "lv":
        cfg = (ExperimentConfig.load(config_path) if config_path
               else ExperimentConfig.for_experiment("lotka_volterra"))
        spec = cfg.lv
        if sigma is not None:
            spec.noise_sd = sigma
        x0 = tuple(spec.x0)
        if spec.noise_target == "initial_condition" and spec.noise_sd > 0:
            x0 = dg.perturb_initial_condition(x0, spec.noise_sd, seed)
        traj = dg.simulate_lotka_volterra(tuple(spec.params), x0, tuple(spec.t_span), n,
                                          spec.sampling, seed, spec.step)
        if spec.noise_target == "measurement" and spec.noise_sd > 0:
            traj = dg.add_lognormal_noise(traj, spec.noise_sd, seed)
        data = dg.build_discovery_dataset(traj, spec.max_degree, spec.derivative_source)
        write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), traj)
        truth = {
            "supports": [list(s) for s in dg.lv_true_supports(spec.max_degree)],
            "coefficients": dg.lv_true_coefficients(spec.max_degree, traj.normalization_scales).tolist(),
            "normalization_scales": traj.normalization_scales.tolist(),
            "x0": list(x0),
        }
        echo = {"model": "lv", "n": n, "seed": seed, "lv": _lv_echo(spec)}
    else:
        spec = dg.SyntheticSpec(model, n, sigma, seed, n_active=n_active)
        syn = dg.generate(spec)
        data = syn.data
        truth = {"supports": [list(s) for s in syn.supports], "coefficients": syn.beta.tolist()}
        echo = {"model": model, "n": n, "sigma_noise": spec.sigma, "seed": seed, "n_active": n_active}
    write_dataset_csv(os.path.join(out_dir, "dataset.csv"), data)
    with open(os.path.join(out_dir, "truth.json"), "w") as fh:
        json.dump(truth, fh, indent=2)
    with open(os.path.join(out_dir, "spec.toml"), "w") as fh:
        fh.write(tomli_w.dumps(echo))
    click.echo(os.path.join(out_dir, "dataset.csv"))


def _lv_echo(spec) -> dict:
    from dataclasses import asdict

    return asdict(spec)


def write_trajectory_csv(path, traj) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "u", "v", "u_noisy", "v_noisy", "du", "dv"])
        for t, s, z, d in zip(traj.times, traj.states, traj.noisy_states, traj.derivatives):
            w.writerow([repr(float(x)) for x in (t, *s, *z, *d)])


@cli.command()
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--estimator", type=click.Choice(["stls", "lasso", "bstls", "blasso"]),
              default="bstls", show_default=True)
@click.option("--target", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--hyper", "hyper_key", default="model1", show_default=True,
              help="Hyperparameter block to start from (model1, model2, model3, lv).")
@click.option("--gamma-factor", type=float, default=None)
@click.option("--lam", type=float, default=None, help="Lasso penalty.")
@click.option("--fraction", type=float, default=None)
@click.option("--p-c", "p_c", type=float, default=None)
@click.option("--sigma", type=float, default=None, help="Threshold sigma (known).")
@click.option("--estimate-sigma", is_flag=True, help="Use the OLS residual sd as threshold sigma.")
@click.option("--max-passes", type=click.IntRange(min=1), default=None)
@click.option("--replicates", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--uq", "uq_replicates", type=click.IntRange(min=0), default=0,
              help="Residual-bootstrap replicates on the selected support (0 = none).")
@_common
def fit(data_path, estimator, target, hyper_key, gamma_factor, lam, fraction, p_c, sigma,
        estimate_sigma, max_passes, replicates, uq_replicates, config_path, seed, out_dir,
        desk, threads):
    """Fit one estimator to a dataset CSV and print the result as JSON."""
    from dataclasses import replace

    from .experiments import threshold_sigma

    if config_path:
        cfg = ExperimentConfig.load(config_path)
        hyper = cfg.hyper
    else:
        hyper = DEFAULT_HYPER
    if hyper_key not in hyper:
        raise ConfigError("hyper", f"no block named {hyper_key!r}")
    hp: EstimatorHyper = hyper[hyper_key]
    updates = {k: v for k, v in {
        "gamma_factor": gamma_factor, "lasso_lambda": lam, "fraction": fraction, "p_c": p_c,
        "sigma": sigma, "max_passes": max_passes,
    }.items() if v is not None}
    if estimate_sigma:
        updates["sigma_policy"] = "estimated"
    hp = replace(hp, **updates)
    data = read_dataset_csv(data_path)
    seed = 0 if seed is None else seed
    sig = threshold_sigma(hp, data, target, dg.MODEL_DEFAULT_SIGMA.get(hyper_key, 1.0))
    support, coef, excluded = fit_estimator(estimator, data, target, hp, replicates, seed, sig)
    out = {
        "estimator": estimator,
        "target": target,
        "support": list(support),
        "support_names": [data.names()[j] for j in support],
        "coefficients": [float(v) for v in coef],
        "threshold_sigma": sig,
        "excluded_replicates": excluded,
    }
    if uq_replicates:
        dist = residual_bootstrap_uq(data, target, support, uq_replicates, seed)
        out["uq"] = dist.to_json_dict()
    text = json.dumps(out, indent=2)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "fit.json"), "w") as fh:
            fh.write(text + "\n")
    click.echo(text)


def main(argv=None):
    cli.main(args=argv, prog_name="bagstls")


if __name__ == "__main__":  # pragma: no cover
    main()
