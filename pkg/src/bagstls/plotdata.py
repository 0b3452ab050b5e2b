"""Tidy per-panel CSV tables (``x, series, value, lo, hi``) from reports."""

from __future__ import annotations

import csv
import math
import os

FIGURES = {
    "fig1b": "bounds_overlay",
    "fig2": "model_sweep",
    "robustness_q": "robustness_sweep",
    "robustness_sigma": "robustness_sweep",
    "lv_distribution": "lotka_volterra",
    "lv_w2": "lotka_volterra",
    "bayes_w2": "bayes_compare",
}

COLUMNS = ("x", "series", "value", "lo", "hi")


def _wilson(p: float, n: int, z: float = 1.96):
    if n == 0:
        return 0.0, 1.0
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(mid - half, 0.0), min(mid + half, 1.0)


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_=." else "_" for c in name)


def _fig2(report):
    panels = {}
    for row in report["results"]:
        key = f"{row['model']}_{row['estimator']}"
        S = row["trials"]
        series = f"n={row['n']}" if row["target"] == 0 and _single_target(report, row["model"]) \
            else f"n={row['n']},target={row['target']}"
        for j, v in enumerate(row["relative_frequency"]):
            lo, hi = _wilson(v, S)
            panels.setdefault(key, []).append((j, series, v, lo, hi))
    return panels


def _single_target(report, model) -> bool:
    return all(r["target"] == 0 for r in report["results"] if r["model"] == model)


def _fig1b(report):
    rows = []
    for entry in report["overlay"]:
        n = entry["n"]
        for est, emp in sorted(entry["empirical"].items()):
            S = report["config"]["trials"]
            for metric in ("efdp", "etdp"):
                lo, hi = _wilson(emp[metric], S)
                rows.append((n, f"{est}_{metric}", emp[metric], lo, hi))
        for name, b in sorted(entry["bounds"].items()):
            rows.append((n, f"bound_{name}", b["value"], b["value"], b["value"]))
    return {"fig1b": rows}


def _robustness(report, axis):
    if report.get("axis") != axis:
        raise ValueError(f"report sweeps {report.get('axis')!r}, not {axis!r}")
    panels = {}
    for row in report["results"]:
        lo_f, hi_f = row["efdp_band"]
        lo_t, hi_t = row["etdp_band"]
        panels.setdefault(row["setting"], []).extend([
            (row["n"], f"{row['estimator']}_efdp", row["efdp"], lo_f, hi_f),
            (row["n"], f"{row['estimator']}_etdp", row["etdp"], lo_t, hi_t),
        ])
    return panels


def _lv_distribution(report):
    panels = {}
    for row in report["distribution"]:
        key = f"{row['equation']}_{row['term']}"
        panels.setdefault(key, []).append(
            (row["n"], "ensemble", row["ensemble_mean"], row["ensemble_q05"], row["ensemble_q95"])
        )
        if "posterior_mean" in row:
            panels[key].append(
                (row["n"], "posterior", row["posterior_mean"], row["posterior_q05"], row["posterior_q95"])
            )
    return panels


def _w2(report, figure_id):
    rows = []
    for label, curve in sorted(report["w2"].items()):
        for pt in curve:
            rows.append((pt["n"], label, pt["mean"], pt["lo"], pt["hi"]))
    return {figure_id: rows}


def panel_tables(report: dict, figure_id: str) -> dict:
    """``{panel_name: [(x, series, value, lo, hi), ...]}`` for one figure."""
    if figure_id not in FIGURES:
        raise ValueError(f"unknown figure id {figure_id!r}; choose from {sorted(FIGURES)}")
    kind = report["config"]["experiment"]
    if kind != FIGURES[figure_id]:
        raise ValueError(f"figure {figure_id!r} needs a {FIGURES[figure_id]} report, got {kind}")
    if figure_id == "fig2":
        return _fig2(report)
    if figure_id == "fig1b":
        return _fig1b(report)
    if figure_id == "robustness_q":
        return _robustness(report, "q")
    if figure_id == "robustness_sigma":
        return _robustness(report, "sigma")
    if figure_id == "lv_distribution":
        return _lv_distribution(report)
    return _w2(report, figure_id)


def emit_plot_data(report: dict, figure_id: str, out_dir) -> list:
    """Write one CSV per panel into ``out_dir``; returns the file paths."""
    panels = panel_tables(report, figure_id)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, rows in sorted(panels.items()):
        fname = f"{figure_id}.csv" if name == figure_id else f"{figure_id}_{_safe(name)}.csv"
        path = os.path.join(out_dir, fname)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            for row in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        paths.append(path)
    return paths
