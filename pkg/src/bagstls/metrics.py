"""Selection metrics, 1-d Wasserstein-2 distance and interval coverage."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import as_support
from .errors import EmptySamples

QUANTILE_GRID_SIZE = 1000


@dataclass(frozen=True, eq=False)
class TrialOutcome:
    estimated_support: tuple
    true_support: tuple
    p: int
    coefficients: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "estimated_support", as_support(self.estimated_support))
        object.__setattr__(self, "true_support", as_support(self.true_support))
        for j in self.estimated_support + self.true_support:
            if not 0 <= j < self.p:
                raise ValueError(f"index {j} outside [0, {self.p})")

    @property
    def estimated_inactive(self) -> tuple:
        s = set(self.estimated_support)
        return tuple(j for j in range(self.p) if j not in s)

    @property
    def false_discovery(self) -> bool:
        """Some true null was declared active."""
        return not set(self.estimated_support) <= set(self.true_support)

    @property
    def missed_active(self) -> bool:
        return not set(self.true_support) <= set(self.estimated_support)

    @property
    def exact(self) -> bool:
        return self.estimated_support == self.true_support


def _check(outcomes) -> list:
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("need at least one trial outcome")
    return outcomes


def empirical_fdp(outcomes: Sequence[TrialOutcome]) -> float:
    """Fraction of trials in which the true null set is not contained in
    the estimated inactive set."""
    outcomes = _check(outcomes)
    return sum(o.false_discovery for o in outcomes) / len(outcomes)


def empirical_tdp(outcomes: Sequence[TrialOutcome]) -> float:
    """Fraction of trials in which no true active column was discarded.

    With an empty true support this is 1 by convention.
    """
    outcomes = _check(outcomes)
    return sum(not o.missed_active for o in outcomes) / len(outcomes)


def relative_frequency(outcomes: Sequence[TrialOutcome]) -> np.ndarray:
    """Per-column fraction of trials with the zero/nonzero status right."""
    outcomes = _check(outcomes)
    p = outcomes[0].p
    correct = np.zeros(p)
    for o in outcomes:
        if o.p != p:
            raise ValueError("outcomes disagree on p")
        est = np.zeros(p, dtype=bool)
        est[list(o.estimated_support)] = True
        truth = np.zeros(p, dtype=bool)
        truth[list(o.true_support)] = True
        correct += est == truth
    return correct / len(outcomes)


def _quantile_grid(x: np.ndarray, size: int) -> np.ndarray:
    # generalized inverse CDF at midpoint levels (k + 1/2) / size
    u = (np.arange(size) + 0.5) / size
    idx = np.ceil(u * x.size).astype(int) - 1
    return x[np.clip(idx, 0, x.size - 1)]


def wasserstein2_1d(samples_a, samples_b, grid_size: int = QUANTILE_GRID_SIZE) -> float:
    """Wasserstein-2 distance between two empirical distributions on the line.

    Equal sizes use the sorted (optimal) coupling exactly. Otherwise both
    empirical quantile functions are read at ``grid_size`` midpoint levels.
    """
    a = np.sort(np.asarray(samples_a, dtype=float).ravel())
    b = np.sort(np.asarray(samples_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise EmptySamples("both sample sets must be nonempty")
    if a.size != b.size:
        a = _quantile_grid(a, grid_size)
        b = _quantile_grid(b, grid_size)
    d = a - b
    with np.errstate(over="ignore", under="ignore"):
        ms = float(np.mean(d * d))
    if (ms == 0.0 or not math.isfinite(ms)) and np.any(d):
        # squares under- or overflowed; rescale like hypot
        s = float(np.max(np.abs(d)))
        return s * math.sqrt(float(np.mean((d / s) ** 2)))
    return math.sqrt(ms)


def interval_coverage(distributions, truth, level: float = 0.9) -> np.ndarray:
    """Per-column fraction of trials whose equal-tailed percentile interval
    contains the true value.

    ``distributions`` holds one :class:`EnsembleDistribution` (or raw
    ``B x p`` sample matrix) per trial; ``truth`` is a length-p vector or a
    sequence of them, one per trial.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    dists = list(distributions)
    if not dists:
        raise ValueError("need at least one trial")
    truth = np.asarray(truth, dtype=float)
    hits = None
    for t, dist in enumerate(dists):
        samples = getattr(dist, "coefficient_samples", dist)
        samples = np.asarray(samples, dtype=float)
        lo = np.quantile(samples, (1 - level) / 2, axis=0)
        hi = np.quantile(samples, (1 + level) / 2, axis=0)
        tv = truth[t] if truth.ndim == 2 else truth
        inside = (lo <= tv) & (tv <= hi)
        hits = inside.astype(float) if hits is None else hits + inside
    return hits / len(dists)


METRIC_CSV_COLUMNS = ("metric", "index_or_set", "value", "n_trials", "config_hash")


def write_metric_csv(path, rows) -> None:
    """Rows are mappings or tuples in ``METRIC_CSV_COLUMNS`` order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_CSV_COLUMNS)
        for row in rows:
            if isinstance(row, dict):
                row = [row[c] for c in METRIC_CSV_COLUMNS]
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def metric_rows(label: str, outcomes, config_hash: str) -> list:
    """Tidy rows for EFDP, ETDP and per-column relative frequency."""
    outcomes = _check(outcomes)
    S = len(outcomes)
    rows = [
        (f"{label}efdp", "set", empirical_fdp(outcomes), S, config_hash),
        (f"{label}etdp", "set", empirical_tdp(outcomes), S, config_hash),
    ]
    for j, v in enumerate(relative_frequency(outcomes)):
        rows.append((f"{label}relative_frequency", j, float(v), S, config_hash))
    return rows
