import csv
import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bagstls.errors import EmptySamples
from bagstls.metrics import (
    METRIC_CSV_COLUMNS,
    TrialOutcome,
    empirical_fdp,
    empirical_tdp,
    interval_coverage,
    metric_rows,
    relative_frequency,
    wasserstein2_1d,
    write_metric_csv,
)

TRUTH = (2, 3)


def _outcomes(estimates, p=5):
    return [TrialOutcome(e, TRUTH, p) for e in estimates]


def brute_w2(a, b):
    best = min(sum((x - y) ** 2 for x, y in zip(a, perm)) for perm in permutations(b))
    return math.sqrt(best / len(a))


def test_fdp_tdp_examples():
    assert empirical_fdp(_outcomes([TRUTH] * 4)) == 0.0
    assert empirical_fdp(_outcomes([(0, 2, 3)] * 4)) == 1.0
    assert empirical_fdp(_outcomes([(0, 2, 3)] * 3 + [TRUTH] * 7)) == pytest.approx(0.3)
    assert empirical_tdp(_outcomes([TRUTH] * 4)) == 1.0
    assert empirical_tdp(_outcomes([(2,)] * 4)) == 0.0
    assert empirical_tdp(_outcomes([TRUTH] * 7 + [(3,)] * 3)) == pytest.approx(0.7)
    assert empirical_tdp([TrialOutcome((1,), (), 3)]) == 1.0


def test_fdp_complement_identity():
    rng = np.random.default_rng(0)
    outs = [TrialOutcome(tuple(np.flatnonzero(rng.random(5) < 0.5)), TRUTH, 5) for _ in range(50)]
    contained = sum(set(o.estimated_support) <= set(TRUTH) for o in outs) / 50
    assert empirical_fdp(outs) + contained == 1.0


def test_relative_frequency():
    np.testing.assert_array_equal(relative_frequency(_outcomes([TRUTH] * 3)), np.ones(5))
    outs = [TrialOutcome((0, 2, 3), TRUTH, 5)] * 40 + [TrialOutcome(TRUTH, TRUTH, 5)] * 160
    freq = relative_frequency(outs)
    assert freq[0] == pytest.approx(0.8)
    assert np.all(freq[1:] == 1.0)
    shuffled = list(reversed(outs))
    np.testing.assert_array_equal(relative_frequency(shuffled), freq)
    with pytest.raises(ValueError):
        relative_frequency([])


def test_trial_outcome_partition():
    o = TrialOutcome((1, 4), TRUTH, 6)
    assert set(o.estimated_support) | set(o.estimated_inactive) == set(range(6))
    assert not set(o.estimated_support) & set(o.estimated_inactive)
    with pytest.raises(ValueError):
        TrialOutcome((7,), TRUTH, 5)


def test_w2_matches_brute_force_assignment():
    rng = np.random.default_rng(1)
    for _ in range(500):
        m = int(rng.integers(1, 7))
        # integer atoms keep every sum exact, so equality can be strict
        a = rng.integers(-20, 21, m).astype(float)
        b = rng.integers(-20, 21, m).astype(float)
        assert wasserstein2_1d(a, b) == brute_w2(list(a), list(b))
    for _ in range(100):
        m = int(rng.integers(1, 7))
        a, b = rng.standard_normal(m), rng.standard_normal(m)
        assert wasserstein2_1d(a, b) == pytest.approx(brute_w2(list(a), list(b)), rel=1e-12)


def test_w2_examples():
    assert wasserstein2_1d([3.0, 1.0, 2.0], [1.0, 2.0, 3.0]) == 0.0
    assert wasserstein2_1d([0.0, 1.0], [1.0, 2.0]) == 1.0
    assert wasserstein2_1d([2.5], [-1.0]) == 3.5
    with pytest.raises(EmptySamples):
        wasserstein2_1d([], [1.0])


def test_w2_unequal_sizes_use_quantile_grid():
    rng = np.random.default_rng(2)
    a = rng.standard_normal(3000)
    b = rng.standard_normal(5000) + 1.0
    assert wasserstein2_1d(a, b) == pytest.approx(1.0, abs=0.1)
    assert wasserstein2_1d([0.0, 1.0], [0.0, 0.0, 1.0, 1.0]) == 0.0


def test_w2_extreme_scales():
    assert wasserstein2_1d([0.0], [1.24e-241]) == 1.24e-241
    assert wasserstein2_1d([0.0, 0.0], [3e200, 4e200]) == pytest.approx(math.sqrt(12.5) * 1e200)


same_size = st.integers(1, 8).flatmap(
    lambda m: st.tuples(*[st.lists(st.floats(-100, 100), min_size=m, max_size=m)] * 3)
)


@settings(max_examples=200, deadline=None)
@given(same_size)
def test_w2_metric_axioms(triple):
    a, b, c = triple
    assert wasserstein2_1d(a, b) == wasserstein2_1d(b, a)
    assert wasserstein2_1d(a, a) == 0.0
    assert wasserstein2_1d(a, c) <= wasserstein2_1d(a, b) + wasserstein2_1d(b, c) + 1e-9
    if wasserstein2_1d(a, b) == 0.0:
        assert sorted(a) == sorted(b)


def test_coverage_examples():
    rng = np.random.default_rng(3)
    draws = [rng.standard_normal((101, 2)) for _ in range(10)]
    medians = [np.median(d, axis=0) for d in draws]
    np.testing.assert_array_equal(interval_coverage(draws, medians, 0.5), [1.0, 1.0])
    flat = [np.zeros((20, 2))] * 5
    np.testing.assert_array_equal(interval_coverage(flat, [1.0, -1.0]), [0.0, 0.0])
    with pytest.raises(ValueError):
        interval_coverage(flat, [0.0, 0.0], level=1.0)


def test_coverage_monte_carlo():
    rng = np.random.default_rng(4)
    truth = np.array([0.5])
    trials = [truth + rng.standard_normal() + rng.standard_normal((400, 1)) for _ in range(1000)]
    # each trial's samples are centred at a noisy estimate with unit spread,
    # so the percentile interval covers at the nominal rate
    cov = interval_coverage(trials, truth, 0.9)[0]
    assert abs(cov - 0.9) <= 0.05


def test_metric_csv(tmp_path):
    outs = _outcomes([TRUTH, (0, 2, 3)])
    rows = metric_rows("bstls_", outs, "abc123")
    assert rows[0] == ("bstls_efdp", "set", 0.5, 2, "abc123")
    assert len(rows) == 2 + 5
    path = tmp_path / "m.csv"
    write_metric_csv(path, rows + [dict(zip(METRIC_CSV_COLUMNS, ("x", 0, 1.0, 2, "h")))])
    with open(path) as fh:
        got = list(csv.reader(fh))
    assert tuple(got[0]) == METRIC_CSV_COLUMNS
    assert len(got) == 9
    assert got[-1] == ["x", "0", "1.0", "2", "h"]
