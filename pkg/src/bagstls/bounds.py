"""Closed-form probability bounds for STLS and bagged-inclusion selection.

All evaluators work in log space and exponentiate last. Values are
returned unclipped; :func:`bound_report` attaches an explicit vacuity flag
to every bound that falls outside ``[0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class BoundInputs:
    n: int
    p: float
    q: int
    p_c: float = 0.45
    eps: float = 0.2
    sigma: float = 1.0
    rho1: float = 1.0
    rho2: float = 1.0
    beta_min: float = 1.0
    gamma: float = 1.0
    r0: float = 0.5
    threshold_multiplier: float = 1.0

    def __post_init__(self):
        # p < 1 is the probability-like reading used by the small-sample bound
        if self.q < 0 or (self.p >= 1 and self.q > self.p):
            raise ValueError("need 0 <= q <= p")
        if self.rho1 > self.rho2:
            raise ValueError("need rho1 <= rho2")

    @classmethod
    def from_dict(cls, d: dict) -> "BoundInputs":
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def _one_minus_exp(log_term: float) -> float:
    """``1 - exp(log_term)`` without cancellation."""
    if log_term == -math.inf:
        return 1.0
    return -math.expm1(log_term)


def bip_fdp_bound(inp: BoundInputs) -> float:
    """``(p - q) exp(1/3 - n p_c / 3)``."""
    nulls = inp.p - inp.q
    if nulls <= 0:
        return 0.0
    return math.exp(math.log(nulls) + 1.0 / 3.0 - inp.n * inp.p_c / 3.0)


def bip_tdp_bound_large(inp: BoundInputs) -> float:
    """``1 - q exp(-n (1 - 2 p_c)^2 / 6)``."""
    if inp.q == 0:
        return 1.0
    return _one_minus_exp(math.log(inp.q) - inp.n * (1.0 - 2.0 * inp.p_c) ** 2 / 6.0)


def bip_tdp_bound_small(inp: BoundInputs) -> float:
    """``1 - q exp(-n p_c^2 / (3p) + 2 n p_c / 3 - n p / 3)``, with ``p`` taken
    verbatim from the inputs."""
    if inp.q == 0:
        return 1.0
    n, p, pc = inp.n, inp.p, inp.p_c
    first = 0.0 if pc == 0 else n * pc * pc / (3.0 * p)
    exponent = -first + 2.0 * n * pc / 3.0 - n * p / 3.0
    return _one_minus_exp(math.log(inp.q) + exponent)


def gap_bound(inp: BoundInputs) -> float:
    """Lower bound on Pr(gap > eps): ``1 - p exp(-n (1/4 - eps/2 - 1/(2n))^2 / 2)``."""
    if inp.p == 0:
        return 1.0
    a = 0.25 - inp.eps / 2.0 - 1.0 / (2.0 * inp.n)
    return _one_minus_exp(math.log(inp.p) - inp.n * a * a / 2.0)


def stls_margin(inp: BoundInputs) -> float:
    """``sqrt(n rho1) |beta_(1)| / sigma - m sqrt(2 log n) - sqrt(2 log(p - q))``.

    ``m`` is ``threshold_multiplier`` (1 for the canonical threshold).
    """
    nulls = inp.p - inp.q
    null_term = math.sqrt(2.0 * math.log(nulls)) if nulls >= 1 else 0.0
    return (
        math.sqrt(inp.n * inp.rho1) * abs(inp.beta_min) / inp.sigma
        - inp.threshold_multiplier * math.sqrt(2.0 * math.log(inp.n))
        - null_term
    )


def stls_bounds(inp: BoundInputs):
    """``(q / n, 1 - 2 exp(-margin^2 / 2))`` for single-shot STLS."""
    fdp = inp.q / inp.n
    m = stls_margin(inp)
    return fdp, _one_minus_exp(math.log(2.0) - 0.5 * m * m)


def is_vacuous(value: float) -> bool:
    return not (0.0 <= value <= 1.0)


GAP_EXAMPLE_NOTE = (
    "formula evaluated as stated; at p=30, n=100, eps=0.2 it gives about -9.49, "
    "so a 97% guarantee at those values does not follow from it"
)


def bound_report(inp: BoundInputs) -> dict:
    """Every bound with its vacuity flag."""
    fdp_stls, tdp_stls = stls_bounds(inp)
    values = {
        "bip_fdp": bip_fdp_bound(inp),
        "bip_tdp_large": bip_tdp_bound_large(inp),
        "bip_tdp_small": bip_tdp_bound_small(inp),
        "gap": gap_bound(inp),
        "stls_fdp": fdp_stls,
        "stls_tdp": tdp_stls,
    }
    notes = {
        "bip_tdp_small": "the exponent uses p verbatim; its role there is ambiguous",
        "gap": GAP_EXAMPLE_NOTE,
    }
    if stls_margin(inp) < 0:
        notes["stls_tdp"] = "margin is negative; squaring makes the bound meaningless"
    return {
        "inputs": inp.to_dict(),
        "bounds": {
            k: {"value": v, "vacuous": is_vacuous(v)} for k, v in values.items()
        },
        "notes": notes,
    }


def check_conditions(inp: BoundInputs, beta_hat_errors: Optional[float] = None) -> dict:
    """Finite-sample left-hand sides of the regularity conditions.

    Only the large-sample condition on the minimum signal has a literal
    inequality and gets a verdict; the asymptotic conditions are reported
    as plain ratios. ``beta_hat_errors`` is ``max_j |b_j - beta_j|`` over
    the active columns (taken as 0 when unknown).
    """
    n, p, q = inp.n, inp.p, inp.q
    err = 0.0 if beta_hat_errors is None else float(beta_hat_errors)
    p_over_exp_n = math.exp(math.log(p) - n) if p > 0 else 0.0
    lhs_b2 = (
        math.sqrt(n) * (abs(inp.beta_min) - err) / (inp.sigma * math.sqrt(1.0 / (inp.r0 * inp.rho1)))
        if inp.r0 * inp.rho1 > 0
        else -math.inf
    )
    rhs_b2 = math.sqrt(2.0 * math.log(n))
    ratio = inp.rho1 / inp.rho2 if inp.rho2 > 0 else 0.0
    sq = math.sqrt(q) if q > 0 else math.nan
    cond_c = (ratio * inp.gamma ** 2 - q) / sq
    signal = math.sqrt(n) * math.sqrt(inp.rho1) * abs(inp.beta_min) / inp.sigma - inp.gamma
    cond_d = (ratio * signal ** 2 - q) / sq
    return {
        "B1": {"q_over_p": q / p if p else math.nan, "p_over_exp_n": p_over_exp_n},
        "B2": {
            "lhs": lhs_b2,
            "rhs": rhs_b2,
            "pass": bool(lhs_b2 >= rhs_b2),
            "beta_error_assumed_zero": beta_hat_errors is None,
        },
        "a": {"q_over_n": q / n},
        "b": {"margin_sq": stls_margin(inp) ** 2},
        "c": {"ratio": cond_c},
        "d": {"ratio": cond_d},
    }


def estimate_r0(data, plan) -> float:
    """``min_b rho1_b / rho1`` over the replicate designs of ``plan``."""
    from .core import design_stats
    from .ensemble import replicate_rows

    rho1 = design_stats(data).rho1
    best = math.inf
    for r in range(plan.replicates):
        rows = replicate_rows(plan, data.n, r)
        Xb = data.covariates[rows]
        eig = np.linalg.eigvalsh(Xb.T @ Xb / Xb.shape[0])
        best = min(best, max(eig[0], 0.0))
    return best / rho1 if rho1 > 0 else 0.0
