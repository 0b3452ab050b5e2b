"""Seeded generators for the synthetic regression models and the
Lotka-Volterra discovery pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations_with_replacement
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import cholesky, toeplitz

from . import _backend
from .core import Dataset
from .errors import BlowUp, ConstantColumn, DegenerateSpacing
from .rng import substream

MODEL_DEFAULT_SIGMA = {"model1": 1.0, "model2": 0.6, "model3": 0.1}

LV_PARAMS = (1.0, -0.1, -1.5, 0.075)
LV_X0 = (10.0, 5.0)
#: coefficients of the LV system after dividing each state by its std
LV_NORMALIZED = (1.0, -0.68, -1.5, 0.82)


@dataclass(frozen=True)
class SyntheticSpec:
    model: str
    n: int
    sigma_noise: Optional[float] = None
    seed: int = 0
    r: float = 0.3
    n_active: int = 15

    def __post_init__(self):
        if self.model not in MODEL_DEFAULT_SIGMA:
            raise ValueError(f"unknown model {self.model!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 <= self.n_active <= 30:
            raise ValueError("n_active must lie in [0, 30]")

    @property
    def sigma(self) -> float:
        if self.sigma_noise is None:
            return MODEL_DEFAULT_SIGMA[self.model]
        return float(self.sigma_noise)


@dataclass(frozen=True, eq=False)
class Synthetic:
    data: Dataset
    beta: np.ndarray  # p x d
    supports: tuple  # one support tuple per response column
    latents: Optional[np.ndarray] = None

    def __iter__(self):
        return iter((self.data, self.beta, self.supports))

    def true_support(self, target_index: int = 0) -> tuple:
        return self.supports[target_index]


def model_beta(model: str, n_active: int = 15) -> np.ndarray:
    """True coefficients as a ``p x d`` array."""
    if model == "model1":
        beta = np.zeros(30)
        if n_active:
            beta[30 - n_active:] = 1.0
        return beta[:, None]
    if model == "model2":
        beta = np.zeros(30)
        beta[15:20] = 0.5
        beta[20:25] = 1.5
        beta[25:30] = 2.5
        return beta[:, None]
    beta = np.zeros((15, 2))
    beta[1, 0] = 1.0
    beta[5, 0] = -0.68
    beta[1, 1] = -1.5
    beta[5, 1] = 0.82
    return beta


def toeplitz_covariance(p: int, r: float) -> np.ndarray:
    return toeplitz(r ** np.arange(p))


def generate(spec: SyntheticSpec) -> Synthetic:
    rng = substream(spec.seed, "synthetic", spec.model)
    n = spec.n
    beta = model_beta(spec.model, spec.n_active)
    latents = None
    names = None
    if spec.model == "model1":
        X = rng.standard_normal((n, 30))
    elif spec.model == "model2":
        L = cholesky(toeplitz_covariance(30, spec.r), lower=True)
        X = rng.standard_normal((n, 30)) @ L.T
    else:
        latents = rng.standard_normal((n, 2))
        X, names = poly_library(latents, 4)
    noise = rng.standard_normal((n, beta.shape[1]))
    Y = X @ beta + spec.sigma * noise
    supports = tuple(tuple(int(j) for j in np.flatnonzero(beta[:, k])) for k in range(beta.shape[1]))
    data = Dataset(covariates=X, responses=Y, column_names=names)
    return Synthetic(data, beta, supports, latents)


# ---------------------------------------------------------------------------
# polynomial library


def _degree_exponents(k: int, degree: int):
    combos = list(combinations_with_replacement(range(k), degree))
    exps = [tuple(c.count(i) for i in range(k)) for c in combos]
    if k == 2 and degree == 3:
        # printed ordering for two variables: z1^3, z1 z2^2, z1^2 z2, z2^3
        exps = [(3, 0), (1, 2), (2, 1), (0, 3)]
    return exps


def library_exponents(k: int, max_degree: int) -> list:
    """Exponent tuples of every monomial of total degree <= ``max_degree``."""
    out = []
    for degree in range(max_degree + 1):
        out.extend(_degree_exponents(k, degree))
    return out


def _monomial_name(exps, var_names) -> str:
    parts = []
    for name, e in zip(var_names, exps):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return " ".join(parts) if parts else "1"


def poly_library(states, max_degree: int, var_names=None):
    """All monomials of the state columns up to ``max_degree``.

    Returns ``(theta, names)``. Columns are graded by degree; within a
    degree the first variable's power decreases.
    """
    Z = np.asarray(states, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    k = Z.shape[1]
    if k < 1 or max_degree < 0:
        raise ValueError("need at least one state and max_degree >= 0")
    var_names = var_names or [f"z{i + 1}" for i in range(k)]
    exps = library_exponents(k, max_degree)
    theta = np.empty((Z.shape[0], len(exps)))
    for col, e in enumerate(exps):
        term = np.ones(Z.shape[0])
        for i, power in enumerate(e):
            for _ in range(power):
                term = term * Z[:, i]
        theta[:, col] = term
    names = tuple(_monomial_name(e, var_names) for e in exps)
    return theta, names


# ---------------------------------------------------------------------------
# Lotka-Volterra


@dataclass(frozen=True, eq=False)
class TrajectoryData:
    times: np.ndarray
    states: np.ndarray
    noisy_states: np.ndarray
    derivatives: np.ndarray
    params: tuple = LV_PARAMS
    x0: tuple = LV_X0
    dense_times: Optional[np.ndarray] = field(default=None, repr=False)
    dense_states: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def normalization_scales(self) -> np.ndarray:
        return self.noisy_states.std(axis=0)


def lotka_volterra_rhs(states, params=LV_PARAMS) -> np.ndarray:
    a, b, g, d = params
    s = np.asarray(states, dtype=float)
    u, v = s[..., 0], s[..., 1]
    return np.stack([a * u + b * u * v, g * v + d * u * v], axis=-1)


def lotka_volterra_invariant(states, params=LV_PARAMS) -> np.ndarray:
    """First integral ``d u + g ln u - b v - a ln v`` for
    ``u' = a u + b u v, v' = g v + d u v``."""
    a, b, g, d = params
    s = np.asarray(states, dtype=float)
    u, v = s[..., 0], s[..., 1]
    return d * u + g * np.log(u) - b * v - a * np.log(v)


def integrate_lotka_volterra(params=LV_PARAMS, x0=LV_X0, t_span=(0.0, 24.0), step=1e-3):
    """Fixed-step RK4 on a uniform grid; returns ``(grid_times, grid_states)``."""
    t0, t1 = float(t_span[0]), float(t_span[1])
    n_steps = max(int(round((t1 - t0) / step)), 1)
    h = (t1 - t0) / n_steps
    a, b, g, d = (float(v) for v in params)
    states, last = _backend.rk4_lotka_volterra(
        a, b, g, d, float(x0[0]), float(x0[1]), h, n_steps, 1e12
    )
    if last < n_steps:
        raise BlowUp(t0 + (last + 1) * h)
    return t0 + h * np.arange(n_steps + 1), states


def perturb_initial_condition(x0, sd: float, seed: int) -> tuple:
    """Multiply each initial state by an independent ``LogNormal(0, sd)`` factor."""
    rng = substream(seed, "initial-condition")
    factors = np.exp(sd * rng.standard_normal(len(x0)))
    return tuple(float(v) for v in np.asarray(x0, dtype=float) * factors)


def simulate_lotka_volterra(
    params=LV_PARAMS,
    x0=LV_X0,
    t_span=(0.0, 24.0),
    n_points: int = 500,
    sampling: str = "uniform_random",
    seed: int = 0,
    step: float = 1e-3,
    keep_dense: bool = False,
) -> TrajectoryData:
    """Noiseless trajectory read off a fine RK4 grid at the sample times.

    States between grid nodes come from cubic Hermite interpolation using
    the exact right-hand side as the node slopes.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    grid_t, grid_s = integrate_lotka_volterra(params, x0, t_span, step)
    if sampling == "uniform_grid":
        times = np.linspace(t_span[0], t_span[1], n_points)
    elif sampling == "uniform_random":
        rng = substream(seed, "sample-times")
        times = np.sort(rng.uniform(t_span[0], t_span[1], n_points))
    else:
        raise ValueError(f"unknown sampling {sampling!r}")
    if np.any(np.diff(times) <= 0):
        raise DegenerateSpacing("sample times are not strictly increasing")
    spline = CubicHermiteSpline(grid_t, grid_s, lotka_volterra_rhs(grid_s, params), axis=0)
    states = spline(times)
    return TrajectoryData(
        times=times,
        states=states,
        noisy_states=states.copy(),
        derivatives=lotka_volterra_rhs(states, params),
        params=tuple(params),
        x0=tuple(x0),
        dense_times=grid_t if keep_dense else None,
        dense_states=grid_s if keep_dense else None,
    )


def add_lognormal_noise(trajectory: TrajectoryData, sd: float, seed: int) -> TrajectoryData:
    """Multiplicative noise: ``noisy = states * exp(N(0, sd^2))`` elementwise."""
    rng = substream(seed, "measurement-noise")
    factors = np.exp(sd * rng.standard_normal(trajectory.states.shape))
    return replace(trajectory, noisy_states=trajectory.states * factors)


def finite_difference_derivatives(trajectory_or_times, values=None) -> np.ndarray:
    """Second-order central differences (one-sided second order at the ends)
    on possibly nonuniform times.

    Accepts a :class:`TrajectoryData` (differentiating its noisy states) or
    explicit ``(times, values)``.
    """
    if values is None:
        times = trajectory_or_times.times
        values = trajectory_or_times.noisy_states
    else:
        times = trajectory_or_times
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 3:
        raise ValueError("need at least 3 samples")
    if np.any(np.diff(times) <= 0):
        raise DegenerateSpacing("consecutive sample times coincide or decrease")
    return np.gradient(values, times, axis=0, edge_order=2)


def build_discovery_dataset(
    trajectory: TrajectoryData, max_degree: int = 2, derivative_source: str = "finite_difference"
) -> Dataset:
    """Normalize states by their std, expand into a polynomial library and
    attach derivative targets of the normalized states."""
    scales = trajectory.normalization_scales
    for j, s in enumerate(scales):
        if not s > 0:
            raise ConstantColumn(j)
    Z = trajectory.noisy_states / scales
    theta, names = poly_library(Z, max_degree, var_names=["u", "v"])
    if derivative_source == "exact":
        targets = trajectory.derivatives / scales
    elif derivative_source == "finite_difference":
        targets = finite_difference_derivatives(trajectory.times, Z)
    else:
        raise ValueError(f"unknown derivative source {derivative_source!r}")
    return Dataset(
        covariates=theta,
        responses=targets,
        column_names=names,
        response_names=("du", "dv"),
        scale=None,
    )


def lv_true_supports(max_degree: int = 2) -> tuple:
    """Column indices of ``u`` and ``u v`` (first equation) and ``v`` and
    ``u v`` (second equation) in the library ordering."""
    exps = library_exponents(2, max_degree)
    u, v, uv = exps.index((1, 0)), exps.index((0, 1)), exps.index((1, 1))
    return (tuple(sorted((u, uv))), tuple(sorted((v, uv))))


def lv_true_coefficients(max_degree: int = 2, scales=None) -> np.ndarray:
    """Library coefficients (``p x 2``) of the normalized system.

    With ``scales`` the exact values ``(a, b s_v, g, d s_u)`` are used;
    otherwise the rounded normalized constants.
    """
    exps = library_exponents(2, max_degree)
    beta = np.zeros((len(exps), 2))
    u, v, uv = exps.index((1, 0)), exps.index((0, 1)), exps.index((1, 1))
    if scales is None:
        a, b, g, d = LV_NORMALIZED
    else:
        a0, b0, g0, d0 = LV_PARAMS
        a, b, g, d = a0, b0 * scales[1], g0, d0 * scales[0]
    beta[u, 0], beta[uv, 0] = a, b
    beta[v, 1], beta[uv, 1] = g, d
    return beta
