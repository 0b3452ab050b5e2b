"""Dense least-squares machinery shared by every estimator."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import linalg as sla

from .errors import ConstantColumn, DimensionMismatch, EmptySupport, SingularDesign

#: rho1 / rho2 below this ratio is treated as singular
SINGULAR_RTOL = 1e-12


def as_support(indices) -> tuple:
    """Canonical sorted tuple of unique column indices."""
    return tuple(sorted({int(i) for i in indices}))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariates ``X`` (n x p) and one or more response columns ``Y`` (n x d).

    ``shift`` / ``scale`` record the covariate standardization so that
    coefficients can be mapped back to the raw scale, and
    ``exempt_columns`` lists constant library columns left untouched.
    """

    covariates: np.ndarray
    responses: np.ndarray
    is_centered: bool = False
    is_standardized: bool = False
    column_names: Optional[tuple] = None
    response_names: Optional[tuple] = None
    shift: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None
    response_shift: Optional[np.ndarray] = None
    exempt_columns: tuple = field(default_factory=tuple)

    def __post_init__(self):
        X = np.array(self.covariates, dtype=float)
        Y = np.array(self.responses, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim != 2 or Y.ndim != 2:
            raise DimensionMismatch("covariates and responses must be 2-d")
        if X.shape[0] != Y.shape[0]:
            raise DimensionMismatch(
                f"covariates have {X.shape[0]} rows but responses have {Y.shape[0]}"
            )
        if X.shape[0] < 1 or X.shape[1] < 1 or Y.shape[1] < 1:
            raise DimensionMismatch("dataset needs n >= 1, p >= 1, d >= 1")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset contains non-finite entries")
        X.flags.writeable = False
        Y.flags.writeable = False
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "responses", Y)
        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != X.shape[1]:
                raise DimensionMismatch("column_names length must equal p")
            object.__setattr__(self, "column_names", names)
        if self.response_names is not None:
            names = tuple(str(c) for c in self.response_names)
            if len(names) != Y.shape[1]:
                raise DimensionMismatch("response_names length must equal d")
            object.__setattr__(self, "response_names", names)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def d(self) -> int:
        return self.responses.shape[1]

    def response(self, target_index: int = 0) -> np.ndarray:
        if not 0 <= target_index < self.d:
            raise DimensionMismatch(f"target_index {target_index} outside [0, {self.d})")
        return self.responses[:, target_index]

    def names(self) -> tuple:
        return self.column_names or tuple(f"x{j}" for j in range(self.p))

    def target_names(self) -> tuple:
        return self.response_names or tuple(f"y{k}" for k in range(self.d))

    def take_rows(self, rows) -> "Dataset":
        return replace(
            self,
            covariates=self.covariates[rows],
            responses=self.responses[rows],
            is_centered=False,
        )

    def with_responses(self, responses) -> "Dataset":
        return replace(self, responses=responses)

    def unscale_coefficients(self, coefficients) -> np.ndarray:
        """Map coefficients fitted on standardized covariates to the raw scale."""
        b = np.asarray(coefficients, dtype=float)
        if self.scale is None:
            return b.copy()
        return b / self.scale


@dataclass(frozen=True, eq=False)
class DesignStats:
    gram: np.ndarray
    gram_inverse: Optional[np.ndarray]
    rho1: float
    rho2: float
    column_norms_sq: np.ndarray


@dataclass(frozen=True, eq=False)
class LinearFit:
    coefficients: np.ndarray
    support: tuple
    residuals: np.ndarray
    sigma_hat_sq: float
    target_index: int = 0

    @property
    def sse(self) -> float:
        return float(self.residuals @ self.residuals)


def _check_conditioning(eigvals) -> tuple:
    rho1 = float(max(eigvals[0], 0.0))
    rho2 = float(eigvals[-1])
    return rho1, rho2


def _solve_spd(gram, rhs, n):
    """Solve ``gram @ b = rhs`` after checking the spectrum of gram / n."""
    eig = np.linalg.eigvalsh(gram / n)
    rho1, rho2 = _check_conditioning(eig)
    if rho2 <= 0.0 or rho1 <= SINGULAR_RTOL * rho2:
        raise SingularDesign(rho1, rho2)
    try:
        factor = sla.cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularDesign(rho1, rho2) from exc
    return sla.cho_solve(factor, rhs, check_finite=False)


def fit_ols(data: Dataset, target_index: int = 0) -> LinearFit:
    """Ordinary least squares of one response column on all covariates."""
    return fit_restricted_ols(data, target_index, range(data.p))


def fit_restricted_ols(data: Dataset, target_index: int, support) -> LinearFit:
    """OLS on the columns in ``support``; all other coefficients are exactly 0.

    Raises
    ------
    EmptySupport
        If ``support`` is empty. Callers that want the all-zero model should
        catch this and use :func:`zero_fit`.
    SingularDesign
        If the restricted gram matrix is numerically singular.
    """
    support = as_support(support)
    if not support:
        raise EmptySupport("restricted fit requested with an empty support")
    if support[0] < 0 or support[-1] >= data.p:
        raise DimensionMismatch(f"support index outside [0, {data.p})")
    y = data.response(target_index)
    n = data.n
    k = len(support)
    if k > n:
        raise SingularDesign(0.0, 0.0, f"support size {k} exceeds n={n} rows")
    Xs = data.covariates[:, support]
    b_s = _solve_spd(Xs.T @ Xs, Xs.T @ y, n)
    coef = np.zeros(data.p)
    coef[list(support)] = b_s
    resid = y - Xs @ b_s
    return LinearFit(
        coefficients=coef,
        support=support,
        residuals=resid,
        # k == n interpolates exactly; the denominator is floored at 1
        sigma_hat_sq=float(resid @ resid) / max(n - k, 1),
        target_index=target_index,
    )


def zero_fit(data: Dataset, target_index: int = 0) -> LinearFit:
    """The all-zero model (empty support)."""
    y = data.response(target_index)
    return LinearFit(
        coefficients=np.zeros(data.p),
        support=(),
        residuals=y.copy(),
        sigma_hat_sq=float(y @ y) / data.n,
        target_index=target_index,
    )


def design_stats(data: Dataset) -> DesignStats:
    X = data.covariates
    gram = X.T @ X
    gram = 0.5 * (gram + gram.T)
    eig = np.linalg.eigvalsh(gram / data.n)
    rho1, rho2 = _check_conditioning(eig)
    inverse = None
    if rho2 > 0 and rho1 > SINGULAR_RTOL * rho2:
        inverse = np.linalg.inv(gram)
    return DesignStats(
        gram=gram,
        gram_inverse=inverse,
        rho1=rho1,
        rho2=rho2,
        column_norms_sq=np.diag(gram).copy(),
    )


def standardize(
    raw: Dataset, discovery: bool = False, exempt: Sequence[int] = ()
) -> Dataset:
    """Center responses and covariates and scale covariates to unit mean square.

    In ``discovery`` mode nothing is centered (a library's constant column
    would be annihilated); every column is divided by its root mean square
    and exactly-constant columns are recorded in ``exempt_columns``.
    Columns listed in ``exempt`` are always left untouched.
    """
    X = raw.covariates
    n, p = X.shape
    shift = np.zeros(p)
    scale = np.ones(p)
    exempt = set(int(j) for j in exempt)
    flagged = []
    for j in range(p):
        col = X[:, j]
        constant = np.all(col == col[0])
        if j in exempt:
            if constant:
                flagged.append(j)
            continue
        if discovery:
            if constant:
                flagged.append(j)
                if col[0] != 0.0:
                    scale[j] = abs(col[0])
                continue
            scale[j] = np.sqrt(np.mean(col * col))
        else:
            if constant:
                raise ConstantColumn(j)
            shift[j] = col.mean()
            centered = col - shift[j]
            scale[j] = np.sqrt(np.mean(centered * centered))
            if scale[j] == 0.0:
                raise ConstantColumn(j)
    Z = (X - shift) / scale
    Y = raw.responses
    y_shift = np.zeros(raw.d)
    if not discovery:
        y_shift = Y.mean(axis=0)
        Y = Y - y_shift
    return replace(
        raw,
        covariates=Z,
        responses=Y,
        is_centered=not discovery,
        is_standardized=True,
        shift=shift,
        scale=scale,
        response_shift=y_shift,
        exempt_columns=tuple(sorted(set(flagged))),
    )


# ---------------------------------------------------------------------------
# CSV round trip

# ``y<k>`` for regression targets, ``d<state>`` for derivative targets
_RESPONSE_RE = re.compile(r"^(y\d+|d[A-Za-z_]\w*)$")


def write_dataset_csv(path, data: Dataset) -> None:
    """Write ``y0..y{d-1}, x0..x{p-1}`` (or the library names) one row per sample."""
    header = list(data.target_names()) + list(data.names())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for yrow, xrow in zip(data.responses, data.covariates):
            writer.writerow([repr(float(v)) for v in yrow] + [repr(float(v)) for v in xrow])


def read_dataset_csv(path, n_responses: Optional[int] = None) -> Dataset:
    """Read a dataset CSV; responses are the leading ``y<k>`` (or ``d<state>``)
    columns unless ``n_responses`` says otherwise."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    if n_responses is None:
        n_responses = 0
        while n_responses < len(header) and _RESPONSE_RE.match(header[n_responses]):
            n_responses += 1
    if n_responses < 1 or n_responses >= len(header):
        raise DimensionMismatch("could not identify response and covariate columns")
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return Dataset(
        covariates=arr[:, n_responses:],
        responses=arr[:, :n_responses],
        column_names=tuple(header[n_responses:]),
        response_names=tuple(header[:n_responses]),
    )
