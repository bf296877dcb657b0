"""Weighted least-squares power-series fits and log-log exponent regression.

Models are linear in the coefficients: y(P) = sum_e c_e * P^e over an integer
exponent basis.  The normal equations are never inverted directly; the
weighted design matrix is solved by SVD after rescaling P by the series
median, which keeps the system well conditioned across decades of power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DataSeries",
    "FitResult",
    "ExponentFit",
    "FitError",
    "IllConditionedError",
    "fit_poly",
    "fit_exponent",
    "select_model",
    "poisson_sigma",
]

_CONDITION_LIMIT = 1e12


class FitError(ValueError):
    pass


class IllConditionedError(FitError):
    """Normal system condition estimate above 1e12; refusing to solve."""


def poisson_sigma(counts) -> np.ndarray:
    """Default weighting for count data: sqrt(N), with sigma = 1 for zero."""
    counts = np.asarray(counts, dtype=float)
    return np.sqrt(np.maximum(counts, 1.0))


@dataclass(frozen=True)
class DataSeries:
    """(power, value, sigma) triples; sigma must be positive."""

    power_mw: np.ndarray
    value: np.ndarray
    sigma: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        p = np.asarray(self.power_mw, dtype=float)
        v = np.asarray(self.value, dtype=float)
        s = np.asarray(self.sigma, dtype=float)
        if not (len(p) == len(v) == len(s)):
            raise ValueError("power, value and sigma must have equal length")
        if len(p) < 2:
            raise ValueError("a series needs at least 2 points")
        if np.any(s <= 0):
            raise ValueError("all sigmas must be positive")
        object.__setattr__(self, "power_mw", p)
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "sigma", s)

    def __len__(self) -> int:
        return len(self.power_mw)


@dataclass(frozen=True)
class FitResult:
    basis: tuple[int, ...]
    coefficients: np.ndarray
    stderr: np.ndarray
    chi2: float
    dof: int
    aic: float
    label: str = ""

    def predict(self, power_mw) -> np.ndarray:
        p = np.asarray(power_mw, dtype=float)
        return sum(
            c * p**e for c, e in zip(self.coefficients, self.basis)
        )

    def significance(self) -> np.ndarray:
        """|coefficient| / stderr per basis term."""
        return np.abs(self.coefficients) / self.stderr


def _normalize_basis(basis) -> tuple[int, ...]:
    terms = tuple(sorted(set(int(e) for e in basis)))
    if not terms:
        raise FitError("basis must contain at least one exponent")
    return terms


def fit_poly(series: DataSeries, basis) -> FitResult:
    """Weighted linear least squares on design columns P^e, e in basis.

    No constant term unless 0 is in the basis.  Standard errors come from
    the inverse of the weighted normal matrix, via the SVD of the scaled
    design.  chi2 = sum(((y - yhat)/sigma)^2), aic = chi2 + 2 * n_terms.
    """
    terms = _normalize_basis(basis)
    n, p = len(series), len(terms)
    if n < p + 1:
        raise FitError(
            f"need at least {p + 1} points to fit basis {terms}, got {n}"
        )
    scale = float(np.median(series.power_mw))
    if scale <= 0:
        scale = 1.0
    x = series.power_mw / scale
    design = np.column_stack([x**e for e in terms])
    w = 1.0 / series.sigma
    a = design * w[:, None]
    y = series.value * w
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s[0] == 0 or s[-1] == 0 or s[0] / s[-1] > _CONDITION_LIMIT:
        cond = math.inf if s[-1] == 0 else s[0] / s[-1]
        raise IllConditionedError(
            f"design matrix condition {cond:.3g} exceeds {_CONDITION_LIMIT:.0e}; "
            "the basis is degenerate for these points"
        )
    coeff_scaled = vt.T @ ((u.T @ y) / s)
    # covariance of scaled coefficients: V diag(1/s^2) V^T
    cov_scaled = (vt.T / s**2) @ vt
    unscale = np.array([scale ** -e for e in terms], dtype=float)
    coeff = coeff_scaled * unscale
    stderr = np.sqrt(np.diag(cov_scaled)) * np.abs(unscale)
    resid = (series.value - design @ coeff_scaled) * w
    chi2 = float(resid @ resid)
    return FitResult(
        basis=terms,
        coefficients=coeff,
        stderr=stderr,
        chi2=chi2,
        dof=n - p,
        aic=chi2 + 2 * p,
        label=series.label,
    )


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    stderr: float

    def __iter__(self):
        return iter((self.exponent, self.stderr))


def fit_exponent(series: DataSeries) -> ExponentFit:
    """Unweighted regression of ln(value) on ln(power): the log-log slope.

    Every value and power must be positive; the first offender is named.
    """
    for i, (p, v) in enumerate(zip(series.power_mw, series.value)):
        if p <= 0:
            raise FitError(f"power at index {i} is not positive ({p})")
        if v <= 0:
            raise FitError(f"value at index {i} is not positive ({v})")
    lx = np.log(series.power_mw)
    ly = np.log(series.value)
    n = len(lx)
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    if sxx == 0:
        raise FitError("all powers are equal; exponent is undefined")
    slope = float(np.sum((lx - lx.mean()) * (ly - ly.mean())) / sxx)
    intercept = ly.mean() - slope * lx.mean()
    resid = ly - slope * lx - intercept
    if n > 2:
        stderr = math.sqrt(float(resid @ resid) / (n - 2) / sxx)
    else:
        stderr = 0.0
    return ExponentFit(exponent=slope, stderr=stderr)


def select_model(series: DataSeries, candidate_bases) -> FitResult:
    """Fit every candidate basis and return the one with minimal AIC;
    ties break toward fewer terms."""
    candidates = [_normalize_basis(b) for b in candidate_bases]
    if not candidates:
        raise FitError("need at least one candidate basis")
    results = [fit_poly(series, basis) for basis in candidates]
    return min(results, key=lambda r: (r.aic, len(r.basis)))
