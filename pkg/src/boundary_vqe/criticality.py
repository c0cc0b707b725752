"""Derivatives, critical-point location, finite-size scaling and error metrics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

GRID_DENSITY = 50
INTERIOR_FRACTION = 0.9
ARGMIN_TOLERANCE = 1e-6


class BoundaryMinimumWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EnergyCurve:
    h: np.ndarray
    energy: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        e = np.asarray(self.energy, dtype=float)
        if h.shape != e.shape or h.ndim != 1:
            raise ValueError("h and energy must be 1-d arrays of equal length")
        if h.size > 1 and not np.all(np.diff(h) > 0):
            raise ValueError("h values must be strictly increasing")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "energy", e)

    @classmethod
    def from_points(cls, h: Sequence[float], energy: Sequence[float], **metadata) -> "EnergyCurve":
        """Build a curve from unordered samples (e.g. a decreasing VQE sweep)."""
        h = np.asarray(h, dtype=float)
        order = np.argsort(h)
        return cls(h[order], np.asarray(energy, dtype=float)[order], dict(metadata))

    def spline(self) -> CubicSpline:
        if self.h.size < 4:
            raise ValueError(f"spline needs at least 4 points, got {self.h.size}")
        return CubicSpline(self.h, self.energy, bc_type="natural")


@dataclass(frozen=True)
class DerivativeCurve:
    h: np.ndarray
    values: np.ndarray
    order: int
    source: EnergyCurve
    spline: CubicSpline


def interior_bounds(h: np.ndarray, fraction: float = INTERIOR_FRACTION) -> tuple[float, float]:
    lo, hi = float(h[0]), float(h[-1])
    margin = 0.5 * (1.0 - fraction) * (hi - lo)
    return lo + margin, hi - margin


def spline_derivative(curve: EnergyCurve, order: int, density: int = GRID_DENSITY,
                      interior: float = INTERIOR_FRACTION) -> DerivativeCurve:
    """Natural cubic spline derivative on a dense grid over the interior of the range."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    spline = curve.spline()
    lo, hi = interior_bounds(curve.h, interior)
    grid = np.linspace(lo, hi, density * curve.h.size)
    return DerivativeCurve(grid, spline(grid, order), order, curve, spline)


@dataclass(frozen=True)
class CriticalPoint:
    h: float
    value: float
    at_boundary: bool


def find_second_derivative_minimum(curve: EnergyCurve, density: int = GRID_DENSITY,
                                   interior: float = INTERIOR_FRACTION) -> CriticalPoint:
    """Location of min d2E/dh2: dense-grid scan, then golden-section refinement."""
    d2 = spline_derivative(curve, 2, density, interior)
    k = int(np.argmin(d2.values))
    if k == 0 or k == d2.h.size - 1:
        warnings.warn(f"second-derivative minimum sits at the range edge h={d2.h[k]:.6g}",
                      BoundaryMinimumWarning, stacklevel=2)
        return CriticalPoint(float(d2.h[k]), float(d2.values[k]), True)
    spline = d2.spline
    bracket = (d2.h[k - 1], d2.h[k], d2.h[k + 1])
    res = minimize_scalar(lambda x: float(spline(x, 2)), bracket=bracket, method="golden",
                          tol=ARGMIN_TOLERANCE / max(abs(bracket[1]), 1e-3))
    h_star = float(res.x)
    if not bracket[0] <= h_star <= bracket[2]:
        h_star = float(d2.h[k])
    return CriticalPoint(h_star, float(spline(h_star, 2)), False)


@dataclass(frozen=True)
class ScalingSeries:
    L: np.ndarray
    argmin_h: np.ndarray
    h_c: float

    def __post_init__(self):
        L = np.asarray(self.L, dtype=int)
        if len(set(L.tolist())) != L.size:
            raise ValueError("sizes must be distinct")
        order = np.argsort(L)
        object.__setattr__(self, "L", L[order])
        object.__setattr__(self, "argmin_h", np.asarray(self.argmin_h, dtype=float)[order])

    @property
    def inv_L(self) -> np.ndarray:
        return 1.0 / self.L

    @property
    def deviation(self) -> np.ndarray:
        return self.argmin_h - self.h_c


@dataclass(frozen=True)
class ScalingReport:
    series: ScalingSeries
    fit_min_L: int
    slope: float
    intercept: float
    intercept_deviation: float
    receding_sizes: tuple[int, ...]
    approaching_from: int | None

    @property
    def non_monotone(self) -> bool:
        return bool(self.receding_sizes)

    def rows(self) -> list[dict]:
        s = self.series
        return [
            {"L": int(L), "inv_L": float(1.0 / L), "argmin_h": float(h),
             "h_c_reference": s.h_c, "deviation": float(h - s.h_c)}
            for L, h in zip(s.L, s.argmin_h)
        ]


def finite_size_scaling(series: ScalingSeries, fit_min_L: int = 40) -> ScalingReport:
    """Fit h*(L) = intercept + slope / L on sizes >= fit_min_L; flag receding sizes.

    ``receding_sizes`` lists each L whose |h* - h_c| exceeds that of the next
    smaller size; ``approaching_from`` is the smallest L after which the
    distance never grows again.
    """
    if series.L.size < 3:
        raise ValueError("finite-size scaling needs at least 3 sizes")
    mask = series.L >= fit_min_L
    if mask.sum() < 2:
        mask = np.zeros_like(mask)
        mask[-2:] = True
    x, y = series.inv_L[mask], series.argmin_h[mask]
    if np.ptp(x) == 0:
        slope, intercept = 0.0, float(y.mean())
    else:
        slope, intercept = (float(v) for v in np.polyfit(x, y, 1))
    dist = np.abs(series.argmin_h - series.h_c)
    receding = tuple(int(series.L[i + 1]) for i in range(dist.size - 1) if dist[i + 1] > dist[i])
    approaching_from = None
    for start in range(dist.size):
        tail = dist[start:]
        if tail.size >= 2 and np.all(np.diff(tail) <= 0):
            approaching_from = int(series.L[start])
            break
    return ScalingReport(series, fit_min_L, slope, intercept, intercept - series.h_c,
                         receding, approaching_from)


@dataclass(frozen=True)
class GapFitResult:
    exp_rate: float
    exp_prefactor: float
    exp_residual: float
    power: float
    power_prefactor: float
    power_residual: float

    @property
    def preferred(self) -> str:
        return "exponential" if self.exp_residual <= self.power_residual else "polynomial"


def classify_gap_decay(gaps: Sequence[tuple[int, float]]) -> GapFitResult:
    """Compare log(gap) = log(a) - c L against log(gap) = log(b) - p log L.

    Both models have two parameters, so the lower residual sum of squares wins.
    """
    L = np.array([g[0] for g in gaps], dtype=float)
    delta = np.array([g[1] for g in gaps], dtype=float)
    if L.size < 4:
        raise ValueError("gap classification needs at least 4 sizes")
    if np.any(delta <= 0) or not np.all(np.isfinite(delta)):
        raise ValueError("gaps must be positive and finite")
    y = np.log(delta)

    def fit(x):
        A = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = float(np.sum((A @ coef - y) ** 2))
        return coef, resid

    (a, slope_e), res_e = fit(L)
    (b, slope_p), res_p = fit(np.log(L))
    return GapFitResult(-float(slope_e), math.exp(a), res_e, -float(slope_p), math.exp(b), res_p)


@dataclass(frozen=True)
class RmsReport:
    rms: float
    n: int
    labels: tuple[str, str] = ("x", "y")


def rms(x: Sequence[float], y: Sequence[float], labels: tuple[str, str] = ("x", "y")) -> RmsReport:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"series lengths differ: {x.shape} vs {y.shape}")
    if x.size == 0:
        raise ValueError("need at least one point")
    return RmsReport(math.sqrt(float(np.mean((x - y) ** 2))), int(x.size), labels)


def relative_error_series(estimates: Sequence[float], references: Sequence[float]) -> np.ndarray:
    """|ref - est| / |ref| elementwise; NaN where the reference is zero."""
    est = np.asarray(estimates, dtype=float)
    ref = np.asarray(references, dtype=float)
    if est.shape != ref.shape:
        raise ValueError("series lengths differ")
    out = np.full(est.shape, np.nan)
    nz = ref != 0
    out[nz] = np.abs((ref[nz] - est[nz]) / ref[nz])
    return out
