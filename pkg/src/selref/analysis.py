"""Width-versus-excitation regression and the density meta-analysis.

For each atomic density the fitted widths are regressed on the fitted
excitation factors, ``width = a + b*excitation``.  The zero-pump width
``gamma1 = a + b`` (the line value at excitation 1) normalizes the slope,
``s = b / gamma1``, and the collection of per-density ``s`` values is
summarized by a weighted mean together with a check that ``s`` carries
no density trend.

All operations canonicalize the order of their inputs before summing, so
shuffling points or series leaves every output bit-for-bit identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fitkit import FitError, LinearFitResult, linear_fit

__all__ = [
    "ExcitationSeries",
    "SlopeAnalysis",
    "NormalizedSlopeSummary",
    "excitation_dependence",
    "slope_vs_density",
    "normalized_slope_aggregate",
]


@dataclass(frozen=True)
class ExcitationSeries:
    """Fitted (excitation, width, width_sigma) triples at one density.

    ``width_sigma`` entries must be > 0 for a weighted fit; if any is 0
    the series is treated as unweighted.
    """

    density: float
    points: tuple

    def __post_init__(self):
        if not self.density > 0.0:
            raise ValueError(f"density must be > 0, got {self.density}")
        pts = tuple((float(e), float(g), float(s)) for e, g, s in self.points)
        if len(pts) < 3:
            raise ValueError(f"need at least 3 points per density, got {len(pts)}")
        for e, g, s in pts:
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"excitation must be in [0, 1], got {e}")
            if not g > 0.0:
                raise ValueError(f"width must be > 0, got {g}")
            if not (math.isfinite(s) and s >= 0.0):
                raise ValueError(f"width sigma must be >= 0, got {s}")
        object.__setattr__(self, "points", pts)

    def sorted_points(self) -> tuple:
        return tuple(sorted(self.points))

    def weighted(self) -> bool:
        return all(s > 0.0 for _, _, s in self.points)


@dataclass(frozen=True)
class SlopeAnalysis:
    """Per-density regression summary: width = intercept + slope*excitation,
    the zero-pump width, and the normalized slope with its uncertainty."""

    density: float
    intercept: float
    slope: float
    slope_sigma: float
    gamma_unpumped: float
    normalized_slope: float
    normalized_slope_sigma: float

    def __post_init__(self):
        if not self.gamma_unpumped > 0.0:
            raise ValueError(
                f"zero-pump width must be > 0, got {self.gamma_unpumped}")
        if not math.isfinite(self.normalized_slope):
            raise ValueError("normalized slope must be finite")


@dataclass(frozen=True)
class NormalizedSlopeSummary:
    """Weighted mean of the per-density normalized slopes, the constant
    (zero-slope) model it represents, and the unconstrained density trend
    used to assert density independence at two sigma."""

    mean: float
    mean_sigma: float
    trend_slope: float
    trend_slope_sigma: float
    consistent_with_zero: bool
    n_series: int


def excitation_dependence(series: ExcitationSeries,
                          gamma1_source: str = "line") -> SlopeAnalysis:
    """Regress width on excitation for one density.

    ``gamma1_source`` picks the zero-pump width that normalizes the
    slope: ``"line"`` evaluates the fitted line at excitation 1 (a + b,
    noise-robust default), ``"point"`` uses the measured width of the
    highest-excitation point.
    """
    if gamma1_source not in ("line", "point"):
        raise ValueError(f"gamma1_source must be 'line' or 'point', got {gamma1_source!r}")
    pts = series.sorted_points()
    x = [e for e, _, _ in pts]
    y = [g for _, g, _ in pts]
    if series.weighted():
        weights = np.array([1.0 / (s * s) for _, _, s in pts])
    else:
        weights = None
    fit = linear_fit(list(zip(x, y)), weights)
    a, b = fit.intercept, fit.slope

    if gamma1_source == "line":
        gamma1 = a + b
        if gamma1 <= 0.0:
            raise FitError(f"fitted zero-pump width is not positive ({gamma1!r})")
        s = b / gamma1
        # first-order propagation of s = b/(a+b) through cov(a, b)
        ga = -b / gamma1**2
        gb = a / gamma1**2
        var_a = fit.intercept_sigma**2
        var_b = fit.slope_sigma**2
        var_s = ga * ga * var_a + gb * gb * var_b + 2.0 * ga * gb * fit.covariance
    else:
        e1, g1, sg1 = pts[-1]
        gamma1 = g1
        s = b / gamma1
        var_s = (fit.slope_sigma / gamma1) ** 2 + (b * sg1 / gamma1**2) ** 2
    return SlopeAnalysis(density=series.density, intercept=a, slope=b,
                         slope_sigma=fit.slope_sigma, gamma_unpumped=gamma1,
                         normalized_slope=s,
                         normalized_slope_sigma=math.sqrt(max(var_s, 0.0)))


def _sorted_rows(rows) -> list:
    rows = list(rows)
    if not rows:
        raise FitError("no slope-analysis rows given")
    return sorted(rows, key=lambda r: (r.density, r.slope, r.normalized_slope))


def slope_vs_density(rows) -> LinearFitResult:
    """Straight-line fit of the per-density slope b against density."""
    rows = _sorted_rows(rows)
    if len(rows) < 2:
        raise FitError("need at least 2 densities to fit slope vs density")
    points = [(r.density, r.slope) for r in rows]
    if all(r.slope_sigma > 0.0 for r in rows):
        weights = np.array([1.0 / r.slope_sigma**2 for r in rows])
    else:
        weights = None
    return linear_fit(points, weights)


def normalized_slope_aggregate(rows) -> NormalizedSlopeSummary:
    """Summarize the normalized slopes across densities.

    Returns the (inverse-variance) weighted mean with its standard error,
    the slope of an unconstrained straight-line fit of s against density,
    and whether that trend is consistent with zero at two sigma.
    """
    rows = _sorted_rows(rows)
    if len(rows) < 2:
        raise FitError("need at least 2 densities to aggregate normalized slopes")
    s = np.array([r.normalized_slope for r in rows])
    sig = np.array([r.normalized_slope_sigma for r in rows])
    if np.all(sig > 0.0):
        w = 1.0 / sig**2
        mean = float(np.sum(w * s) / np.sum(w))
        mean_sigma = float(math.sqrt(1.0 / np.sum(w)))
        weights = w
    else:
        mean = float(np.mean(s))
        mean_sigma = float(np.std(s, ddof=1) / math.sqrt(len(s))) if len(s) > 1 else 0.0
        weights = None
    trend = linear_fit([(r.density, r.normalized_slope) for r in rows], weights)
    consistent = abs(trend.slope) < 2.0 * trend.slope_sigma
    return NormalizedSlopeSummary(mean=mean, mean_sigma=mean_sigma,
                                  trend_slope=trend.slope,
                                  trend_slope_sigma=trend.slope_sigma,
                                  consistent_with_zero=bool(consistent),
                                  n_series=len(rows))
