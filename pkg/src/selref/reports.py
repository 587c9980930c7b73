"""Plain-text reports for fit batches and the slope analysis.

Reports are key = value blocks with a fixed field order and every number
followed by its unit, so they diff cleanly and parse back losslessly
(floats use 17 significant digits).  A fit report can be fed to the
analyze command in place of refitting the spectra.
"""

from __future__ import annotations

from dataclasses import dataclass

from .analysis import NormalizedSlopeSummary
from .dataio import ANALYSIS_REPORT_MARKER, FIT_REPORT_MARKER, DataFormatError, fmt
from .fitkit import FitResult, LinearFitResult

__all__ = [
    "FitReportEntry",
    "build_fit_report",
    "parse_fit_report",
    "build_analysis_report",
    "read_measure",
]

ZERO_SLOPE_VERDICT = "consistent with zero slope"
TREND_VERDICT = "density trend detected"


@dataclass(frozen=True)
class FitReportEntry:
    """One fitted spectrum in a batch; ``error`` is set when the fit
    raised instead of returning a result."""

    path: str
    density: float
    pump_label: str
    eta_truth: float | None
    n_points: int
    result: FitResult | None
    error: str | None = None


def _measure(value: float, sigma: float, unit: str) -> str:
    return f"{fmt(value)} +/- {fmt(sigma)} {unit}"


def build_fit_report(entries) -> str:
    lines = [FIT_REPORT_MARKER, f"# spectra {len(list(entries))} count"]
    for index, entry in enumerate(entries):
        lines.append("")
        lines.append(f"[spectrum {index:03d}]")
        lines.append(f"path = {entry.path}")
        lines.append(f"density = {fmt(entry.density)} cm^-3")
        lines.append(f"pump = {entry.pump_label}")
        if entry.eta_truth is not None:
            lines.append(f"eta_truth = {fmt(entry.eta_truth)} dimensionless")
        if entry.error is not None:
            lines.append(f"error = {entry.error}")
            continue
        result = entry.result
        lines.append(f"converged = {'yes' if result.converged else 'no'}")
        lines.append(f"status = {result.status}")
        lines.append(f"iterations = {result.iterations} count")
        lines.append(f"n_points = {entry.n_points} count")
        lines.append(f"rss = {fmt(result.rss)} signal^2")
        est, sig = result.estimates, result.uncertainties
        lines.append(f"width = {_measure(est['width'], sig['width'], 'GHz')}")
        lines.append(f"excitation = {_measure(est['excitation'], sig['excitation'], 'dimensionless')}")
        lines.append(f"shift = {_measure(est['shift'], sig['shift'], 'GHz')}")
        lines.append(f"scale = {_measure(est['scale'], sig['scale'], 'dimensionless')}")
        lines.append(f"offset = {_measure(est['offset'], sig['offset'], 'signal')}")
    return "\n".join(lines) + "\n"


def parse_fit_report(text: str, source: str = "fit report") -> list[dict]:
    """Parse a fit report back into one raw key->string dict per spectrum."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != FIT_REPORT_MARKER:
        raise DataFormatError(f"{source}: missing marker {FIT_REPORT_MARKER!r}")
    blocks = []
    current = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = {"__section__": line[1:-1]}
            blocks.append(current)
            continue
        if "=" not in line:
            raise DataFormatError(f"{source} line {lineno}: expected `key = value`")
        if current is None:
            raise DataFormatError(f"{source} line {lineno}: entry outside any block")
        key, value = line.split("=", 1)
        current[key.strip()] = value.strip()
    return [b for b in blocks if b["__section__"].startswith("spectrum")]


def read_measure(block: dict, key: str, source: str = "fit report") -> tuple:
    """Extract (value, sigma) from a `value +/- sigma unit` report field."""
    if key not in block:
        raise DataFormatError(f"{source}: block is missing {key!r}")
    parts = block[key].split()
    try:
        value = float(parts[0])
        sigma = float(parts[2]) if len(parts) >= 3 and parts[1] == "+/-" else 0.0
    except (IndexError, ValueError):
        raise DataFormatError(f"{source}: cannot parse {key} = {block[key]!r}") from None
    return value, sigma


def build_analysis_report(rows, slope_fit: LinearFitResult | None,
                          summary: NormalizedSlopeSummary | None) -> str:
    """Per-density blocks, the slope-vs-density fit, and the aggregate.

    ``slope_fit`` and ``summary`` may be None for single-density input,
    in which case the aggregate is marked unavailable.
    """
    rows = sorted(rows, key=lambda r: r.density)
    lines = [ANALYSIS_REPORT_MARKER, f"# series {len(rows)} count"]
    for index, row in enumerate(rows):
        lines.append("")
        lines.append(f"[series {index:03d}]")
        lines.append(f"density = {fmt(row.density)} cm^-3")
        lines.append(f"intercept = {fmt(row.intercept)} GHz")
        lines.append(f"slope = {_measure(row.slope, row.slope_sigma, 'GHz')}")
        lines.append(f"width_unpumped = {fmt(row.gamma_unpumped)} GHz")
        lines.append("normalized_slope = " + _measure(
            row.normalized_slope, row.normalized_slope_sigma, "dimensionless"))
    lines.append("")
    lines.append("[slope-vs-density]")
    if slope_fit is None:
        lines.append("available = no (need at least 2 densities)")
    else:
        lines.append(f"intercept = {fmt(slope_fit.intercept)} GHz")
        lines.append(f"slope = {_measure(slope_fit.slope, slope_fit.slope_sigma, 'GHz*cm^3')}")
        lines.append(f"residual_variance = {fmt(slope_fit.residual_variance)} GHz^2")
    lines.append("")
    lines.append("[normalized-slope]")
    if summary is None:
        lines.append("available = no (need at least 2 densities)")
    else:
        lines.append(f"n_series = {summary.n_series} count")
        lines.append("weighted_mean = " + _measure(
            summary.mean, summary.mean_sigma, "dimensionless"))
        lines.append("trend_slope = " + _measure(
            summary.trend_slope, summary.trend_slope_sigma, "cm^3"))
        verdict = ZERO_SLOPE_VERDICT if summary.consistent_with_zero else TREND_VERDICT
        lines.append(f"verdict = {verdict}")
    return "\n".join(lines) + "\n"
