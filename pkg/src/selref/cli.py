"""Command-line interface: `selref simulate | fit | analyze`.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 at least one fit failed to converge.  Every error path prints a single
line starting with a greppable code (E_USAGE, E_CONFIG, E_DATA, E_FIT).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import dataio, reports
from .analysis import ExcitationSeries, excitation_dependence, normalized_slope_aggregate, slope_vs_density
from .dataio import ConfigError, DataFormatError
from .fitkit import FitConfig, FitError, ModelContext, fit_fm_spectrum, initial_guess
from .reflectance import Spectrum
from .synth import generate_campaign

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_FIT = 3

# pumped-cell excitation guesses stay inside this interval
_ETA_GUESS_RANGE = (0.02, 0.98)


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(prog="selref",
                             description="Selective-reflection FM spectra: "
                                         "simulate, fit, analyze.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic campaign dataset")
    sim.add_argument("--config", help="INI config file (defaults are built in)")
    sim.add_argument("--out", help="output directory for the dataset")
    sim.add_argument("--seed", type=int, help="override the campaign noise seed")
    sim.add_argument("--dry-run", action="store_true",
                     help="print the cell table without writing anything")
    sim.set_defaults(func=_cmd_simulate)

    fit = sub.add_parser("fit", help="fit one spectrum or a whole manifest")
    fit.add_argument("input", help="spectrum file or dataset manifest")
    fit.add_argument("--config", help="INI config file")
    fit.add_argument("--out", help="output directory (report + plot data)")
    fit.add_argument("--jobs", type=int, default=1, help="concurrent fits")
    fit.add_argument("--plot", action="store_true",
                     help="also render PNG figures (requires matplotlib)")
    fit.set_defaults(func=_cmd_fit)

    ana = sub.add_parser("analyze", help="slope analysis from a manifest or fit report")
    ana.add_argument("input", help="dataset manifest or fit report")
    ana.add_argument("--config", help="INI config file")
    ana.add_argument("--out", help="output directory (report + plot data)")
    ana.add_argument("--jobs", type=int, default=1, help="concurrent fits (manifest input)")
    ana.add_argument("--plot", action="store_true",
                     help="also render PNG figures (requires matplotlib)")
    ana.set_defaults(func=_cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"E_USAGE: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"E_CONFIG: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"E_DATA: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FitError as exc:
        print(f"E_FIT: {exc}", file=sys.stderr)
        return EXIT_FIT
    except OSError as exc:
        print(f"E_DATA: {exc}", file=sys.stderr)
        return EXIT_DATA


# ---------------------------------------------------------------------------
# shared plumbing

def _model_parts(config):
    return (dataio.components_from_config(config),
            dataio.constants_from_config(config),
            dataio.interface_from_config(config),
            dataio.modulation_from_config(config))


def _context(config, density: float) -> ModelContext:
    components, constants, interface, modulation = _model_parts(config)
    return ModelContext(density=density, components=tuple(components),
                        constants=constants, interface=interface,
                        modulation=modulation)


def _fit_options(config) -> dict:
    jacobian = config["fit"]["jacobian"]
    if jacobian not in ("analytic", "finite-difference"):
        raise ConfigError(f"[fit] jacobian must be analytic or finite-difference, got {jacobian!r}")
    return {
        "jacobian": jacobian,
        "max_iterations": dataio._cfg_int(config, "fit", "max_iterations"),
        "step_tol": dataio._cfg_float(config, "fit", "step_tol"),
        "residual_tol": dataio._cfg_float(config, "fit", "residual_tol"),
        "damping_init": dataio._cfg_float(config, "fit", "damping_init"),
    }


# ---------------------------------------------------------------------------
# simulate

def _cmd_simulate(args) -> int:
    config = dataio.read_config(args.config)
    spec = dataio.campaign_from_config(config, seed_override=args.seed)
    components, constants, interface, modulation = _model_parts(config)
    if args.dry_run:
        print("index,density_cm3,excitation,width_ghz,shift_ghz,pump_label")
        index = 0
        for i_n, density in enumerate(spec.densities):
            for i_e, eta in enumerate(spec.excitations):
                label = "nopump" if eta == 1.0 else f"pump{i_e:02d}"
                print(f"{index},{dataio.fmt(density)},{dataio.fmt(eta)},"
                      f"{dataio.fmt(spec.width(density, eta))},"
                      f"{dataio.fmt(spec.shift(density))},{label}")
                index += 1
        print(f"dry run: {index} cells, nothing written")
        return EXIT_OK
    if not args.out:
        raise _UsageError("simulate requires --out (or --dry-run)")
    dataset = generate_campaign(spec, components, constants, interface, modulation)
    manifest = dataio.write_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} spectra + manifest to {args.out}")
    print(f"manifest: {manifest}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit

@dataclass
class _FitJob:
    index: int
    path: str
    density: float
    pump_label: str
    eta_truth: float | None
    spectrum: Spectrum


def _base_fit_config(spectrum: Spectrum, context: ModelContext,
                     options: dict) -> FitConfig:
    guess = initial_guess(spectrum, context)
    return replace(guess, **options)


def _fit_one(job: _FitJob, config, options) -> tuple:
    """Fit a single spectrum with all five parameters free."""
    context = _context(config, job.density)
    fit_config = _base_fit_config(job.spectrum, context, options)
    return fit_fm_spectrum(job.spectrum, fit_config, context), fit_config


def _run_jobs(jobs_count: int, tasks):
    """Run callables, preserving order; sequential when jobs_count <= 1."""
    if jobs_count <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=jobs_count) as pool:
        futures = [pool.submit(task) for task in tasks]
        return [f.result() for f in futures]


def _fit_batch(rows, base_dir: Path, config, options, jobs: int,
               share_scale: bool) -> tuple:
    """Fit every manifest row; returns (report entries, loaded jobs).

    With shared scales, each density group is anchored on its no-pump row
    (largest truth excitation as fallback): the anchor is fitted with the
    excitation pinned at 1 to calibrate the scale, and the remaining rows
    of the group reuse that scale as a fixed parameter.
    """
    jobs_list: list[_FitJob] = []
    for index, row in enumerate(rows):
        spectrum = dataio.read_spectrum(base_dir / row.path)
        jobs_list.append(_FitJob(index=index, path=row.path, density=row.density,
                                 pump_label=row.pump_label, eta_truth=row.eta_truth,
                                 spectrum=spectrum))

    results: list = [None] * len(jobs_list)
    errors: list = [None] * len(jobs_list)

    def record(job, outcome):
        result, error = outcome
        results[job.index] = result
        errors[job.index] = error

    if not share_scale:
        def free_task(job):
            def run():
                try:
                    return _fit_one(job, config, options)[0], None
                except (FitError, ValueError) as exc:
                    return None, str(exc)
            return run
        outcomes = _run_jobs(jobs, [free_task(j) for j in jobs_list])
        for job, outcome in zip(jobs_list, outcomes):
            record(job, outcome)
    else:
        groups: dict = {}
        for job in jobs_list:
            groups.setdefault(job.density, []).append(job)

        def anchor_of(group):
            named = [j for j in group if j.pump_label == "nopump"]
            if named:
                return named[0]
            with_truth = [j for j in group if j.eta_truth is not None]
            if with_truth:
                return max(with_truth, key=lambda j: (j.eta_truth, -j.index))
            return group[0]

        anchors = {density: anchor_of(group) for density, group in groups.items()}

        def anchor_task(job):
            def run():
                try:
                    context = _context(config, job.density)
                    fit_config = replace(
                        _base_fit_config(job.spectrum, context, options),
                        excitation=1.0, fixed=("excitation",))
                    return fit_fm_spectrum(job.spectrum, fit_config, context), None
                except (FitError, ValueError) as exc:
                    return None, str(exc)
            return run

        anchor_jobs = [anchors[d] for d in sorted(groups)]
        outcomes = _run_jobs(jobs, [anchor_task(j) for j in anchor_jobs])
        for job, outcome in zip(anchor_jobs, outcomes):
            record(job, outcome)

        def pumped_task(job, anchor):
            def run():
                anchor_result = results[anchor.index]
                if anchor_result is None:
                    return None, (f"anchor fit for density {job.density:g} failed; "
                                  f"no shared scale available")
                try:
                    context = _context(config, job.density)
                    base = _base_fit_config(job.spectrum, context, options)
                    eta0 = job.spectrum.peak_to_peak() / anchor.spectrum.peak_to_peak()
                    eta0 = min(max(eta0, _ETA_GUESS_RANGE[0]), _ETA_GUESS_RANGE[1])
                    fit_config = replace(base, excitation=eta0,
                                         scale=anchor_result["scale"],
                                         fixed=("scale",))
                    return fit_fm_spectrum(job.spectrum, fit_config, context), None
                except (FitError, ValueError) as exc:
                    return None, str(exc)
            return run

        pumped = [(job, anchors[job.density]) for job in jobs_list
                  if job is not anchors[job.density]]
        outcomes = _run_jobs(jobs, [pumped_task(j, a) for j, a in pumped])
        for (job, _), outcome in zip(pumped, outcomes):
            record(job, outcome)

    entries = []
    for job in jobs_list:
        entries.append(reports.FitReportEntry(
            path=job.path, density=job.density, pump_label=job.pump_label,
            eta_truth=job.eta_truth, n_points=len(job.spectrum),
            result=results[job.index], error=errors[job.index]))
    return entries, jobs_list


def _write_fit_outputs(entries, jobs_list, out_dir: Path, config, render: bool) -> None:
    report = reports.build_fit_report(entries)
    dataio.atomic_write_text(out_dir / "fit_report.txt", report)
    plots = out_dir / "plots"
    for entry, job in zip(entries, jobs_list):
        if entry.result is None:
            continue
        context = _context(config, entry.density)
        est = entry.result.estimates
        model = (est["scale"] * context.model(job.spectrum.frequency, est["width"],
                                              est["excitation"], est["shift"])
                 + est["offset"])
        stem = Path(entry.path).stem
        dataio.write_columns(
            plots / f"{job.index:03d}_{stem}_fit.csv",
            [f"model overlay for {entry.path}"],
            ["frequency_GHz", "data", "model", "residual"],
            [job.spectrum.frequency, job.spectrum.signal, model,
             model - job.spectrum.signal])
        if render:
            _render_overlay(plots / f"{job.index:03d}_{stem}_fit.png",
                            job.spectrum, model, entry.path)


def _cmd_fit(args) -> int:
    config = dataio.read_config(args.config)
    options = _fit_options(config)
    share_scale = dataio._cfg_bool(config, "fit", "share_scale_per_density")
    input_path = Path(args.input)
    if not input_path.exists():
        raise DataFormatError(f"input not found: {input_path}")

    if dataio.is_manifest(input_path):
        rows = dataio.read_manifest(input_path)
        entries, jobs_list = _fit_batch(rows, input_path.parent, config, options,
                                        args.jobs, share_scale)
    else:
        spectrum = dataio.read_spectrum(input_path)
        if "density_cm3" not in spectrum.metadata:
            raise DataFormatError(
                f"{input_path}: spectrum header lacks density_cm3 and no manifest given")
        density = float(spectrum.metadata["density_cm3"])
        eta_truth = (float(spectrum.metadata["truth_excitation"])
                     if "truth_excitation" in spectrum.metadata else None)
        job = _FitJob(0, input_path.name, density, "single", eta_truth, spectrum)
        jobs_list = [job]
        try:
            result, _ = _fit_one(job, config, options)
            entries = [reports.FitReportEntry(job.path, density, job.pump_label,
                                              eta_truth, len(spectrum), result)]
        except (FitError, ValueError) as exc:
            entries = [reports.FitReportEntry(job.path, density, job.pump_label,
                                              eta_truth, len(spectrum), None,
                                              error=str(exc))]

    report = reports.build_fit_report(entries)
    if args.out:
        _write_fit_outputs(entries, jobs_list, Path(args.out), config, args.plot)
        print(f"fit report: {Path(args.out) / 'fit_report.txt'}")
    else:
        print(report, end="")

    failed = [e for e in entries
              if e.error is not None or (e.result is not None and not e.result.converged)]
    if failed:
        print(f"E_FIT: {len(failed)} of {len(entries)} fits failed or did not converge",
              file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze

def _records_from_entries(entries) -> list[dict]:
    records = []
    for entry in entries:
        if entry.error is not None or entry.result is None or not entry.result.converged:
            continue
        records.append({
            "density": entry.density,
            "excitation": entry.result.estimates["excitation"],
            "width": entry.result.estimates["width"],
            "width_sigma": entry.result.uncertainties["width"],
        })
    return records


def _records_from_report(path: Path) -> list[dict]:
    blocks = reports.parse_fit_report(path.read_text(encoding="utf-8"), str(path))
    records = []
    for block in blocks:
        if "error" in block or block.get("converged") != "yes":
            continue
        width, width_sigma = reports.read_measure(block, "width", str(path))
        eta, _ = reports.read_measure(block, "excitation", str(path))
        density, _ = reports.read_measure(block, "density", str(path))
        records.append({"density": density, "excitation": eta,
                        "width": width, "width_sigma": width_sigma})
    return records


def _cmd_analyze(args) -> int:
    config = dataio.read_config(args.config)
    gamma1_source = config["analysis"]["gamma1_source"]
    if gamma1_source not in ("line", "point"):
        raise ConfigError(f"[analysis] gamma1_source must be line or point, got {gamma1_source!r}")
    min_points = dataio._cfg_int(config, "analysis", "min_points_per_density")
    input_path = Path(args.input)
    if not input_path.exists():
        raise DataFormatError(f"input not found: {input_path}")

    if dataio.is_manifest(input_path):
        options = _fit_options(config)
        share_scale = dataio._cfg_bool(config, "fit", "share_scale_per_density")
        rows = dataio.read_manifest(input_path)
        entries, _ = _fit_batch(rows, input_path.parent, config, options,
                                args.jobs, share_scale)
        records = _records_from_entries(entries)
    else:
        head = input_path.read_text(encoding="utf-8").split("\n", 1)[0].strip()
        if head != dataio.FIT_REPORT_MARKER:
            raise DataFormatError(
                f"{input_path}: neither a manifest nor a fit report")
        records = _records_from_report(input_path)

    by_density: dict = {}
    for rec in records:
        by_density.setdefault(rec["density"], []).append(rec)
    series_rows = []
    for density in sorted(by_density):
        recs = by_density[density]
        if len(recs) < min_points:
            raise DataFormatError(
                f"insufficient points at density {density:g} cm^-3: "
                f"{len(recs)} converged fits, need {min_points}")
        series = ExcitationSeries(
            density=density,
            points=tuple((r["excitation"], r["width"], r["width_sigma"]) for r in recs))
        series_rows.append(excitation_dependence(series, gamma1_source))

    if not series_rows:
        raise DataFormatError("no converged fits to analyze")
    if len(series_rows) >= 2:
        slope_fit = slope_vs_density(series_rows)
        summary = normalized_slope_aggregate(series_rows)
    else:
        slope_fit, summary = None, None

    report = reports.build_analysis_report(series_rows, slope_fit, summary)
    if args.out:
        out = Path(args.out)
        dataio.atomic_write_text(out / "analysis_report.txt", report)
        _write_analysis_plots(out / "plots", by_density, series_rows, slope_fit,
                              summary, args.plot)
        print(f"analysis report: {out / 'analysis_report.txt'}")
    else:
        print(report, end="")
    return EXIT_OK


def _write_analysis_plots(plots: Path, by_density, series_rows, slope_fit,
                          summary, render: bool) -> None:
    rows = sorted(series_rows, key=lambda r: r.density)
    dens, etas, widths, sigmas, line_a, line_b = [], [], [], [], [], []
    for row in rows:
        for eta, width, sigma in sorted(
                (r["excitation"], r["width"], r["width_sigma"])
                for r in by_density[row.density]):
            dens.append(row.density)
            etas.append(eta)
            widths.append(width)
            sigmas.append(sigma)
            line_a.append(row.intercept)
            line_b.append(row.slope)
    dataio.write_columns(
        plots / "width_vs_excitation.csv",
        ["fitted width against excitation, one line fit per density"],
        ["density_cm3", "excitation", "width_ghz", "width_sigma_ghz",
         "line_intercept_ghz", "line_slope_ghz"],
        [dens, etas, widths, sigmas, line_a, line_b])

    cols = {
        "density_cm3": [r.density for r in rows],
        "slope_ghz": [r.slope for r in rows],
        "slope_sigma_ghz": [r.slope_sigma for r in rows],
    }
    comments = ["per-density slope of width vs excitation"]
    if slope_fit is not None:
        comments.append(f"linear fit: intercept {dataio.fmt(slope_fit.intercept)} GHz, "
                        f"slope {dataio.fmt(slope_fit.slope)} GHz*cm^3")
    dataio.write_columns(plots / "slope_vs_density.csv", comments,
                         list(cols), list(cols.values()))

    cols = {
        "density_cm3": [r.density for r in rows],
        "normalized_slope": [r.normalized_slope for r in rows],
        "normalized_slope_sigma": [r.normalized_slope_sigma for r in rows],
    }
    comments = ["normalized slope against density"]
    if summary is not None:
        comments.append(f"weighted mean {dataio.fmt(summary.mean)} "
                        f"+/- {dataio.fmt(summary.mean_sigma)}")
    dataio.write_columns(plots / "normalized_slope_vs_density.csv", comments,
                         list(cols), list(cols.values()))

    if render:
        _render_analysis(plots, by_density, rows, summary)


# ---------------------------------------------------------------------------
# optional PNG rendering

def _import_pyplot():
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        return plt
    except ImportError:
        raise ConfigError("--plot requires matplotlib (pip install selref[plot])") from None


def _render_overlay(path: Path, spectrum: Spectrum, model, title: str) -> None:
    plt = _import_pyplot()
    fig, (ax0, ax1) = plt.subplots(2, 1, sharex=True, figsize=(7, 6),
                                   height_ratios=[3, 1])
    ax0.plot(spectrum.frequency, spectrum.signal, ".", ms=2, label="data")
    ax0.plot(spectrum.frequency, model, "-", lw=1, label="model")
    ax0.set_ylabel("FM signal")
    ax0.legend()
    ax0.set_title(title)
    ax1.plot(spectrum.frequency, model - spectrum.signal, "-", lw=0.8)
    ax1.set_xlabel("detuning (GHz)")
    ax1.set_ylabel("residual")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _render_analysis(plots: Path, by_density, rows, summary) -> None:
    plt = _import_pyplot()

    fig, ax = plt.subplots(figsize=(7, 5))
    for row in rows:
        pts = sorted((r["excitation"], r["width"], r["width_sigma"])
                     for r in by_density[row.density])
        e = [p[0] for p in pts]
        ax.errorbar(e, [p[1] for p in pts], yerr=[p[2] for p in pts],
                    fmt="s", ms=4, label=f"N = {row.density:.3g} cm$^{{-3}}$")
        ax.plot([0, 1], [row.intercept, row.intercept + row.slope], "--", lw=0.8)
    ax.set_xlabel("excitation factor")
    ax.set_ylabel("width (GHz)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(plots / "width_vs_excitation.png", dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 5))
    ax.errorbar([r.density for r in rows], [r.slope for r in rows],
                yerr=[r.slope_sigma for r in rows], fmt="s")
    ax.set_xlabel("density (cm$^{-3}$)")
    ax.set_ylabel("slope b (GHz)")
    fig.tight_layout()
    fig.savefig(plots / "slope_vs_density.png", dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 5))
    ax.errorbar([r.density for r in rows], [r.normalized_slope for r in rows],
                yerr=[r.normalized_slope_sigma for r in rows], fmt="s")
    if summary is not None:
        ax.axhline(summary.mean, color="k", lw=1)
    ax.set_xlabel("density (cm$^{-3}$)")
    ax.set_ylabel("normalized slope")
    ax.set_ylim(0, 1.5)
    fig.tight_layout()
    fig.savefig(plots / "normalized_slope_vs_density.png", dpi=120)
    plt.close(fig)


if __name__ == "__main__":
    sys.exit(main())
