"""Acceptance suite: one test per release criterion, each printing a
PASS line with the measured numbers (run with -s to see them live)."""

import time
from pathlib import Path

import numpy as np

from selref import (
    FrequencyGrid,
    ModulationSettings,
    Spectrum,
    VaporState,
    complex_refractive_index,
    dielectric_coefficient,
    fm_values,
    reflectivity,
)
from selref.analysis import ExcitationSeries, excitation_dependence
from selref.cli import main
from selref.fitkit import FitConfig, fit_fm_spectrum, initial_guess, linear_fit
from selref.reflectance import LOCKIN_MODE, _Chain
from conftest import REFERENCE_DENSITY, make_spectrum

GRID = FrequencyGrid.linspace(-45.0, 50.0, 1267)


def report(name, detail):
    print(f"\nACCEPTANCE {name}: PASS ({detail})")


class TestAcceptance:
    def test_a1_round_trip_spot_fits(self, context, components, constants,
                                     interface, derivative_mod):
        start = time.perf_counter()
        worst = 0.0
        shift_truth = -1.0
        for width, eta in ((13.0, 1.0), (4.98, 0.36)):
            data = make_spectrum(GRID, width, eta, shift_truth, components,
                                 constants, interface, derivative_mod)
            for factor in (0.7, 1.3):
                config = FitConfig(width=width * factor,
                                   excitation=min(eta * factor, 1.0),
                                   shift=shift_truth * (2.0 - factor),
                                   scale=factor,
                                   offset=0.001)
                result = fit_fm_spectrum(data, config, context)
                assert result.converged
                errors = (abs(result["width"] - width) / width,
                          abs(result["excitation"] - eta) / eta,
                          abs(result["shift"] - shift_truth) / abs(shift_truth))
                worst = max(worst, *errors)
                assert all(e < 0.005 for e in errors), (width, eta, factor, errors)
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0
        report("A1 round-trip spot fits",
               f"worst parameter error {worst:.2e}, {elapsed:.2f} s")

    def test_a2_pipeline_normalized_slope(self, tmp_path):
        start = time.perf_counter()
        data_dir = tmp_path / "dataset"
        fits_dir = tmp_path / "fits"
        analysis_dir = tmp_path / "analysis"
        assert main(["simulate", "--out", str(data_dir)]) == 0
        assert main(["fit", str(data_dir / "manifest.csv"),
                     "--out", str(fits_dir)]) == 0
        assert main(["analyze", str(fits_dir / "fit_report.txt"),
                     "--out", str(analysis_dir)]) == 0
        text = (analysis_dir / "analysis_report.txt").read_text()
        mean_line = next(l for l in text.splitlines()
                         if l.startswith("weighted_mean"))
        mean = float(mean_line.split("=")[1].split()[0])
        assert abs(mean - 0.90) < 0.02
        assert "verdict = consistent with zero slope" in text
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0
        report("A2 pipeline normalized slope",
               f"aggregate {mean:.4f} vs target 0.90 +/- 0.02, {elapsed:.1f} s")

    def test_a3_derivative_correctness(self, single_component, constants, interface):
        state = VaporState(density=REFERENCE_DENSITY, width=13.0, shift=-1.0)
        analytic = fm_values(GRID.values, state, single_component, constants,
                             interface, ModulationSettings())
        h = 1e-4
        plus = _Chain(GRID.values + h, state, single_component, constants,
                      interface, 1).reflectivity
        minus = _Chain(GRID.values - h, state, single_component, constants,
                       interface, 1).reflectivity
        fd = (plus - minus) / (2.0 * h)
        error = np.max(np.abs(analytic - fd)) / np.max(np.abs(fd))
        assert error < 1e-6
        report("A3 derivative correctness", f"max relative error {error:.2e}")

    def test_a4_lockin_consistency(self, components, constants, interface):
        state = VaporState(density=REFERENCE_DENSITY, width=13.0, shift=-1.0)
        deriv = fm_values(GRID.values, state, components, constants, interface,
                          ModulationSettings())
        mask = np.abs(deriv) > 0.01 * np.max(np.abs(deriv))

        def deviation(depth):
            lockin = fm_values(GRID.values, state, components, constants,
                               interface,
                               ModulationSettings(mode=LOCKIN_MODE, depth=depth))
            target = 0.5 * depth * deriv
            return np.max(np.abs(lockin[mask] - target[mask])) / np.max(
                np.abs(target[mask]))

        small = deviation(0.001)
        assert small < 1e-3
        distortion_37mhz = deviation(0.037)
        assert distortion_37mhz > 0.0
        report("A4 lock-in consistency",
               f"m=1 MHz deviation {small:.2e}; "
               f"m=37 MHz distortion {distortion_37mhz:.2e} (nonzero)")

    def test_a5_invariant_suite(self, components, constants, interface,
                                single_component):
        checks = []

        # far wings: eps -> 1
        state = VaporState(density=REFERENCE_DENSITY, width=13.0, shift=-1.0)
        near = dielectric_coefficient(FrequencyGrid.linspace(-40.0, 40.0, 801),
                                      state, components, constants)
        peak = np.max(np.abs(near - 1.0))
        far_det = 1.0e4 * state.width + 10.0
        far = dielectric_coefficient(FrequencyGrid(np.array([-far_det, far_det])),
                                     state, components, constants)
        assert np.all(np.abs(far - 1.0) < 1e-3 * peak)
        checks.append("far wings")

        # passivity for eta > 0
        grid = FrequencyGrid.linspace(-60.0, 60.0, 601)
        for eta in (1e-6, 0.36, 1.0):
            st = VaporState(density=REFERENCE_DENSITY, width=13.0, shift=-1.0,
                            excitation=eta)
            assert np.all(dielectric_coefficient(grid, st, components,
                                                 constants).imag > 0.0)
        checks.append("Im eps > 0")

        # reflectivity bound
        eps = dielectric_coefficient(grid, state, components, constants)
        r = reflectivity(eps, interface)
        assert np.all((r >= 0.0) & (r < 1.0))
        checks.append("0 <= R < 1")

        # eta = 0 gives a flat FM signal
        st0 = VaporState(density=REFERENCE_DENSITY, width=13.0, excitation=0.0)
        assert np.all(fm_values(grid.values, st0, components, constants, interface,
                                ModulationSettings()) == 0.0)
        checks.append("eta=0 flat")

        # susceptibility linear in eta and N (pointwise ratio)
        base = VaporState(density=6.5e16, width=9.0, shift=0.5, excitation=0.25)
        eps0 = dielectric_coefficient(grid, base, components, constants)
        eps_e = dielectric_coefficient(
            grid, VaporState(density=6.5e16, width=9.0, shift=0.5, excitation=0.5),
            components, constants)
        np.testing.assert_allclose((eps_e - 1.0) / (eps0 - 1.0), 2.0, rtol=1e-12)
        eps_n = dielectric_coefficient(
            grid, VaporState(density=1.3e17, width=9.0, shift=0.5, excitation=0.25),
            components, constants)
        np.testing.assert_allclose((eps_n - 1.0) / (eps0 - 1.0), 2.0, rtol=1e-12)
        checks.append("linearity")

        # principal branch of the index
        rng = np.random.default_rng(1)
        eps_random = np.concatenate([
            rng.uniform(0.05, 5.0, 300) + 1j * rng.uniform(-5.0, 5.0, 300),
            -rng.uniform(0.05, 5.0, 100) + 1j * rng.uniform(-1e-12, 1e-12, 100)])
        n = complex_refractive_index(eps_random)
        assert np.all(n.imag >= 0.0)
        assert np.max(np.abs(n * n - eps_random) / np.abs(eps_random)) < 1e-12
        checks.append("sqrt branch")

        # exact straight line
        fit = linear_fit([(0.0, 1.0), (1.0, 3.0)])
        assert fit.intercept == 1.0 and fit.slope == 2.0
        x = np.arange(10, dtype=float)
        fit = linear_fit(list(zip(x, 5.0 - 2.0 * x)))
        assert fit.slope == -2.0 and fit.residual_variance == 0.0
        checks.append("linear_fit exact")

        # normalized slope invariant under common width rescaling
        points = ((0.36, 6.0, 0.06), (0.5, 7.6, 0.08), (0.75, 10.1, 0.1),
                  (1.0, 13.0, 0.13))
        row = excitation_dependence(ExcitationSeries(density=1.3e17, points=points))
        scaled = ExcitationSeries(
            density=1.3e17,
            points=tuple((e, 4.0 * g, 4.0 * s) for e, g, s in points))
        assert excitation_dependence(scaled).normalized_slope == row.normalized_slope
        checks.append("slope rescaling")

        report("A5 invariant suite", ", ".join(checks))

    def test_a6_monte_carlo_robustness(self, context, components, constants,
                                       interface, derivative_mod):
        clean = make_spectrum(GRID, 13.0, 1.0, -1.0, components, constants,
                              interface, derivative_mod)
        p2p = clean.peak_to_peak()
        errors = []
        for seed in range(50):
            rng = np.random.default_rng(seed)
            noisy = Spectrum(clean.frequency.copy(),
                             clean.signal + rng.normal(0.0, 0.01 * p2p, len(clean)),
                             {})
            result = fit_fm_spectrum(noisy, initial_guess(noisy, context), context)
            assert result.converged, f"seed {seed} failed to converge"
            errors.append(abs(result["width"] - 13.0) / 13.0)
        median = float(np.median(errors))
        assert median < 0.02
        report("A6 Monte-Carlo robustness",
               f"median width error {median * 100:.3f}% over 50 seeds, "
               f"all converged")

    def test_a7_determinism(self, tmp_path):
        def run_pipeline(root: Path):
            assert main(["simulate", "--out", str(root / "dataset")]) == 0
            assert main(["fit", str(root / "dataset" / "manifest.csv"),
                         "--out", str(root / "fits")]) == 0
            assert main(["analyze", str(root / "dataset" / "manifest.csv"),
                         "--out", str(root / "analysis")]) == 0

        first, second = tmp_path / "run1", tmp_path / "run2"
        run_pipeline(first)
        run_pipeline(second)
        files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
        assert files, "pipeline produced no files"
        for rel in files:
            assert (first / rel).read_bytes() == (second / rel).read_bytes(), rel
        report("A7 determinism",
               f"{len(files)} files byte-identical across two full runs")
