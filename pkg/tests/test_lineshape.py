import math

import numpy as np
import pytest

from selref import (
    FrequencyGrid,
    SpectralLineComponent,
    TransitionConstants,
    VaporState,
    complex_refractive_index,
    default_rb_d2_components,
    dielectric_coefficient,
    load_components,
    save_components,
)
from selref.lineshape import (
    RB85_ABUNDANCE,
    RB87_ABUNDANCE,
    RB87_GROUND_SPLITTING,
    validate_components,
)


class TestTransitionConstants:
    def test_coupling_is_exact_product(self):
        c = TransitionConstants(oscillator_strength=0.7, wavelength=780.24e-9)
        assert c.coupling == (c.oscillator_strength * c.light_speed
                              * c.classical_electron_radius * c.wavelength)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            TransitionConstants(oscillator_strength=0.0, wavelength=780e-9)
        with pytest.raises(ValueError):
            TransitionConstants(oscillator_strength=0.7, wavelength=-1.0)


class TestVaporState:
    @pytest.mark.parametrize("kwargs", [
        dict(density=0.0, width=1.0),
        dict(density=-1e16, width=1.0),
        dict(density=1e16, width=0.0),
        dict(density=1e16, width=1.0, excitation=-0.1),
        dict(density=1e16, width=1.0, excitation=1.1),
        dict(density=1e16, width=1.0, shift=float("inf")),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            VaporState(**kwargs)

    def test_accepts_boundary_excitations(self):
        VaporState(density=1e16, width=1.0, excitation=0.0)
        VaporState(density=1e16, width=1.0, excitation=1.0)


class TestFrequencyGrid:
    def test_rejects_non_increasing(self):
        with pytest.raises(ValueError):
            FrequencyGrid(np.array([0.0, 1.0, 1.0]))
        with pytest.raises(ValueError):
            FrequencyGrid(np.array([1.0, 0.0]))

    def test_rejects_too_short_and_non_finite(self):
        with pytest.raises(ValueError):
            FrequencyGrid(np.array([1.0]))
        with pytest.raises(ValueError):
            FrequencyGrid(np.array([0.0, np.nan, 1.0]))

    def test_linspace_and_spacing(self):
        grid = FrequencyGrid.linspace(-1.0, 1.0, 5)
        assert len(grid) == 5
        assert grid.max_spacing == pytest.approx(0.5)


class TestDefaultComponents:
    def test_strengths_normalized(self):
        comps = default_rb_d2_components()
        assert len(comps) == 4
        assert math.fsum(c.relative_strength for c in comps) == 1.0

    def test_87rb_ground_splitting(self):
        comps = {c.label: c for c in default_rb_d2_components()}
        split = comps["87Rb_F1"].center_offset - comps["87Rb_F2"].center_offset
        assert split == pytest.approx(RB87_GROUND_SPLITTING, abs=1e-9)
        assert split == pytest.approx(6.835, abs=5e-4)

    def test_abundance_ratio(self):
        comps = default_rb_d2_components()
        total85 = math.fsum(c.relative_strength for c in comps if c.label.startswith("85"))
        total87 = math.fsum(c.relative_strength for c in comps if c.label.startswith("87"))
        assert total85 / total87 == pytest.approx(RB85_ABUNDANCE / RB87_ABUNDANCE,
                                                  rel=1e-6)
        assert total85 / total87 == pytest.approx(72.17 / 27.83, rel=1e-6)


class TestComponentValidation:
    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            validate_components([])

    def test_unnormalized_rejected(self):
        comps = [SpectralLineComponent("a", 0.0, 0.6),
                 SpectralLineComponent("b", 1.0, 0.6)]
        with pytest.raises(ValueError, match="sum"):
            validate_components(comps)

    def test_bad_fields_rejected(self):
        with pytest.raises(ValueError):
            SpectralLineComponent("a", float("nan"), 1.0)
        with pytest.raises(ValueError):
            SpectralLineComponent("a", 0.0, 0.0)
        with pytest.raises(ValueError):
            SpectralLineComponent("a", 0.0, 1.5)

    def test_dielectric_rejects_bad_components(self, constants):
        grid = FrequencyGrid.linspace(-1, 1, 16)
        state = VaporState(density=1e16, width=1.0)
        with pytest.raises(ValueError):
            dielectric_coefficient(grid, state, [], constants)
        bad = [SpectralLineComponent("a", 0.0, 0.5)]
        with pytest.raises(ValueError):
            dielectric_coefficient(grid, state, bad, constants)


class TestDielectricCoefficient:
    def test_eta_zero_gives_vacuum(self, components, constants):
        grid = FrequencyGrid.linspace(-20.0, 20.0, 101)
        state = VaporState(density=1.3e17, width=13.0, shift=2.0, excitation=0.0)
        eps = dielectric_coefficient(grid, state, components, constants)
        assert np.all(eps == 1.0 + 0.0j)

    def test_line_center_is_purely_imaginary(self, constants):
        # exactly representable offsets so the real part cancels to zero
        comp = (SpectralLineComponent("line", 0.5, 1.0),)
        state = VaporState(density=1.3e17, width=13.0, shift=0.25, excitation=1.0)
        grid = FrequencyGrid(np.array([-1.0, 0.25, 1.0]))
        eps = dielectric_coefficient(grid, state, comp, constants)
        center = eps[1]
        from selref.lineshape import susceptibility_amplitude
        expected = susceptibility_amplitude(state, constants) / state.width
        assert center.real == 1.0
        assert center.imag == pytest.approx(expected, rel=1e-15)

    def test_dimensional_analysis_oracle(self):
        # independent symbol-by-symbol evaluation with explicit unit
        # conversions, sharing only the raw input numbers
        f = 0.7
        lam = 780.24e-9          # m
        r_e = 2.8179403262e-15   # m
        c = 299792458.0          # m/s
        density_cm3 = 1.3e17
        gamma_ghz = 13.0

        k = f * c * r_e * lam                       # m^3/s
        n_m3 = density_cm3 * 1.0e6                  # m^-3
        gamma_rad_s = 2.0 * math.pi * gamma_ghz * 1.0e9
        chi_expected = k * n_m3 / gamma_rad_s       # |eps - 1| at line center

        constants = TransitionConstants(oscillator_strength=f, wavelength=lam,
                                        classical_electron_radius=r_e, light_speed=c)
        comp = (SpectralLineComponent("line", 0.0, 1.0),)
        state = VaporState(density=density_cm3, width=gamma_ghz, excitation=1.0)
        grid = FrequencyGrid(np.array([-1.0, 0.0, 1.0]))
        eps = dielectric_coefficient(grid, state, comp, constants)
        assert abs(eps[1] - 1.0) == pytest.approx(chi_expected, rel=1e-10)

    def test_far_wing_limit(self, components, constants):
        state = VaporState(density=1.3e17, width=13.0, shift=-1.0, excitation=1.0)
        near = FrequencyGrid.linspace(-40.0, 40.0, 801)
        eps_near = dielectric_coefficient(near, state, components, constants)
        peak = np.max(np.abs(eps_near - 1.0))
        far_detuning = 1.0e4 * state.width + 10.0  # past every component offset
        far = FrequencyGrid(np.array([-far_detuning, far_detuning]))
        eps_far = dielectric_coefficient(far, state, components, constants)
        assert np.all(np.abs(eps_far - 1.0) < 1e-3 * peak)

    def test_linear_in_eta_and_density(self, components, constants):
        # pointwise ratio test: doubling eta or N doubles eps - 1, up to
        # the rounding of the 1 + chi sum
        grid = FrequencyGrid.linspace(-30.0, 30.0, 257)
        base = VaporState(density=6.5e16, width=9.0, shift=0.5, excitation=0.25)
        eps0 = dielectric_coefficient(grid, base, components, constants)
        double_eta = VaporState(density=6.5e16, width=9.0, shift=0.5, excitation=0.5)
        eps_e = dielectric_coefficient(grid, double_eta, components, constants)
        np.testing.assert_allclose((eps_e - 1.0) / (eps0 - 1.0), 2.0, rtol=1e-12)
        double_n = VaporState(density=1.3e17, width=9.0, shift=0.5, excitation=0.25)
        eps_n = dielectric_coefficient(grid, double_n, components, constants)
        np.testing.assert_allclose((eps_n - 1.0) / (eps0 - 1.0), 2.0, rtol=1e-12)

    def test_passivity_random_states(self, components, constants):
        rng = np.random.default_rng(42)
        grid = FrequencyGrid.linspace(-60.0, 60.0, 301)
        for _ in range(25):
            state = VaporState(density=10 ** rng.uniform(15.5, 17.5),
                               width=rng.uniform(0.5, 20.0),
                               shift=rng.uniform(-3.0, 3.0),
                               excitation=rng.uniform(1e-6, 1.0))
            eps = dielectric_coefficient(grid, state, components, constants)
            assert np.all(eps.imag > 0.0)


class TestComplexRefractiveIndex:
    def test_trivial_values(self):
        assert complex_refractive_index(1.0) == 1.0
        assert complex_refractive_index(4.0) == 2.0

    def test_principal_root_of_i(self):
        n = complex_refractive_index(1j)
        expected = math.cos(math.pi / 4.0)
        assert n.real == pytest.approx(expected, rel=1e-15)
        assert n.imag == pytest.approx(expected, rel=1e-15)
        assert n * n == pytest.approx(1j, rel=1e-15)

    def test_branch_on_random_eps(self):
        rng = np.random.default_rng(7)
        # right half-plane, both imaginary signs
        eps = rng.uniform(0.05, 5.0, 400) + 1j * rng.uniform(-5.0, 5.0, 400)
        # plus points hugging the negative real axis
        eps = np.concatenate([
            eps,
            -rng.uniform(0.05, 5.0, 200) + 1j * rng.uniform(-1e-12, 1e-12, 200),
        ])
        n = complex_refractive_index(eps)
        assert np.all(n.imag >= 0.0)
        assert np.max(np.abs(n * n - eps) / np.abs(eps)) < 1e-12


class TestComponentTableIO:
    def test_round_trip(self, tmp_path, components):
        path = tmp_path / "comps.txt"
        save_components(path, components)
        loaded = load_components(path)
        assert [c.label for c in loaded] == [c.label for c in components]
        assert [c.center_offset for c in loaded] == [c.center_offset for c in components]
        assert [c.relative_strength for c in loaded] == [c.relative_strength
                                                         for c in components]

    def test_renormalization_warns(self, tmp_path):
        path = tmp_path / "comps.txt"
        path.write_text("# test table\na -1.0 0.9\nb 1.0 0.6\n")
        with pytest.warns(UserWarning, match="renormalizing"):
            loaded = load_components(path)
        assert math.fsum(c.relative_strength for c in loaded) == pytest.approx(1.0,
                                                                               abs=1e-12)

    def test_small_deviation_is_silent(self, tmp_path):
        path = tmp_path / "comps.txt"
        path.write_text(f"a -1.0 {0.5 + 1e-8}\nb 1.0 0.5\n")
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            load_components(path)

    def test_parse_errors_carry_line_numbers(self, tmp_path):
        path = tmp_path / "comps.txt"
        path.write_text("a -1.0 0.5\nbroken line here extra\n")
        with pytest.raises(ValueError, match="line 2"):
            load_components(path)
        path.write_text("a notanumber 0.5\n")
        with pytest.raises(ValueError, match="line 1"):
            load_components(path)
        path.write_text("# only comments\n")
        with pytest.raises(ValueError, match="no components"):
            load_components(path)
