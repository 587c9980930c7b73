import numpy as np
import pytest

from selref import (
    FrequencyGrid,
    NoiseModel,
    VaporState,
    cell_seed,
    default_campaign,
    fm_signal,
    generate_campaign,
    generate_spectrum,
)
from selref.synth import AffineDensityLaw, CampaignSpec

from conftest import REFERENCE_DENSITY


class TestNoiseModel:
    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseModel(kind="poisson")
        with pytest.raises(ValueError):
            NoiseModel(kind="additive-gaussian", sigma=-0.1)


class TestGenerateSpectrum:
    def test_no_noise_equals_clean_signal(self, components, constants, interface,
                                          derivative_mod):
        grid = FrequencyGrid.linspace(-30.0, 30.0, 501)
        state = VaporState(density=REFERENCE_DENSITY, width=13.0, shift=-1.0)
        clean = fm_signal(grid, state, components, constants, interface,
                          derivative_mod)
        generated = generate_spectrum(state, grid, components, constants, interface,
                                      derivative_mod, NoiseModel())
        assert np.array_equal(generated.signal, clean.signal)
        assert np.array_equal(generated.frequency, clean.frequency)

    def test_same_seed_reproduces(self, components, constants, interface,
                                  derivative_mod):
        grid = FrequencyGrid.linspace(-30.0, 30.0, 501)
        state = VaporState(density=REFERENCE_DENSITY, width=13.0, shift=-1.0)
        noise = NoiseModel(kind="additive-gaussian", sigma=0.02, seed=123)
        a = generate_spectrum(state, grid, components, constants, interface,
                              derivative_mod, noise)
        b = generate_spectrum(state, grid, components, constants, interface,
                              derivative_mod, noise)
        assert a == b
        c = generate_spectrum(state, grid, components, constants, interface,
                              derivative_mod,
                              NoiseModel(kind="additive-gaussian", sigma=0.02,
                                         seed=124))
        assert not np.array_equal(a.signal, c.signal)

    def test_noise_standard_deviation(self, components, constants, interface,
                                      derivative_mod):
        grid = FrequencyGrid.linspace(-30.0, 30.0, 1000)
        state = VaporState(density=REFERENCE_DENSITY, width=13.0, shift=-1.0)
        clean = fm_signal(grid, state, components, constants, interface,
                          derivative_mod)
        noisy = generate_spectrum(state, grid, components, constants, interface,
                                  derivative_mod,
                                  NoiseModel(kind="additive-gaussian", sigma=0.01,
                                             seed=7))
        target = 0.01 * clean.peak_to_peak()
        measured = np.std(noisy.signal - clean.signal)
        assert abs(measured - target) / target < 0.10

    def test_metadata_records_generator(self, components, constants, interface,
                                        derivative_mod):
        grid = FrequencyGrid.linspace(-30.0, 30.0, 501)
        state = VaporState(density=6.1e16, width=7.5, shift=-0.4, excitation=0.62)
        noise = NoiseModel(kind="additive-gaussian", sigma=0.015, seed=99)
        spec = generate_spectrum(state, grid, components, constants, interface,
                                 derivative_mod, noise)
        meta = spec.metadata
        assert float(meta["density_cm3"]) == 6.1e16
        assert float(meta["truth_width_ghz"]) == 7.5
        assert float(meta["truth_excitation"]) == 0.62
        assert meta["noise_seed"] == "99"
        assert float(meta["noise_sigma"]) == 0.015
        assert len(meta["components"].split(";")) == len(components)


class TestCampaignSpec:
    def test_default_campaign_shape(self):
        spec = default_campaign()
        assert len(spec.densities) == 5
        assert spec.densities[0] == 2.2e16
        assert spec.densities[-1] == 1.3e17
        assert spec.excitations == (0.36, 0.5, 0.65, 0.8, 1.0)
        for density in spec.densities:
            assert spec.truth_normalized_slope(density) == pytest.approx(0.90,
                                                                         rel=1e-12)
        assert spec.width(1.3e17, 1.0) == pytest.approx(13.0, rel=1e-12)

    def test_rejects_nonpositive_width_cells(self):
        with pytest.raises(ValueError, match="non-positive width"):
            CampaignSpec(densities=(1e16,), excitations=(0.1,),
                         static_width=AffineDensityLaw(0.0, 1e-16),
                         residual_width=AffineDensityLaw(-1.0, 0.0),
                         shift=AffineDensityLaw(0.0, 0.0),
                         grid_start=-10.0, grid_stop=10.0, grid_points=101,
                         noise=NoiseModel())

    def test_rejects_bad_cells_and_grid(self):
        law = AffineDensityLaw(0.0, 1e-16)
        with pytest.raises(ValueError):
            CampaignSpec(densities=(), excitations=(0.5,), static_width=law,
                         residual_width=law, shift=law, grid_start=-1.0,
                         grid_stop=1.0, grid_points=64, noise=NoiseModel())
        with pytest.raises(ValueError):
            CampaignSpec(densities=(1e16,), excitations=(1.5,), static_width=law,
                         residual_width=law, shift=law, grid_start=-1.0,
                         grid_stop=1.0, grid_points=64, noise=NoiseModel())
        with pytest.raises(ValueError):
            CampaignSpec(densities=(1e16,), excitations=(0.5,), static_width=law,
                         residual_width=law, shift=law, grid_start=1.0,
                         grid_stop=-1.0, grid_points=64, noise=NoiseModel())


class TestGenerateCampaign:
    def test_default_campaign_cells(self, components, constants, interface,
                                    derivative_mod):
        dataset = generate_campaign(default_campaign(), components, constants,
                                    interface, derivative_mod)
        assert len(dataset) == 25
        paths = [cell.path for cell in dataset.cells]
        assert len(set(paths)) == 25
        nopump = [cell for cell in dataset.cells if cell.pump_label == "nopump"]
        assert len(nopump) == 5
        assert all(cell.excitation == 1.0 for cell in nopump)

    def test_truth_table_matches_width_law(self, components, constants, interface,
                                           derivative_mod):
        spec = default_campaign()
        dataset = generate_campaign(spec, components, constants, interface,
                                    derivative_mod)
        for cell in dataset.cells:
            truth = float(cell.spectrum.metadata["truth_width_ghz"])
            assert truth == spec.width(cell.density, cell.excitation)
            shift = float(cell.spectrum.metadata["truth_shift_ghz"])
            assert shift == spec.shift(cell.density)

    def test_campaign_is_deterministic(self, components, constants, interface,
                                       derivative_mod):
        spec = default_campaign(seed=4242)
        a = generate_campaign(spec, components, constants, interface, derivative_mod)
        b = generate_campaign(spec, components, constants, interface, derivative_mod)
        for cell_a, cell_b in zip(a.cells, b.cells):
            assert cell_a.seed == cell_b.seed
            assert cell_a.spectrum == cell_b.spectrum

    def test_single_cell_equals_generate_spectrum(self, components, constants,
                                                  interface, derivative_mod):
        spec = default_campaign(seed=11)
        small = CampaignSpec(densities=(spec.densities[0],),
                             excitations=(0.5,),
                             static_width=spec.static_width,
                             residual_width=spec.residual_width,
                             shift=spec.shift,
                             grid_start=spec.grid_start, grid_stop=spec.grid_stop,
                             grid_points=spec.grid_points, noise=spec.noise)
        dataset = generate_campaign(small, components, constants, interface,
                                    derivative_mod)
        assert len(dataset) == 1
        cell = dataset.cells[0]
        from dataclasses import replace
        direct = generate_spectrum(
            VaporState(density=cell.density,
                       width=small.width(cell.density, cell.excitation),
                       shift=small.shift(cell.density), excitation=cell.excitation),
            small.grid(), components, constants, interface, derivative_mod,
            replace(small.noise, seed=cell_seed(small.noise.seed, 0, 0)))
        assert cell.spectrum == direct

    def test_cell_seeds_are_mixed_and_stable(self):
        seeds = {cell_seed(1, i, j) for i in range(5) for j in range(5)}
        assert len(seeds) == 25
        assert cell_seed(1, 2, 3) == cell_seed(1, 2, 3)
        assert cell_seed(1, 2, 3) != cell_seed(2, 2, 3)
