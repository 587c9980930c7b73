import numpy as np
import pytest

from selref import (
    FrequencyGrid,
    ModulationSettings,
    OpticalInterface,
    SpectralLineComponent,
    VaporState,
    default_rb_d2_components,
    fm_signal,
    rb_d2_constants,
)
from selref.fitkit import ModelContext

REFERENCE_DENSITY = 1.3e17  # cm^-3


@pytest.fixture(scope="session")
def components():
    return tuple(default_rb_d2_components())


@pytest.fixture(scope="session")
def single_component():
    return (SpectralLineComponent("line", 0.0, 1.0),)


@pytest.fixture(scope="session")
def constants():
    return rb_d2_constants()


@pytest.fixture(scope="session")
def interface():
    return OpticalInterface()


@pytest.fixture(scope="session")
def derivative_mod():
    return ModulationSettings()


@pytest.fixture(scope="session")
def fit_grid():
    return FrequencyGrid.linspace(-45.0, 50.0, 1267)


@pytest.fixture(scope="session")
def context(components, constants, interface, derivative_mod):
    return ModelContext(density=REFERENCE_DENSITY, components=components,
                        constants=constants, interface=interface,
                        modulation=derivative_mod)


def make_spectrum(grid, width, excitation, shift, components, constants,
                  interface, modulation, noise_sigma=0.0, seed=0):
    """Synthetic FM spectrum, optionally with additive Gaussian noise."""
    state = VaporState(density=REFERENCE_DENSITY, width=width, shift=shift,
                       excitation=excitation)
    spectrum = fm_signal(grid, state, components, constants, interface, modulation)
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        p2p = spectrum.peak_to_peak()
        spectrum.signal = spectrum.signal + rng.normal(0.0, noise_sigma * p2p,
                                                       spectrum.signal.size)
    return spectrum
