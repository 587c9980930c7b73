"""Synthetic FM spectra, pump-power series, and multi-density campaigns.

A campaign generates one spectrum per (density, excitation) cell with a
width drawn from the law

    width(N, eta) = static(N) * eta + residual(N)

where both coefficients are affine in density.  The default campaign is
built so the slope of width against excitation, normalized by the
zero-pump width at the same density, equals a target value at every
density; the generated truth table therefore carries that normalized
slope exactly and the fit/analyze pipeline can be scored against it.

Every cell gets its own noise stream: the per-cell seed is derived by
feeding ``(campaign_seed, density_index, excitation_index)`` into
``numpy.random.SeedSequence``, so cells are independent yet the whole
dataset is reproducible from the campaign seed alone.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .lineshape import FrequencyGrid, TransitionConstants, VaporState
from .reflectance import ModulationSettings, OpticalInterface, Spectrum, fm_signal

__all__ = [
    "NOISE_KINDS",
    "NoiseModel",
    "AffineDensityLaw",
    "CampaignSpec",
    "CampaignCell",
    "CampaignDataset",
    "default_campaign",
    "cell_seed",
    "generate_spectrum",
    "generate_campaign",
]

NOISE_KINDS = ("none", "additive-gaussian")

# canonical density range of the default campaign, cm^-3
DEFAULT_DENSITY_RANGE = (2.2e16, 1.3e17)
DEFAULT_EXCITATIONS = (0.36, 0.5, 0.65, 0.8, 1.0)
DEFAULT_WIDTH_UNPUMPED = 13.0        # GHz at the reference density
DEFAULT_REFERENCE_DENSITY = 1.3e17   # cm^-3
DEFAULT_NORMALIZED_SLOPE = 0.90
DEFAULT_SHIFT_UNPUMPED = -1.0        # GHz at the reference density
DEFAULT_SEED = 20080729


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise description: ``sigma`` is the Gaussian standard
    deviation as a fraction of the clean signal's peak-to-peak span."""

    kind: str = "none"
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.sigma < 0.0:
            raise ValueError(f"noise sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class AffineDensityLaw:
    """value(N) = intercept + slope * N, with N in cm^-3."""

    intercept: float = 0.0
    slope: float = 0.0

    def __call__(self, density: float) -> float:
        return self.intercept + self.slope * density


@dataclass(frozen=True)
class CampaignSpec:
    """Cell table and generator laws for a synthetic campaign."""

    densities: tuple
    excitations: tuple
    static_width: AffineDensityLaw
    residual_width: AffineDensityLaw
    shift: AffineDensityLaw
    grid_start: float
    grid_stop: float
    grid_points: int
    noise: NoiseModel

    def __post_init__(self):
        object.__setattr__(self, "densities", tuple(float(d) for d in self.densities))
        object.__setattr__(self, "excitations", tuple(float(e) for e in self.excitations))
        if not self.densities or not self.excitations:
            raise ValueError("campaign needs at least one density and one excitation")
        for d in self.densities:
            if not d > 0.0:
                raise ValueError(f"density must be > 0, got {d}")
        for e in self.excitations:
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"excitation must be in [0, 1], got {e}")
        if not self.grid_stop > self.grid_start:
            raise ValueError("grid_stop must exceed grid_start")
        if self.grid_points < 8:
            raise ValueError("grid needs at least 8 points")
        for d in self.densities:
            for e in self.excitations:
                if not self.width(d, e) > 0.0:
                    raise ValueError(
                        f"width law gives non-positive width at N={d:g}, eta={e:g}")

    def width(self, density: float, excitation: float) -> float:
        return self.static_width(density) * excitation + self.residual_width(density)

    def truth_normalized_slope(self, density: float) -> float:
        """b / gamma(eta=1) implied by the width law at one density."""
        b = self.static_width(density)
        return b / (b + self.residual_width(density))

    def grid(self) -> FrequencyGrid:
        return FrequencyGrid.linspace(self.grid_start, self.grid_stop, self.grid_points)


def default_campaign(seed: int = DEFAULT_SEED) -> CampaignSpec:
    """Five densities spanning the canonical range, five pump levels,
    width law with normalized slope 0.90, 1% additive Gaussian noise."""
    lo, hi = DEFAULT_DENSITY_RANGE
    per_density = DEFAULT_WIDTH_UNPUMPED / DEFAULT_REFERENCE_DENSITY
    return CampaignSpec(
        densities=tuple(np.linspace(lo, hi, 5)),
        excitations=DEFAULT_EXCITATIONS,
        static_width=AffineDensityLaw(0.0, DEFAULT_NORMALIZED_SLOPE * per_density),
        residual_width=AffineDensityLaw(0.0, (1.0 - DEFAULT_NORMALIZED_SLOPE) * per_density),
        shift=AffineDensityLaw(0.0, DEFAULT_SHIFT_UNPUMPED / DEFAULT_REFERENCE_DENSITY),
        grid_start=-30.0,
        grid_stop=30.0,
        grid_points=3001,
        noise=NoiseModel(kind="additive-gaussian", sigma=0.01, seed=seed),
    )


def cell_seed(campaign_seed: int, density_index: int, excitation_index: int) -> int:
    """Deterministic per-cell seed mixed from the campaign seed and cell indices."""
    ss = np.random.SeedSequence(entropy=(campaign_seed, density_index, excitation_index))
    return int(ss.generate_state(1, np.uint64)[0])


def _format_components(components) -> str:
    return ";".join(f"{c.label}:{c.center_offset:.17g}:{c.relative_strength:.17g}"
                    for c in components)


def generate_spectrum(state: VaporState, grid: FrequencyGrid, components,
                      constants: TransitionConstants, interface: OpticalInterface,
                      modulation: ModulationSettings, noise: NoiseModel) -> Spectrum:
    """One synthetic FM spectrum with its full generator record.

    With ``noise.kind == "none"`` the signal is bitwise identical to
    :func:`selref.reflectance.fm_signal`; otherwise Gaussian noise with
    standard deviation ``sigma * peak_to_peak`` is added from the seeded
    stream.  Every generator parameter lands in the metadata.
    """
    clean = fm_signal(grid, state, components, constants, interface, modulation)
    values = clean.signal
    if noise.kind == "additive-gaussian" and noise.sigma > 0.0:
        rng = np.random.default_rng(noise.seed)
        absolute = noise.sigma * (float(np.max(values)) - float(np.min(values)))
        values = values + rng.normal(0.0, absolute, values.size)
    metadata = {
        "format": "selref spectrum v1",
        "frequency_units": "GHz",
        "frequency_reference": "85Rb D2 centroid",
        "signal_units": clean.metadata["signal_units"],
        "density_cm3": f"{state.density:.17g}",
        "truth_width_ghz": f"{state.width:.17g}",
        "truth_shift_ghz": f"{state.shift:.17g}",
        "truth_excitation": f"{state.excitation:.17g}",
        "oscillator_strength": f"{constants.oscillator_strength:.17g}",
        "wavelength_m": f"{constants.wavelength:.17g}",
        "classical_electron_radius_m": f"{constants.classical_electron_radius:.17g}",
        "light_speed_m_s": f"{constants.light_speed:.17g}",
        "window_index": f"{interface.window_index:.17g}",
        "fm_mode": modulation.mode,
        "modulation_depth_ghz": f"{modulation.depth:.17g}",
        "lockin_samples": str(modulation.lockin_samples),
        "components": _format_components(components),
        "noise_kind": noise.kind,
        "noise_sigma": f"{noise.sigma:.17g}",
        "noise_seed": str(noise.seed),
    }
    return Spectrum(grid.values.copy(), values, metadata)


@dataclass(frozen=True)
class CampaignCell:
    """One generated spectrum with its manifest bookkeeping."""

    path: str
    density: float
    excitation: float
    pump_label: str
    seed: int
    spectrum: Spectrum


@dataclass(frozen=True)
class CampaignDataset:
    spec: CampaignSpec
    cells: tuple

    def __len__(self) -> int:
        return len(self.cells)


def generate_campaign(spec: CampaignSpec, components,
                      constants: TransitionConstants, interface: OpticalInterface,
                      modulation: ModulationSettings) -> CampaignDataset:
    """Generate every (density, excitation) cell of a campaign in memory.

    Cells are ordered by density index then excitation index; the
    relative file path, pump label and per-cell seed baked into each cell
    are what the dataset writer and manifest use verbatim.
    """
    grid = spec.grid()
    cells = []
    for i_n, density in enumerate(spec.densities):
        shift = spec.shift(density)
        for i_e, excitation in enumerate(spec.excitations):
            width = spec.width(density, excitation)
            if not width > 0.0:
                raise ValueError(
                    f"width law gives non-positive width at N={density:g}, eta={excitation:g}")
            seed = cell_seed(spec.noise.seed, i_n, i_e)
            noise = replace(spec.noise, seed=seed)
            state = VaporState(density=density, width=width, shift=shift,
                               excitation=excitation)
            spectrum = generate_spectrum(state, grid, components, constants,
                                         interface, modulation, noise)
            label = "nopump" if excitation == 1.0 else f"pump{i_e:02d}"
            path = f"spectra/d{i_n:02d}_{label}.csv"
            cells.append(CampaignCell(path=path, density=density,
                                      excitation=excitation, pump_label=label,
                                      seed=seed, spectrum=spectrum))
    return CampaignDataset(spec=spec, cells=tuple(cells))
