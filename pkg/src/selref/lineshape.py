"""Dielectric response of a dense two-level vapor near resonance.

The vapor is described by a sum of Lorentzian dispersion terms, one per
ground-state hyperfine/isotope component:

    eps(d) = 1 + sum_j  k * eta * N * A_j / (d - nu_j + shift - i*width)

with ``k = f * c * r_e * lambda`` the classical dipole coupling of the
transition.  All frequency-like quantities (detuning ``d``, component
offsets ``nu_j``, ``shift``, ``width``) are ordinary frequencies in GHz at
the API surface; the denominator is converted to angular frequency
(rad/s) internally so the summand is dimensionless.  Conventions used
throughout the package:

* ``width`` is the Lorentzian half-width parameter of the denominator
  (HWHM of the imaginary part for a single component).  Every reported
  width uses this one convention, so round trips are self-consistent.
* detuning ``d = nu_laser - nu_reference`` where the reference is the
  declared zero of the component table (here: the 85Rb D2 line centroid).
* ``excitation`` (eta) scales the susceptibility linearly: eta = 1 is an
  unpumped vapor, eta = 0 a fully saturated one with vacuum response.
* a positive ``shift`` moves the observed resonance of component j to
  ``d = nu_j - shift``.

Densities are given in cm^-3 and converted to m^-3 internally.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.constants as sc

__all__ = [
    "TransitionConstants",
    "SpectralLineComponent",
    "VaporState",
    "FrequencyGrid",
    "rb_d2_constants",
    "default_rb_d2_components",
    "validate_components",
    "dielectric_coefficient",
    "susceptibility_amplitude",
    "complex_refractive_index",
    "load_components",
    "save_components",
]

# unit conversions
RAD_PER_S_PER_GHZ = 2.0 * math.pi * 1.0e9   # ordinary GHz -> rad/s
M3_PER_CM3 = 1.0e6                          # per-cm^3 -> per-m^3

# Rubidium reference data (D. A. Steck, "Rubidium 87 D Line Data" and
# "Rubidium 85 D Line Data", rev. 2021, https://steck.us/alkalidata).
RB85_ABUNDANCE = 0.7217
RB87_ABUNDANCE = 0.2783
RB87_GROUND_SPLITTING = 6.834682610904      # GHz, 5S1/2 F=1 <-> F=2
RB85_GROUND_SPLITTING = 3.0357324390        # GHz, 5S1/2 F=2 <-> F=3
RB87_D2_ISOTOPE_SHIFT = 0.0780955           # GHz, 87Rb D2 centroid above 85Rb
RB_D2_WAVELENGTH = 780.241e-9               # m
RB_D2_OSCILLATOR_STRENGTH = 0.7             # rounded standard value


@dataclass(frozen=True)
class TransitionConstants:
    """Atomic constants of the probed transition.

    oscillator_strength is dimensionless, wavelength in meters; the
    classical electron radius and light speed default to CODATA values.
    The derived coupling ``k = f*c*r_e*lambda`` (m^3/s) multiplies
    ``eta*N`` in the dielectric coefficient.
    """

    oscillator_strength: float
    wavelength: float
    classical_electron_radius: float = sc.physical_constants["classical electron radius"][0]
    light_speed: float = sc.c

    def __post_init__(self):
        if not self.oscillator_strength > 0.0:
            raise ValueError(f"oscillator strength must be > 0, got {self.oscillator_strength}")
        if not self.wavelength > 0.0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")

    @property
    def coupling(self) -> float:
        """k = f * c * r_e * lambda, in m^3/s."""
        return (self.oscillator_strength * self.light_speed
                * self.classical_electron_radius * self.wavelength)


def rb_d2_constants() -> TransitionConstants:
    """Transition constants of the rubidium D2 line (780 nm)."""
    return TransitionConstants(
        oscillator_strength=RB_D2_OSCILLATOR_STRENGTH,
        wavelength=RB_D2_WAVELENGTH,
    )


@dataclass(frozen=True)
class SpectralLineComponent:
    """One hyperfine/isotope line: offset from the reference (GHz) and
    its share of the total oscillator strength."""

    label: str
    center_offset: float
    relative_strength: float

    def __post_init__(self):
        if not math.isfinite(self.center_offset):
            raise ValueError(f"{self.label}: center offset must be finite")
        if not 0.0 < self.relative_strength <= 1.0:
            raise ValueError(
                f"{self.label}: relative strength must be in (0, 1], got {self.relative_strength}")


def validate_components(components) -> None:
    """Check a component set: nonempty and strengths normalized to 1."""
    if not components:
        raise ValueError("component list is empty")
    total = math.fsum(c.relative_strength for c in components)
    if abs(total - 1.0) > 1e-12:
        raise ValueError(
            f"relative strengths must sum to 1 (got {total!r}); renormalize the table")


def default_rb_d2_components() -> list[SpectralLineComponent]:
    """Four ground-state components of the natural-abundance Rb D2 line.

    Offsets are relative to the 85Rb D2 centroid; strengths are
    isotopic abundance times ground-level degeneracy (2F+1), normalized
    to sum to one.  Excited-state hyperfine structure is not resolved at
    the widths this model targets and is folded into each component.
    """
    lines = [
        ("87Rb_F2", RB87_D2_ISOTOPE_SHIFT - 0.375 * RB87_GROUND_SPLITTING,
         RB87_ABUNDANCE * 5.0 / 8.0),
        ("85Rb_F3", -RB85_GROUND_SPLITTING * 5.0 / 12.0,
         RB85_ABUNDANCE * 7.0 / 12.0),
        ("85Rb_F2", RB85_GROUND_SPLITTING * 7.0 / 12.0,
         RB85_ABUNDANCE * 5.0 / 12.0),
        ("87Rb_F1", RB87_D2_ISOTOPE_SHIFT + 0.625 * RB87_GROUND_SPLITTING,
         RB87_ABUNDANCE * 3.0 / 8.0),
    ]
    total = math.fsum(s for _, _, s in lines)
    return [SpectralLineComponent(label, off, s / total) for label, off, s in lines]


@dataclass(frozen=True)
class VaporState:
    """Physical condition of the vapor for one spectrum.

    density in cm^-3, width (self-broadened Lorentzian half width) and
    shift in GHz, excitation dimensionless in [0, 1] (1 = unpumped).
    """

    density: float
    width: float
    shift: float = 0.0
    excitation: float = 1.0

    def __post_init__(self):
        if not self.density > 0.0:
            raise ValueError(f"density must be > 0, got {self.density}")
        if not self.width > 0.0:
            raise ValueError(f"width must be > 0, got {self.width}")
        if not math.isfinite(self.shift):
            raise ValueError(f"shift must be finite, got {self.shift}")
        if not 0.0 <= self.excitation <= 1.0:
            raise ValueError(f"excitation must be in [0, 1], got {self.excitation}")


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing detuning samples in GHz."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("grid must be a 1D array with at least 2 samples")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid samples must be finite")
        if not np.all(np.diff(values) > 0.0):
            raise ValueError("grid samples must be strictly increasing")
        object.__setattr__(self, "values", values)

    @classmethod
    def linspace(cls, start: float, stop: float, num: int) -> "FrequencyGrid":
        return cls(np.linspace(start, stop, num))

    def __len__(self) -> int:
        return self.values.size

    @property
    def max_spacing(self) -> float:
        return float(np.max(np.diff(self.values)))


def susceptibility_amplitude(state: VaporState, constants: TransitionConstants) -> float:
    """Dimensionless susceptibility amplitude k*eta*N / (2*pi*1e9).

    Dividing this by a GHz-valued complex denominator gives the
    (dimensionless) contribution of a unit-strength component.
    """
    return (constants.coupling * state.excitation * state.density * M3_PER_CM3
            / RAD_PER_S_PER_GHZ)


def dielectric_coefficient(grid: FrequencyGrid, state: VaporState,
                           components, constants: TransitionConstants) -> np.ndarray:
    """Complex dielectric coefficient eps(d) on the grid.

    Each component j contributes  amp * A_j / (d - nu_j + shift - i*width)
    with the shared amplitude from :func:`susceptibility_amplitude`.  The
    imaginary part is nonnegative for excitation >= 0 (passive medium).
    """
    validate_components(components)
    offsets = np.array([c.center_offset for c in components])
    strengths = np.array([c.relative_strength for c in components])
    denom = (grid.values[:, None] - offsets[None, :]
             + state.shift - 1j * state.width)
    amp = susceptibility_amplitude(state, constants)
    return 1.0 + amp * np.sum(strengths[None, :] / denom, axis=1)


def complex_refractive_index(eps):
    """Refractive index n = sqrt(eps) on the passive branch (Im n >= 0).

    Accepts scalars or arrays; squaring the result reproduces eps.
    """
    scalar = np.isscalar(eps)
    n = np.sqrt(np.asarray(eps, dtype=complex))
    n = np.where(n.imag < 0.0, -n, n)
    return complex(n) if scalar else n


def save_components(path, components) -> None:
    """Write a component table: one `label offset_GHz strength` per line."""
    validate_components(components)
    lines = ["# component table: label offset_GHz relative_strength"]
    for c in components:
        lines.append(f"{c.label} {c.center_offset:.17g} {c.relative_strength:.17g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_components(path) -> list[SpectralLineComponent]:
    """Read a component table, renormalizing strengths on load.

    Lines are `label offset_GHz relative_strength`; `#` starts a comment.
    A warning is emitted when the stored strengths deviate from unit sum
    by more than 1e-6.
    """
    raw = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 3:
                raise ValueError(
                    f"{path} line {lineno}: expected `label offset_GHz strength`, got {line.strip()!r}")
            label, offset_s, strength_s = parts
            try:
                offset, strength = float(offset_s), float(strength_s)
            except ValueError as exc:
                raise ValueError(f"{path} line {lineno}: {exc}") from None
            raw.append((label, offset, strength))
    if not raw:
        raise ValueError(f"{path}: no components found")
    total = math.fsum(s for _, _, s in raw)
    if total <= 0.0:
        raise ValueError(f"{path}: strengths sum to {total}, cannot normalize")
    if abs(total - 1.0) > 1e-6:
        warnings.warn(
            f"{path}: strengths sum to {total:.9g}, renormalizing to 1",
            stacklevel=2)
    return [SpectralLineComponent(label, off, s / total) for label, off, s in raw]
