"""Fresnel reflectivity of the window-vapor interface and FM signals.

The probe reflects at normal incidence off the boundary between a real
window of index ``n_w`` and the vapor of complex index ``n_v = sqrt(eps)``:

    r = (n_w - n_v) / (n_w + n_v),      R = |r|^2

The FM signal is modeled either as the exact frequency derivative dR/dnu
(analytic differentiation through the whole chain) or as the first
harmonic a lock-in recovers under sinusoidal frequency modulation of
depth ``m``:

    S1(nu) = <R(nu + m*cos(theta)) * cos(theta)>_theta

averaged over one modulation cycle, which tends to (m/2) * dR/dnu for
small depth.  Parameter gradients of both signal models are provided in
closed form for the fitter.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .lineshape import (
    FrequencyGrid,
    TransitionConstants,
    VaporState,
    M3_PER_CM3,
    RAD_PER_S_PER_GHZ,
    complex_refractive_index,
    validate_components,
)

__all__ = [
    "DERIVATIVE_MODE",
    "LOCKIN_MODE",
    "OpticalInterface",
    "ModulationSettings",
    "Spectrum",
    "reflectivity",
    "reflectivity_curve",
    "fm_values",
    "fm_signal",
    "fm_signal_with_gradient",
]

DERIVATIVE_MODE = "analytic-derivative"
LOCKIN_MODE = "lockin-first-harmonic"

# fitted physical parameters, in the order gradients are returned
PARAM_ORDER = ("width", "excitation", "shift")


@dataclass(frozen=True)
class OpticalInterface:
    """Real refractive index of the cell window (default: garnet near 780 nm)."""

    window_index: float = 1.82

    def __post_init__(self):
        if not self.window_index > 1.0:
            raise ValueError(f"window index must be > 1, got {self.window_index}")


@dataclass(frozen=True)
class ModulationSettings:
    """How the FM signal is computed.

    ``depth`` is the peak frequency excursion in GHz (only used by the
    lock-in model); ``lockin_samples`` sets the uniform quadrature count
    per modulation cycle.
    """

    mode: str = DERIVATIVE_MODE
    depth: float = 0.037
    lockin_samples: int = 256

    def __post_init__(self):
        if self.mode not in (DERIVATIVE_MODE, LOCKIN_MODE):
            raise ValueError(f"unknown FM mode {self.mode!r}")
        if self.mode == LOCKIN_MODE and not self.depth > 0.0:
            raise ValueError(f"modulation depth must be > 0 in lock-in mode, got {self.depth}")
        if self.lockin_samples < 16:
            raise ValueError(f"lockin_samples must be >= 16, got {self.lockin_samples}")


@dataclass
class Spectrum:
    """A real-valued signal sampled on a strictly increasing frequency grid.

    ``metadata`` is an ordered string-to-string mapping carried through
    file round trips losslessly.
    """

    frequency: np.ndarray = field(repr=False)
    signal: np.ndarray = field(repr=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frequency = np.asarray(self.frequency, dtype=float)
        self.signal = np.asarray(self.signal, dtype=float)
        if self.frequency.ndim != 1 or self.frequency.shape != self.signal.shape:
            raise ValueError("frequency and signal must be 1D arrays of equal length")
        if not np.all(np.diff(self.frequency) > 0.0):
            raise ValueError("frequency samples must be strictly increasing")

    def __eq__(self, other):
        if not isinstance(other, Spectrum):
            return NotImplemented
        return (np.array_equal(self.frequency, other.frequency)
                and np.array_equal(self.signal, other.signal)
                and self.metadata == other.metadata)

    def __len__(self) -> int:
        return self.frequency.size

    @property
    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.frequency)

    def peak_to_peak(self) -> float:
        return float(np.max(self.signal) - np.min(self.signal))


def reflectivity(eps, interface: OpticalInterface) -> np.ndarray:
    """Normal-incidence power reflectivity R = |r|^2 from eps values."""
    n_v = complex_refractive_index(eps)
    r = (interface.window_index - n_v) / (interface.window_index + n_v)
    return np.abs(r) ** 2


class _Chain:
    """Shared pieces of the eps -> n -> r -> R chain on a detuning array.

    Detunings are a plain float array in GHz (not necessarily increasing;
    the lock-in model evaluates off-grid).  On creation this computes the
    component sums S_p = sum_j A_j / w_j^p with w_j = d - nu_j + shift
    - i*width, from which the reflectivity, its frequency derivative and
    its parameter gradients all follow.
    """

    def __init__(self, det, state: VaporState, components,
                 constants: TransitionConstants, interface: OpticalInterface,
                 order: int):
        validate_components(components)
        offsets = np.array([c.center_offset for c in components])
        strengths = np.array([c.relative_strength for c in components])
        w = det[..., None] - offsets + state.shift - 1j * state.width
        self.s1 = np.sum(strengths / w, axis=-1)
        self.s2 = np.sum(strengths / w**2, axis=-1) if order >= 2 else None
        self.s3 = np.sum(strengths / w**3, axis=-1) if order >= 3 else None
        # amplitude per unit excitation, so the eta gradient is defined at eta=0
        self.amp_unit = (constants.coupling * state.density * M3_PER_CM3
                         / RAD_PER_S_PER_GHZ)
        self.amp = state.excitation * self.amp_unit
        self.n_w = interface.window_index

        self.eps = 1.0 + self.amp * self.s1
        self.n = complex_refractive_index(self.eps)
        self.r = (self.n_w - self.n) / (self.n_w + self.n)
        self.reflectivity = np.abs(self.r) ** 2
        # dr/deps, combining dr/dn = -2 n_w/(n_w+n)^2 with dn/deps = 1/(2n)
        self.g = -self.n_w / (self.n * (self.n_w + self.n) ** 2)

    def eps_grad(self):
        """d(eps)/d(width, excitation, shift)."""
        return (1j * self.amp * self.s2,
                self.amp_unit * self.s1,
                -self.amp * self.s2)

    def reflectivity_grad(self):
        """dR/d(width, excitation, shift)."""
        return tuple(2.0 * np.real(np.conj(self.r) * self.g * eps_p)
                     for eps_p in self.eps_grad())

    def derivative(self):
        """dR/dnu in per-GHz units."""
        eps_nu = -self.amp * self.s2
        return 2.0 * np.real(np.conj(self.r) * self.g * eps_nu)

    def derivative_grad(self):
        """d(dR/dnu)/d(width, excitation, shift)."""
        eps_nu = -self.amp * self.s2
        r_nu = self.g * eps_nu
        # dg/dn, for the n-dependence of dr/deps
        g_n = self.n_w * (self.n_w + 3.0 * self.n) / (
            self.n ** 2 * (self.n_w + self.n) ** 3)
        eps_nu_grad = (-2j * self.amp * self.s3,
                       -self.amp_unit * self.s2,
                       2.0 * self.amp * self.s3)
        out = []
        for eps_p, eps_nu_p in zip(self.eps_grad(), eps_nu_grad):
            n_p = eps_p / (2.0 * self.n)
            r_p = self.g * eps_p
            r_nu_p = g_n * n_p * eps_nu + self.g * eps_nu_p
            out.append(2.0 * np.real(np.conj(r_p) * r_nu + np.conj(self.r) * r_nu_p))
        return tuple(out)


def reflectivity_curve(grid: FrequencyGrid, state: VaporState, components,
                       constants: TransitionConstants,
                       interface: OpticalInterface) -> np.ndarray:
    """Reflectivity R(nu) sampled on the grid."""
    chain = _Chain(grid.values, state, components, constants, interface, order=1)
    return chain.reflectivity


def _check_sampling(grid: FrequencyGrid, state: VaporState) -> None:
    if grid.max_spacing >= state.width / 10.0:
        warnings.warn(
            f"grid spacing {grid.max_spacing:.4g} GHz exceeds width/10 "
            f"({state.width / 10.0:.4g} GHz); the lineshape is undersampled",
            stacklevel=3)


def _lockin_thetas(samples: int):
    theta = 2.0 * np.pi * np.arange(samples) / samples
    return np.cos(theta)


def fm_values(frequencies, state: VaporState, components,
              constants: TransitionConstants, interface: OpticalInterface,
              modulation: ModulationSettings) -> np.ndarray:
    """FM signal values on a raw frequency array (GHz), no sampling check."""
    det = np.asarray(frequencies, dtype=float)
    if modulation.mode == DERIVATIVE_MODE:
        return _Chain(det, state, components, constants, interface, order=2).derivative()
    cos_t = _lockin_thetas(modulation.lockin_samples)
    acc = np.zeros_like(det)
    for c in cos_t:
        chain = _Chain(det + modulation.depth * c, state,
                       components, constants, interface, order=1)
        acc += chain.reflectivity * c
    return acc / modulation.lockin_samples


def fm_signal(grid: FrequencyGrid, state: VaporState, components,
              constants: TransitionConstants, interface: OpticalInterface,
              modulation: ModulationSettings) -> Spectrum:
    """FM spectrum on the grid.

    Analytic-derivative mode returns dR/dnu (per GHz); lock-in mode
    returns the first-harmonic coefficient of R under modulation, in
    reflectivity units.
    """
    _check_sampling(grid, state)
    values = fm_values(grid.values, state, components, constants, interface, modulation)
    units = "per_GHz" if modulation.mode == DERIVATIVE_MODE else "reflectivity"
    return Spectrum(grid.values.copy(), values,
                    metadata={"signal_units": units, "fm_mode": modulation.mode})


def fm_signal_with_gradient(frequencies, state: VaporState, components,
                            constants: TransitionConstants,
                            interface: OpticalInterface,
                            modulation: ModulationSettings):
    """FM signal values plus gradients w.r.t. (width, excitation, shift).

    Returns ``(values, grads)`` with ``grads`` a tuple of three arrays in
    :data:`PARAM_ORDER`; used for analytic Jacobians during fitting.
    """
    det = np.asarray(frequencies, dtype=float)
    if modulation.mode == DERIVATIVE_MODE:
        chain = _Chain(det, state, components, constants, interface, order=3)
        return chain.derivative(), chain.derivative_grad()
    cos_t = _lockin_thetas(modulation.lockin_samples)
    acc = np.zeros_like(det)
    acc_grad = [np.zeros_like(det) for _ in PARAM_ORDER]
    for c in cos_t:
        chain = _Chain(det + modulation.depth * c, state,
                       components, constants, interface, order=2)
        acc += chain.reflectivity * c
        for slot, grad in zip(acc_grad, chain.reflectivity_grad()):
            slot += grad * c
    inv = 1.0 / modulation.lockin_samples
    return acc * inv, tuple(g * inv for g in acc_grad)
