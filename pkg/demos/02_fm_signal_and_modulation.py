"""FM spectra: exact derivative versus lock-in first harmonic.

The experiment dithers the probe frequency (depth m) and demodulates the
reflected power at the dither frequency.  For small m the lock-in output
is (m/2) * dR/dnu; at finite depth it picks up a measurable distortion.
This script compares both signal models and quantifies the distortion at
a 37 MHz depth.

Run:  python demos/02_fm_signal_and_modulation.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from selref import (
    DERIVATIVE_MODE,
    LOCKIN_MODE,
    FrequencyGrid,
    ModulationSettings,
    OpticalInterface,
    VaporState,
    default_rb_d2_components,
    fm_signal,
    fm_values,
    rb_d2_constants,
)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

components = default_rb_d2_components()
constants = rb_d2_constants()
interface = OpticalInterface()
grid = FrequencyGrid.linspace(-40.0, 40.0, 2001)
state = VaporState(density=1.3e17, width=13.0, shift=-1.0, excitation=1.0)

derivative = fm_signal(grid, state, components, constants, interface,
                       ModulationSettings(mode=DERIVATIVE_MODE))
print(f"derivative-mode signal units: {derivative.metadata['signal_units']}")

fig, axes = plt.subplots(2, 1, figsize=(7, 6))
axes[0].plot(grid.values, derivative.signal, label="dR/dnu")
axes[0].set_ylabel("FM signal (1/GHz)")
axes[0].set_xlabel("detuning (GHz)")
axes[0].legend()

# lock-in harmonic normalized by m/2 converges onto the derivative
mask = np.abs(derivative.signal) > 0.01 * np.abs(derivative.signal).max()
for depth in (5.0, 1.0, 0.037):
    lockin = fm_values(grid.values, state, components, constants, interface,
                       ModulationSettings(mode=LOCKIN_MODE, depth=depth))
    rescaled = lockin / (0.5 * depth)
    deviation = (np.max(np.abs(rescaled[mask] - derivative.signal[mask]))
                 / np.max(np.abs(derivative.signal[mask])))
    print(f"m = {depth*1000:7.1f} MHz: max deviation from dR/dnu = {deviation:.3e}")
    axes[1].plot(grid.values, rescaled, label=f"lock-in / (m/2), m = {depth} GHz")
axes[1].plot(grid.values, derivative.signal, "k--", lw=0.8, label="dR/dnu")
axes[1].set_xlabel("detuning (GHz)")
axes[1].set_ylabel("rescaled harmonic (1/GHz)")
axes[1].legend(fontsize=8)
fig.tight_layout()
fig.savefig(OUT / "fm_modulation_modes.png", dpi=130)
print(f"figure: {OUT / 'fm_modulation_modes.png'}")

# the experiment's 37 MHz depth distorts the lineshape at the few-ppm
# level for a 13 GHz wide line, far below a 1% noise floor
