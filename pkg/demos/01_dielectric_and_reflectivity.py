"""Dielectric response and selective reflection of a dense Rb vapor.

Walks the first half of the model chain: the complex dielectric
coefficient of the vapor near the D2 line, the complex refractive index,
and the normal-incidence reflectivity at the window interface.  Shows
how density and pump-induced excitation reshape the resonance.

Run:  python demos/01_dielectric_and_reflectivity.py
Writes figures into demos/output/.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from selref import (
    FrequencyGrid,
    OpticalInterface,
    VaporState,
    default_rb_d2_components,
    dielectric_coefficient,
    rb_d2_constants,
    reflectivity,
)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

components = default_rb_d2_components()
constants = rb_d2_constants()
interface = OpticalInterface()          # garnet window, n_w = 1.82
grid = FrequencyGrid.linspace(-40.0, 40.0, 2001)

print("Rb D2 components (offsets relative to the 85Rb centroid):")
for c in components:
    print(f"  {c.label:8s}  {c.center_offset:+8.4f} GHz   strength {c.relative_strength:.4f}")
print(f"coupling constant k = f*c*r_e*lambda = {constants.coupling:.4e} m^3/s")

# the unpumped vapor at the highest density of interest
state = VaporState(density=1.3e17, width=13.0, shift=-1.0, excitation=1.0)
eps = dielectric_coefficient(grid, state, components, constants)
print(f"\nN = {state.density:.2e} cm^-3, width = {state.width} GHz:")
print(f"  max |eps - 1| = {np.abs(eps - 1).max():.3f}  (strongly non-perturbative)")

fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
axes[0].plot(grid.values, eps.real - 1.0, label="Re(eps) - 1")
axes[0].plot(grid.values, eps.imag, label="Im(eps)")
axes[0].set_ylabel("susceptibility")
axes[0].legend()

# reflectivity for a few excitation factors: pumping (smaller eta) both
# weakens and narrows the selective-reflection feature
for eta, width in ((1.0, 13.0), (0.65, 8.9), (0.36, 5.1)):
    st = VaporState(density=1.3e17, width=width, shift=-1.0, excitation=eta)
    r = reflectivity(dielectric_coefficient(grid, st, components, constants),
                     interface)
    axes[1].plot(grid.values, r, label=f"eta = {eta}, width = {width} GHz")
vacuum = ((interface.window_index - 1.0) / (interface.window_index + 1.0)) ** 2
axes[1].axhline(vacuum, color="gray", lw=0.8, ls="--", label="bare window")
axes[1].set_xlabel("detuning (GHz)")
axes[1].set_ylabel("reflectivity")
axes[1].legend(fontsize=8)
fig.tight_layout()
fig.savefig(OUT / "dielectric_and_reflectivity.png", dpi=130)
print(f"\nfigure: {OUT / 'dielectric_and_reflectivity.png'}")
