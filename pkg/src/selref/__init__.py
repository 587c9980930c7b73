"""selref: selective-reflection FM spectra of a dense two-level vapor.

The package models the complex dielectric response of the vapor, the
Fresnel reflectivity at the cell window, and the FM (derivative or
lock-in first-harmonic) signal; fits measured or synthetic spectra for
the self-broadened width, excitation factor and line shift; and runs the
width-versus-excitation regression across densities down to the
density-normalized slope statistic.
"""

from .lineshape import (
    FrequencyGrid,
    SpectralLineComponent,
    TransitionConstants,
    VaporState,
    complex_refractive_index,
    default_rb_d2_components,
    dielectric_coefficient,
    load_components,
    rb_d2_constants,
    save_components,
)
from .reflectance import (
    DERIVATIVE_MODE,
    LOCKIN_MODE,
    ModulationSettings,
    OpticalInterface,
    Spectrum,
    fm_signal,
    fm_values,
    reflectivity,
    reflectivity_curve,
)
from .fitkit import (
    FitConfig,
    FitError,
    FitResult,
    LinearFitResult,
    ModelContext,
    fit_fm_spectrum,
    initial_guess,
    linear_fit,
    residuals,
)
from .analysis import (
    ExcitationSeries,
    NormalizedSlopeSummary,
    SlopeAnalysis,
    excitation_dependence,
    normalized_slope_aggregate,
    slope_vs_density,
)
from .synth import (
    AffineDensityLaw,
    CampaignDataset,
    CampaignSpec,
    NoiseModel,
    cell_seed,
    default_campaign,
    generate_campaign,
    generate_spectrum,
)
from .dataio import (
    ConfigError,
    DataFormatError,
    ManifestRow,
    read_config,
    read_manifest,
    read_spectrum,
    write_dataset,
    write_manifest,
    write_spectrum,
)

__version__ = "0.1.0"
