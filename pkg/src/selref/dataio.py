"""File formats: spectra, manifests, configs, reports, plot data.

Everything on disk is plain text.  Spectrum files carry `# key: value`
metadata lines followed by `frequency_GHz,signal` rows; manifests list
the spectra of a dataset with their densities, pump labels, optional
truth excitations and noise seeds.  Floats are serialized with 17
significant digits, so parse(write(x)) reproduces x exactly.  All writes
go through a write-temp-then-rename step, leaving no truncated files
behind when a run is interrupted.
"""

from __future__ import annotations

import configparser
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lineshape import (
    SpectralLineComponent,
    TransitionConstants,
    default_rb_d2_components,
    load_components,
)
from .reflectance import (
    DERIVATIVE_MODE,
    LOCKIN_MODE,
    ModulationSettings,
    OpticalInterface,
    Spectrum,
)
from .synth import (
    DEFAULT_EXCITATIONS,
    DEFAULT_DENSITY_RANGE,
    DEFAULT_NORMALIZED_SLOPE,
    DEFAULT_REFERENCE_DENSITY,
    DEFAULT_SEED,
    DEFAULT_SHIFT_UNPUMPED,
    DEFAULT_WIDTH_UNPUMPED,
    AffineDensityLaw,
    CampaignDataset,
    CampaignSpec,
    NoiseModel,
)

__all__ = [
    "DataFormatError",
    "ConfigError",
    "ManifestRow",
    "atomic_write_text",
    "write_spectrum",
    "read_spectrum",
    "write_manifest",
    "read_manifest",
    "write_dataset",
    "write_columns",
    "CONFIG_DEFAULTS",
    "read_config",
    "default_config",
    "components_from_config",
    "constants_from_config",
    "interface_from_config",
    "modulation_from_config",
    "campaign_from_config",
    "MANIFEST_MARKER",
]

MANIFEST_MARKER = "# selref manifest v1"
FIT_REPORT_MARKER = "# selref fit report v1"
ANALYSIS_REPORT_MARKER = "# selref analysis report v1"


class DataFormatError(ValueError):
    """A data file does not conform to its format."""


class ConfigError(ValueError):
    """A configuration file contains unknown or invalid entries."""


def fmt(value: float) -> str:
    """Serialize a float with enough digits for an exact round trip."""
    return f"{value:.17g}"


def atomic_write_text(path, text: str) -> None:
    """Write text to path via a temp file in the same directory + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


# ---------------------------------------------------------------------------
# spectrum files

def write_spectrum(path, spectrum: Spectrum) -> None:
    """Write `# key: value` metadata followed by frequency,signal rows."""
    lines = []
    for key, value in spectrum.metadata.items():
        key, value = str(key), str(value)
        if (":" in key or "\n" in key or key != key.strip()
                or "\n" in value or value != value.strip()):
            raise DataFormatError(f"metadata entry {key!r} is not serializable")
        lines.append(f"# {key}: {value}")
    lines.append("# columns frequency_GHz,signal")
    for f, s in zip(spectrum.frequency, spectrum.signal):
        lines.append(f"{fmt(f)},{fmt(s)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_spectrum(path) -> Spectrum:
    """Parse a spectrum file; raises DataFormatError with line numbers."""
    metadata = {}
    freqs, sigs = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, value = body.split(":", 1)
                    metadata[key.strip()] = value.strip()
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataFormatError(
                    f"{path} line {lineno}: expected `frequency,signal`, got {line!r}")
            try:
                freqs.append(float(parts[0]))
                sigs.append(float(parts[1]))
            except ValueError:
                raise DataFormatError(
                    f"{path} line {lineno}: non-numeric value in {line!r}") from None
    if len(freqs) < 2:
        raise DataFormatError(f"{path}: fewer than 2 data rows")
    try:
        return Spectrum(np.array(freqs), np.array(sigs), metadata)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# manifests

@dataclass(frozen=True)
class ManifestRow:
    """One dataset entry: spectrum path (relative to the manifest),
    density in cm^-3, pump label, optional truth excitation and seed."""

    path: str
    density: float
    pump_label: str
    eta_truth: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if not self.density > 0.0:
            raise ValueError(f"density must be > 0, got {self.density}")
        if self.eta_truth is not None and not 0.0 <= self.eta_truth <= 1.0:
            raise ValueError(f"eta_truth must be in [0, 1], got {self.eta_truth}")


def write_manifest(path, rows) -> None:
    lines = [MANIFEST_MARKER,
             "# columns spectrum_path,density_cm3,pump_label,eta_truth,seed"]
    for row in rows:
        eta = "" if row.eta_truth is None else fmt(row.eta_truth)
        seed = "" if row.seed is None else str(row.seed)
        lines.append(f"{row.path},{fmt(row.density)},{row.pump_label},{eta},{seed}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_manifest(path, check_paths: bool = True) -> list[ManifestRow]:
    """Parse a manifest; with check_paths, verify every spectrum exists."""
    path = Path(path)
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise DataFormatError(
                    f"{path} line {lineno}: expected 5 comma-separated fields, got {len(parts)}")
            spath, density_s, label, eta_s, seed_s = (p.strip() for p in parts)
            try:
                density = float(density_s)
                eta = float(eta_s) if eta_s else None
                seed = int(seed_s) if seed_s else None
                rows.append(ManifestRow(path=spath, density=density,
                                        pump_label=label, eta_truth=eta, seed=seed))
            except ValueError as exc:
                raise DataFormatError(f"{path} line {lineno}: {exc}") from None
    if not rows:
        raise DataFormatError(f"{path}: no manifest rows")
    if check_paths:
        for row in rows:
            target = path.parent / row.path
            if not target.is_file():
                raise DataFormatError(f"{path}: referenced spectrum missing: {row.path}")
    return rows


def is_manifest(path) -> bool:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.readline().strip() == MANIFEST_MARKER
    except OSError:
        return False


def write_dataset(dataset: CampaignDataset, out_dir) -> Path:
    """Write all cells plus manifest.csv under out_dir; returns the manifest path."""
    out = Path(out_dir)
    for cell in dataset.cells:
        write_spectrum(out / cell.path, cell.spectrum)
    rows = [ManifestRow(path=cell.path, density=cell.density,
                        pump_label=cell.pump_label, eta_truth=cell.excitation,
                        seed=cell.seed)
            for cell in dataset.cells]
    manifest = out / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest


def write_columns(path, comment_lines, column_names, columns) -> None:
    """Plain columnar plot-data file: `#` comments, a column-name comment,
    then comma-separated rows."""
    arrays = [np.asarray(c) for c in columns]
    n = arrays[0].size
    if any(a.size != n for a in arrays):
        raise ValueError("columns must have equal length")
    lines = [f"# {c}" for c in comment_lines]
    lines.append("# columns " + ",".join(column_names))
    for i in range(n):
        lines.append(",".join(_cell(a[i]) for a in arrays))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _cell(value) -> str:
    if isinstance(value, (str, np.str_)):
        return str(value)
    return fmt(float(value))


# ---------------------------------------------------------------------------
# configuration

def _default_densities() -> str:
    lo, hi = DEFAULT_DENSITY_RANGE
    return ", ".join(fmt(d) for d in np.linspace(lo, hi, 5))


CONFIG_DEFAULTS = {
    "transition": {
        "oscillator_strength": "0.7",
        "wavelength_nm": "780.241",
    },
    "components": {
        # "builtin" or a path to a component-table file
        "table": "builtin",
    },
    "interface": {
        "window_index": "1.82",
    },
    "modulation": {
        "mode": DERIVATIVE_MODE,
        "depth_ghz": "0.037",
        "lockin_samples": "256",
    },
    "grid": {
        "start_ghz": "-30",
        "stop_ghz": "30",
        "points": "3001",
    },
    "campaign": {
        "densities_cm3": _default_densities(),
        "excitations": ", ".join(fmt(e) for e in DEFAULT_EXCITATIONS),
        "width_unpumped_ghz": fmt(DEFAULT_WIDTH_UNPUMPED),
        "reference_density_cm3": fmt(DEFAULT_REFERENCE_DENSITY),
        "normalized_slope": fmt(DEFAULT_NORMALIZED_SLOPE),
        "shift_unpumped_ghz": fmt(DEFAULT_SHIFT_UNPUMPED),
    },
    "noise": {
        "kind": "additive-gaussian",
        "sigma": "0.01",
        "seed": str(DEFAULT_SEED),
    },
    "fit": {
        "jacobian": "analytic",
        "max_iterations": "200",
        "step_tol": "1e-8",
        "residual_tol": "1e-10",
        "damping_init": "1e-3",
        "share_scale_per_density": "yes",
    },
    "analysis": {
        # zero-pump width for normalization: line value (a+b) or raw point
        "gamma1_source": "line",
        "min_points_per_density": "3",
    },
}


def default_config() -> dict:
    return {section: dict(keys) for section, keys in CONFIG_DEFAULTS.items()}


def read_config(path=None) -> dict:
    """Parse an INI-style config, merged over the documented defaults.

    Unknown sections or keys are hard errors; with no path the defaults
    are returned as-is.  String values are converted by the consumers.
    """
    merged = default_config()
    if path is None:
        return merged
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    for section in parser.sections():
        if section not in merged:
            raise ConfigError(
                f"{path}: unknown section [{section}]; known: {sorted(merged)}")
        for key, value in parser.items(section):
            if key not in merged[section]:
                raise ConfigError(
                    f"{path}: unknown key {key!r} in [{section}]; "
                    f"known: {sorted(merged[section])}")
            merged[section][key] = value.strip()
    merged["__path__"] = {"path": str(path)}
    return merged


def _cfg_float(config, section, key) -> float:
    raw = config[section][key]
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None
    if not math.isfinite(value):
        raise ConfigError(f"[{section}] {key} = {raw!r} is not finite")
    return value


def _cfg_int(config, section, key) -> int:
    raw = config[section][key]
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not an integer") from None


def _cfg_bool(config, section, key) -> bool:
    raw = config[section][key].lower()
    if raw in ("yes", "true", "1", "on"):
        return True
    if raw in ("no", "false", "0", "off"):
        return False
    raise ConfigError(f"[{section}] {key} = {raw!r} is not yes/no")


def _cfg_floats(config, section, key) -> tuple:
    raw = config[section][key]
    try:
        return tuple(float(part) for part in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number list") from None


def components_from_config(config) -> list[SpectralLineComponent]:
    table = config["components"]["table"]
    if table == "builtin":
        return default_rb_d2_components()
    path = Path(table)
    if not path.is_absolute() and "__path__" in config:
        path = Path(config["__path__"]["path"]).parent / path
    try:
        return load_components(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"component table {table!r}: {exc}") from None


def constants_from_config(config) -> TransitionConstants:
    try:
        return TransitionConstants(
            oscillator_strength=_cfg_float(config, "transition", "oscillator_strength"),
            wavelength=_cfg_float(config, "transition", "wavelength_nm") * 1e-9)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def interface_from_config(config) -> OpticalInterface:
    try:
        return OpticalInterface(window_index=_cfg_float(config, "interface", "window_index"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def modulation_from_config(config) -> ModulationSettings:
    mode = config["modulation"]["mode"]
    if mode not in (DERIVATIVE_MODE, LOCKIN_MODE):
        raise ConfigError(
            f"[modulation] mode must be {DERIVATIVE_MODE!r} or {LOCKIN_MODE!r}, got {mode!r}")
    try:
        return ModulationSettings(
            mode=mode,
            depth=_cfg_float(config, "modulation", "depth_ghz"),
            lockin_samples=_cfg_int(config, "modulation", "lockin_samples"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def campaign_from_config(config, seed_override: int | None = None) -> CampaignSpec:
    """Build the campaign: width and shift laws proportional to density,
    anchored at the reference density."""
    ref = _cfg_float(config, "campaign", "reference_density_cm3")
    if not ref > 0.0:
        raise ConfigError("[campaign] reference_density_cm3 must be > 0")
    gamma1 = _cfg_float(config, "campaign", "width_unpumped_ghz")
    s = _cfg_float(config, "campaign", "normalized_slope")
    shift1 = _cfg_float(config, "campaign", "shift_unpumped_ghz")
    seed = seed_override if seed_override is not None else _cfg_int(config, "noise", "seed")
    try:
        noise = NoiseModel(kind=config["noise"]["kind"],
                           sigma=_cfg_float(config, "noise", "sigma"),
                           seed=seed)
        return CampaignSpec(
            densities=_cfg_floats(config, "campaign", "densities_cm3"),
            excitations=_cfg_floats(config, "campaign", "excitations"),
            static_width=AffineDensityLaw(0.0, s * gamma1 / ref),
            residual_width=AffineDensityLaw(0.0, (1.0 - s) * gamma1 / ref),
            shift=AffineDensityLaw(0.0, shift1 / ref),
            grid_start=_cfg_float(config, "grid", "start_ghz"),
            grid_stop=_cfg_float(config, "grid", "stop_ghz"),
            grid_points=_cfg_int(config, "grid", "points"),
            noise=noise)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
