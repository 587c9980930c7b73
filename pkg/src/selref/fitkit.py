"""Nonlinear least-squares fitting of FM spectra and linear regression.

The FM-spectrum model has five parameters:

    signal(nu) = scale * fm(nu; width, excitation, shift) + offset

``fit_fm_spectrum`` minimizes the sum of squared residuals with a damped
Gauss-Newton iteration (Levenberg-Marquardt damping on the scaled normal
equations: accepted steps shrink the damping, rejected trials grow it,
and an accepted step never increases the residual sum of squares).
Bounds are enforced by smooth internal transforms: ``width`` and
``scale`` are optimized as logarithms, ``excitation`` through a logistic
map onto (0, 1), ``shift`` and ``offset`` are unconstrained.  Any subset
of parameters can be held fixed at its initial value.

``linear_fit`` is the closed-form (optionally weighted) straight-line
regression used by the slope analysis, with the standard covariance of
the two coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lineshape import TransitionConstants, VaporState
from .reflectance import (
    ModulationSettings,
    OpticalInterface,
    Spectrum,
    fm_signal_with_gradient,
    fm_values,
)

__all__ = [
    "PARAM_NAMES",
    "FitError",
    "FitConfig",
    "FitResult",
    "LinearFitResult",
    "ModelContext",
    "residuals",
    "fit_fm_spectrum",
    "initial_guess",
    "linear_fit",
]

PARAM_NAMES = ("width", "excitation", "shift", "scale", "offset")

# per-parameter scale entering relative step sizes (convergence test and
# finite-difference steps): |p| + typical
TYPICAL_SCALE = {"width": 1.0, "excitation": 0.1, "shift": 1.0,
                 "scale": 1.0, "offset": 1.0}

# free excitation guesses are pulled into the open interval so the
# logistic transform starts at a finite point
_ETA_GUESS_CLIP = 1e-3
# per-component cap on a single Gauss-Newton step in transform space;
# keeps log/logistic coordinates from under- or overflowing in one jump
_MAX_INTERNAL_STEP = 15.0
_TINY = np.finfo(float).tiny


class FitError(RuntimeError):
    """Raised when a fit cannot be set up or the normal equations degenerate."""


@dataclass(frozen=True)
class FitConfig:
    """Initial guesses and iteration controls for the spectrum fit.

    ``fixed`` names parameters pinned to their guess value.  The damping
    factor starts at ``damping_init``; it is divided by
    ``damping_decrease`` after an accepted step and multiplied by
    ``damping_increase`` after a rejected one, within
    ``[damping_min, damping_max]``.  ``jacobian`` selects analytic
    derivatives or central finite differences with per-parameter step
    ``fd_step * (|p| + typical_scale)``.
    """

    width: float = 10.0
    excitation: float = 1.0
    shift: float = 0.0
    scale: float = 1.0
    offset: float = 0.0
    fixed: tuple = ()
    jacobian: str = "analytic"
    max_iterations: int = 200
    step_tol: float = 1e-8
    residual_tol: float = 1e-10
    damping_init: float = 1e-3
    damping_increase: float = 10.0
    damping_decrease: float = 10.0
    damping_min: float = 1e-14
    damping_max: float = 1e14
    fd_step: float = 1e-6

    def __post_init__(self):
        if not self.width > 0.0:
            raise ValueError(f"width guess must be > 0, got {self.width}")
        if not 0.0 <= self.excitation <= 1.0:
            raise ValueError(f"excitation guess must be in [0, 1], got {self.excitation}")
        if not self.scale > 0.0:
            raise ValueError(f"scale guess must be > 0, got {self.scale}")
        unknown = set(self.fixed) - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown fixed parameter(s): {sorted(unknown)}")
        if self.jacobian not in ("analytic", "finite-difference"):
            raise ValueError(f"jacobian must be analytic or finite-difference, got {self.jacobian!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("step_tol", "residual_tol", "damping_init", "damping_increase",
                     "damping_decrease", "damping_min", "damping_max", "fd_step"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0")

    def guesses(self) -> dict:
        return {name: float(getattr(self, name)) for name in PARAM_NAMES}


@dataclass(frozen=True)
class FitResult:
    """Estimates and one-sigma uncertainties (keys of :data:`PARAM_NAMES`),
    plus the residual sum of squares and iteration bookkeeping.

    ``rss_history`` lists the residual sum of squares at the start and
    after each accepted step; it is non-increasing by construction.
    """

    estimates: dict
    uncertainties: dict
    rss: float
    iterations: int
    converged: bool
    status: str
    rss_history: tuple = ()

    def __getitem__(self, name: str) -> float:
        return self.estimates[name]


@dataclass(frozen=True)
class LinearFitResult:
    """Coefficients of y = intercept + slope*x with their one-sigma
    uncertainties, the coefficient covariance, and the residual variance
    (chi-square per degree of freedom; 0 when there are no spare points)."""

    intercept: float
    slope: float
    intercept_sigma: float
    slope_sigma: float
    covariance: float
    residual_variance: float


@dataclass(frozen=True)
class ModelContext:
    """Everything the spectrum model needs besides the fitted parameters."""

    density: float
    components: tuple
    constants: TransitionConstants
    interface: OpticalInterface
    modulation: ModulationSettings

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.density > 0.0:
            raise ValueError(f"density must be > 0, got {self.density}")

    def state(self, width: float, excitation: float, shift: float) -> VaporState:
        return VaporState(density=self.density, width=width,
                          shift=shift, excitation=excitation)

    def model(self, frequencies, width: float, excitation: float,
              shift: float) -> np.ndarray:
        """Unit-scale FM model on a raw frequency array."""
        return fm_values(frequencies, self.state(width, excitation, shift),
                         self.components, self.constants, self.interface,
                         self.modulation)

    def model_with_gradient(self, frequencies, width: float, excitation: float,
                            shift: float):
        return fm_signal_with_gradient(
            frequencies, self.state(width, excitation, shift),
            self.components, self.constants, self.interface, self.modulation)


def residuals(params, data: Spectrum, context: ModelContext) -> np.ndarray:
    """Residual vector scale*model + offset - data for a parameter mapping."""
    missing = [n for n in PARAM_NAMES if n not in params]
    if missing:
        raise FitError(f"parameter set is missing {missing}")
    model = context.model(data.frequency, params["width"],
                          params["excitation"], params["shift"])
    return params["scale"] * model + params["offset"] - data.signal


# ---------------------------------------------------------------------------
# internal parameterization

def _to_internal(name: str, value: float) -> float:
    if name in ("width", "scale"):
        return math.log(value)
    if name == "excitation":
        v = min(max(value, _ETA_GUESS_CLIP), 1.0 - _ETA_GUESS_CLIP)
        return math.log(v / (1.0 - v))
    return value


def _from_internal(name: str, u: float) -> float:
    if name in ("width", "scale"):
        return math.exp(u)
    if name == "excitation":
        # numerically symmetric logistic
        if u >= 0.0:
            return 1.0 / (1.0 + math.exp(-u))
        e = math.exp(u)
        return e / (1.0 + e)
    return u


def _dp_du(name: str, p: float) -> float:
    if name in ("width", "scale"):
        return p
    if name == "excitation":
        return p * (1.0 - p)
    return 1.0


def _physical_jacobian(params: dict, data: Spectrum, context: ModelContext,
                       mode: str, fd_step: float):
    """Residual Jacobian w.r.t. all physical parameters, plus the model.

    Returns ``(jac, model)`` where ``jac`` has one column per entry of
    :data:`PARAM_NAMES`.  The analytic path differentiates the model
    chain exactly; the finite-difference path uses central differences
    with per-parameter steps (one-sided next to the positivity bounds).
    """
    y = data.signal
    freq = data.frequency
    if mode == "analytic":
        model, grads = context.model_with_gradient(
            freq, params["width"], params["excitation"], params["shift"])
        cols = {
            "width": params["scale"] * grads[0],
            "excitation": params["scale"] * grads[1],
            "shift": params["scale"] * grads[2],
            "scale": model,
            "offset": np.ones_like(y),
        }
        jac = np.column_stack([cols[n] for n in PARAM_NAMES])
        return jac, model

    def resid_at(p):
        m = context.model(freq, p["width"], p["excitation"], p["shift"])
        return p["scale"] * m + p["offset"] - y

    model = context.model(freq, params["width"], params["excitation"], params["shift"])
    base = params["scale"] * model + params["offset"] - y
    cols = []
    for name in PARAM_NAMES:
        p0 = params[name]
        h = fd_step * (abs(p0) + TYPICAL_SCALE[name])
        lo, hi = p0 - h, p0 + h
        if name in ("width", "scale") and lo <= 0.0:
            p_hi = dict(params, **{name: hi})
            cols.append((resid_at(p_hi) - base) / h)
            continue
        if name == "excitation":
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        p_lo = dict(params, **{name: lo})
        p_hi = dict(params, **{name: hi})
        cols.append((resid_at(p_hi) - resid_at(p_lo)) / (hi - lo))
    return np.column_stack(cols), model


def _relative_step(p_new: dict, p_old: dict, names) -> float:
    return max(abs(p_new[n] - p_old[n]) / (abs(p_old[n]) + TYPICAL_SCALE[n])
               for n in names)


def fit_fm_spectrum(data: Spectrum, config: FitConfig,
                    context: ModelContext) -> FitResult:
    """Fit the five-parameter FM model to a spectrum.

    Returns a local least-squares optimum; the iteration is fully
    deterministic for identical inputs.  Raises :class:`FitError` when
    the problem is under-determined or the normal equations are singular
    (advice: pin parameters via ``FitConfig.fixed``).  Running out of
    iterations is reported through ``converged=False``, not an exception.
    """
    free = [n for n in PARAM_NAMES if n not in config.fixed]
    if not free:
        raise FitError("all parameters are fixed; nothing to fit")
    needed = max(8, 5 * len(free))
    if len(data) < needed:
        raise FitError(
            f"need at least {needed} data points for {len(free)} free parameters, "
            f"got {len(data)}")

    params = config.guesses()
    u = np.array([_to_internal(n, params[n]) for n in free])
    # the clip applied inside the transform must be reflected in params
    for j, n in enumerate(free):
        params[n] = _from_internal(n, u[j])

    y = data.signal

    def evaluate(p):
        model = context.model(data.frequency, p["width"], p["excitation"], p["shift"])
        r = p["scale"] * model + p["offset"] - y
        return r, float(r @ r)

    def from_u(vec):
        p = config.guesses()
        for j, n in enumerate(free):
            p[n] = _from_internal(n, float(vec[j]))
        return p

    r, rss = evaluate(params)
    history = [rss]
    lam = config.damping_init
    converged = False
    status = f"not converged within {config.max_iterations} iterations"
    iterations = 0

    for _ in range(config.max_iterations):
        iterations += 1
        jac_phys, _ = _physical_jacobian(params, data, context,
                                         config.jacobian, config.fd_step)
        # a parameter whose transform has saturated at a bound (its
        # internal derivative underflowed to 0) can no longer move and is
        # dropped from this iteration's step
        dpdu = np.array([_dp_du(n, params[n]) for n in free])
        active = [j for j in range(len(free)) if dpdu[j] != 0.0]
        if not active:
            converged = True
            status = "converged: all free parameters pinned at their bounds"
            break
        jac = (jac_phys[:, [PARAM_NAMES.index(free[j]) for j in active]]
               * dpdu[active])
        hess = jac.T @ jac
        grad = jac.T @ r
        diag = np.diag(hess).copy()
        dead = [free[j] for k, j in enumerate(active) if diag[k] == 0.0]
        if dead:
            raise FitError(
                f"singular normal equations: no sensitivity to {dead}; "
                f"fix these parameters (FitConfig.fixed) or adjust guesses")

        accepted = False
        delta = np.zeros_like(u)
        p_try, r_try, rss_try = params, r, rss
        while True:
            try:
                step = np.linalg.solve(hess + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                raise FitError(
                    "singular normal equations; fix one or more parameters "
                    "(FitConfig.fixed) or rescale the data") from None
            if not np.all(np.isfinite(step)):
                raise FitError(
                    "non-finite Gauss-Newton step; fix one or more parameters "
                    "(FitConfig.fixed) or rescale the data")
            step = np.clip(step, -_MAX_INTERNAL_STEP, _MAX_INTERNAL_STEP)
            delta = np.zeros_like(u)
            delta[active] = step
            p_try = from_u(u + delta)
            r_try, rss_try = evaluate(p_try)
            if rss_try <= rss:
                accepted = True
                break
            lam *= config.damping_increase
            if lam > config.damping_max:
                break

        rel = _relative_step(p_try, params, free)
        if not accepted:
            # no damping level reduces the residual: numerical optimum
            converged = rel < config.step_tol
            status = ("converged: damping limit reached at a stationary point"
                      if converged else "stalled: damping limit reached without progress")
            break

        drop = rss - rss_try
        u = u + delta
        params, r, rss = p_try, r_try, rss_try
        history.append(rss)
        lam = max(lam / config.damping_decrease, config.damping_min)
        if rel < config.step_tol:
            converged = True
            status = "converged: relative parameter step below tolerance"
            break
        if drop <= config.residual_tol * max(history[-2], _TINY):
            converged = True
            status = "converged: relative residual change below tolerance"
            break

    sigmas = _uncertainties(params, free, data, context, config, rss)
    return FitResult(estimates=params, uncertainties=sigmas, rss=rss,
                     iterations=iterations, converged=converged, status=status,
                     rss_history=tuple(history))


def _uncertainties(params: dict, free, data: Spectrum, context: ModelContext,
                   config: FitConfig, rss: float) -> dict:
    """One-sigma errors: residual variance times the inverse normal matrix
    of the physical-parameter Jacobian at the optimum."""
    jac_phys, _ = _physical_jacobian(params, data, context,
                                     config.jacobian, config.fd_step)
    jac = jac_phys[:, [PARAM_NAMES.index(n) for n in free]]
    normal = jac.T @ jac
    dof = len(data) - len(free)
    resvar = rss / dof if dof > 0 else 0.0
    try:
        cov = resvar * np.linalg.inv(normal)
    except np.linalg.LinAlgError:
        cov = resvar * np.linalg.pinv(normal)
    sigmas = {name: 0.0 for name in PARAM_NAMES}
    for j, name in enumerate(free):
        sigmas[name] = float(math.sqrt(max(cov[j, j], 0.0)))
    return sigmas


def initial_guess(data: Spectrum, context: ModelContext) -> FitConfig:
    """Starting point from the data: width from the peak-to-trough
    separation of the FM signal, scale from the peak-to-peak amplitude
    against the unit-scale model, excitation 1 and shift 0."""
    sig = data.signal
    p2p = float(np.max(sig) - np.min(sig))
    if p2p <= 0.0:
        raise FitError("no spectral feature: signal is flat")
    width0 = abs(float(data.frequency[np.argmax(sig)] - data.frequency[np.argmin(sig)]))
    if width0 <= 0.0:
        raise FitError("no spectral feature: extrema coincide")
    model = context.model(data.frequency, width0, 1.0, 0.0)
    model_p2p = float(np.max(model) - np.min(model))
    if model_p2p <= 0.0:
        raise FitError("no spectral feature: model response is flat")
    scale0 = p2p / model_p2p
    offset0 = float(np.mean(sig)) - scale0 * float(np.mean(model))
    return FitConfig(width=width0, excitation=1.0, shift=0.0,
                     scale=scale0, offset=offset0)


def linear_fit(points, weights=None) -> LinearFitResult:
    """Weighted least-squares line y = a + b*x.

    ``points`` is a sequence of (x, y) pairs.  With ``weights`` (1/sigma^2)
    the coefficient covariance comes straight from the weight matrix;
    without weights it is scaled by the residual variance.  Sums run in
    the order given, so callers wanting reordering-invariant output must
    sort their points first.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise FitError("linear_fit needs at least two (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.unique(x).size < 2:
        raise FitError("linear fit is singular: all x values identical")
    if weights is None:
        w = np.ones_like(x)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != x.shape:
            raise FitError("weights must match the number of points")
        if not np.all(w > 0.0) or not np.all(np.isfinite(w)):
            raise FitError("weights must be finite and > 0")

    sw = float(np.sum(w))
    xbar = float(np.sum(w * x)) / sw
    ybar = float(np.sum(w * y)) / sw
    dx = x - xbar
    sxx = float(np.sum(w * dx * dx))
    if sxx <= 0.0:
        raise FitError("linear fit is singular: no x spread")
    slope = float(np.sum(w * dx * y)) / sxx
    intercept = ybar - slope * xbar

    resid = y - intercept - slope * x
    chi2 = float(np.sum(w * resid * resid))
    dof = pts.shape[0] - 2
    resvar = chi2 / dof if dof > 0 else 0.0

    var_slope = 1.0 / sxx
    var_intercept = 1.0 / sw + xbar * xbar / sxx
    cov = -xbar / sxx
    if weights is None:
        var_slope *= resvar
        var_intercept *= resvar
        cov *= resvar
    return LinearFitResult(intercept=intercept, slope=slope,
                           intercept_sigma=math.sqrt(max(var_intercept, 0.0)),
                           slope_sigma=math.sqrt(max(var_slope, 0.0)),
                           covariance=cov,
                           residual_variance=resvar)
