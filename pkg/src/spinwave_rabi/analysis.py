"""Extraction of physics from intensity traces.

The observable of a conversion run is a damped oscillation of the two
photon channels.  The fit model used throughout is

    I(t) = A * exp(-Gamma * t) * sin^2(Omega * t + phi) + B

i.e. a single multiplicative exponential on a squared sinusoid with an
additive offset.  Note the frequency bookkeeping: the *intensity* completes
a period every pi/Omega (not 2*pi/Omega), so a spectral peak of the trace
at frequency f corresponds to Omega = pi * f.  That conversion is done in
exactly one place, :func:`initial_guess`.

Fitting is damped least squares (Levenberg-Marquardt) with the analytic
Jacobian; scaling laws are plain least-squares regressions on transformed
coordinates; pulse areas are trapezoidal integrals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .meanfield import Trace

__all__ = [
    "DampedRabiModel",
    "FitResult",
    "RegressionResult",
    "DegenerateFitError",
    "initial_guess",
    "fit_damped_rabi",
    "phase_difference",
    "scaling_regression",
    "loglog_slope",
    "pulse_area_efficiency",
    "peak_value",
]

PARAM_NAMES = ("amplitude", "omega", "gamma", "phi", "offset")


class DegenerateFitError(RuntimeError):
    """The normal matrix of the fit is singular (unidentifiable parameters)."""


@dataclass(frozen=True)
class DampedRabiModel:
    """Parameters of I(t) = A exp(-Gamma t) sin^2(Omega t + phi) + B."""

    amplitude: float
    omega: float
    gamma: float
    phi: float
    offset: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.omega < 0:
            raise ValueError("omega must be >= 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.amplitude * np.exp(-self.gamma * t) * np.sin(self.omega * t + self.phi) ** 2 + self.offset

    def as_array(self) -> np.ndarray:
        return np.array([self.amplitude, self.omega, self.gamma, self.phi, self.offset])


@dataclass(frozen=True)
class FitResult:
    """Fitted model plus linearized standard errors and convergence info."""

    model: DampedRabiModel
    param_uncertainties: Dict[str, float]
    residual_rms: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class RegressionResult:
    """Ordinary-least-squares line y = slope * x + intercept."""

    slope: float
    intercept: float
    r_squared: float
    n_points: int


def _uniform_times(trace: Trace, channel: str) -> Tuple[np.ndarray, np.ndarray]:
    t = np.asarray(trace.times, dtype=float)
    y = np.asarray(trace.channel(channel), dtype=float)
    if len(t) < 8:
        raise ValueError(f"need at least 8 samples on a uniform grid, got {len(t)}")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-6, atol=0.0):
        raise ValueError("trace must be on a uniform time grid")
    return t, y


def initial_guess(trace: Trace, channel: str) -> DampedRabiModel:
    """Starting parameters for the damped-oscillation fit.

    Omega comes from the dominant nonzero bin of the trace's discrete
    Fourier transform (with 3-point parabolic refinement), converted via
    Omega = pi * f_peak because the squared sinusoid oscillates at twice
    the field frequency.  A and B come from the trace extrema, Gamma from
    a log fit to the envelope of successive local maxima, phi is 0.
    """
    t, y = _uniform_times(trace, channel)
    dt = t[1] - t[0]
    span = float(y.max() - y.min())
    offset = float(y.min())
    if span <= 0.0 or span < 1e-12 * max(abs(y.max()), 1e-300):
        return DampedRabiModel(amplitude=0.0, omega=0.0, gamma=0.0, phi=0.0, offset=float(y.mean()))

    gamma = _envelope_decay_guess(t, y, offset)
    # Subtract the estimated envelope baseline before the FFT: the decaying
    # mean of the squared sinusoid otherwise swamps the spectral peak of
    # the oscillation itself at low frequencies.
    resid = y - (offset + 0.5 * span * np.exp(-gamma * (t - t[0])))
    spec = np.abs(np.fft.rfft(resid - resid.mean()))
    if len(spec) < 3 or not np.any(spec[1:] > 0):
        return DampedRabiModel(amplitude=span, omega=0.0, gamma=gamma, phi=0.0, offset=offset)
    k = 1 + int(np.argmax(spec[1:]))
    # parabolic interpolation of the peak bin against its neighbours
    if 1 <= k < len(spec) - 1:
        a, b, c = spec[k - 1], spec[k], spec[k + 1]
        denom = a - 2 * b + c
        shift = 0.0 if denom == 0 else 0.5 * (a - c) / denom
        shift = float(np.clip(shift, -0.5, 0.5))
    else:
        shift = 0.0
    f_peak = (k + shift) / (len(y) * dt)
    omega = math.pi * f_peak
    return DampedRabiModel(amplitude=span, omega=omega, gamma=gamma, phi=0.0, offset=offset)


def _envelope_decay_guess(t: np.ndarray, y: np.ndarray, offset: float) -> float:
    """Decay-rate guess from the envelope of successive local maxima."""
    interior = y[1:-1]
    is_max = (interior > y[:-2]) & (interior >= y[2:])
    idx = np.nonzero(is_max)[0] + 1
    if len(idx) < 2:
        return 0.0
    heights = y[idx] - offset
    # drop near-floor maxima: in noisy traces the tail extrema are noise
    keep = heights > 0.03 * heights.max()
    if keep.sum() < 2:
        return 0.0
    tm, hm = t[idx[keep]], np.log(heights[keep])
    slope = np.polyfit(tm, hm, 1)[0]
    return float(max(-slope, 0.0))


def _model_and_jacobian(p: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    amp, omega, gamma, phi, offset = p
    arg = omega * t + phi
    env = np.exp(-gamma * t)
    s2 = np.sin(arg) ** 2
    f = amp * env * s2 + offset
    jac = np.empty((len(t), 5))
    jac[:, 0] = env * s2
    double = amp * env * np.sin(2.0 * arg)
    jac[:, 1] = double * t
    jac[:, 2] = -t * amp * env * s2
    jac[:, 3] = double
    jac[:, 4] = 1.0
    return f, jac


def _levenberg_marquardt(
    t: np.ndarray,
    y: np.ndarray,
    p0: np.ndarray,
    max_iter: int = 200,
    cost_rtol: float = 1e-10,
    grad_tol: float = 1e-12,
) -> Tuple[np.ndarray, float, int, bool]:
    """Minimize the squared residual of the damped-oscillation model.

    Returns (params, cost, iterations, converged); on non-convergence the
    best parameters found so far are returned rather than raising.
    """
    p = p0.astype(float).copy()
    with np.errstate(over="ignore", invalid="ignore"):
        f, jac = _model_and_jacobian(p, t)
        r = y - f
        cost = float(r @ r)
        lam = 1e-3
        converged = False
        it = 0
        for it in range(1, max_iter + 1):
            g = jac.T @ r
            if np.linalg.norm(g) < grad_tol:
                converged = True
                break
            jtj = jac.T @ jac
            diag = np.diag(jtj).copy()
            diag[diag <= 0.0] = 1e-30
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                if lam > 1e12:
                    break
                continue
            p_try = p + step
            f_try, jac_try = _model_and_jacobian(p_try, t)
            r_try = y - f_try
            cost_try = float(r_try @ r_try)
            if np.isfinite(cost_try) and cost_try < cost:
                rel_change = (cost - cost_try) / max(cost, 1e-300)
                p, f, jac, r, cost = p_try, f_try, jac_try, r_try, cost_try
                lam = max(lam * 0.1, 1e-14)
                if rel_change < cost_rtol:
                    converged = True
                    break
            else:
                lam *= 10.0
                if lam > 1e12:
                    # stuck: no downhill direction at any damping
                    break
    return p, cost, it, converged


def _canonicalize(p: np.ndarray) -> np.ndarray:
    """Fold the exact model symmetries: Omega >= 0 and phi in [0, pi).

    sin^2 is even in its argument and pi-periodic, so flipping the sign of
    Omega (with phi -> -phi) and reducing phi modulo pi never change the
    fitted curve.
    """
    amp, omega, gamma, phi, offset = p
    if omega < 0:
        omega, phi = -omega, -phi
    phi = phi % math.pi
    return np.array([amp, omega, gamma, phi, offset])


def fit_damped_rabi(trace: Trace, channel: str, guess: DampedRabiModel) -> FitResult:
    """Fit the damped-oscillation model to one trace channel.

    Levenberg-Marquardt on the squared residuals, started from ``guess``
    and from the same parameters with the phase shifted by multiples of
    pi/4 (the unknown phase is the one parameter the initial guess cannot
    see); the best run wins.  Convergence means a relative cost change
    below 1e-10 or a gradient norm below 1e-12 within 200 iterations;
    otherwise the best-so-far parameters are returned with
    ``converged=False``.  Standard errors come from the inverse of the
    normal matrix scaled by the residual variance; a singular normal
    matrix raises :class:`DegenerateFitError`.
    """
    t, y = _uniform_times(trace, channel)
    p0 = guess.as_array()
    if not np.all(np.isfinite(p0)):
        raise ValueError("initial guess has non-finite parameters")
    n_params = len(p0)
    if len(t) < 5 * n_params:
        raise ValueError(f"need at least {5 * n_params} samples, got {len(t)}")

    best = None
    for dphi in (0.0, 0.25 * math.pi, 0.5 * math.pi, 0.75 * math.pi):
        start = p0.copy()
        start[3] = p0[3] + dphi
        p, cost, its, conv = _levenberg_marquardt(t, y, start)
        key = (not conv, cost)
        if best is None or key < best[0]:
            best = (key, p, cost, its, conv)
    _, p, cost, its, conv = best
    p = _canonicalize(p)

    if p[0] < 0.0 or p[2] < 0.0:
        # An inverted envelope or negative decay is outside the model's
        # domain.  Restart from the nearest in-domain point (the sign flip
        # of A maps onto a pi/2 phase shift at t = 0) and let the optimizer
        # polish from there.
        restart = p.copy()
        if restart[0] < 0.0:
            restart[0] = -restart[0]
            restart[3] += 0.5 * math.pi
            restart[4] -= restart[0]
        restart[2] = max(restart[2], 0.0)
        p, cost, its, conv = _levenberg_marquardt(t, y, restart)
        p = _canonicalize(p)
        if p[0] < 0.0 or p[2] < 0.0:
            p[0] = max(p[0], 0.0)
            p[2] = max(p[2], 0.0)
            conv = False
    f, jac = _model_and_jacobian(p, t)
    resid = y - f
    cost = float(resid @ resid)

    # Column-scale the normal matrix before inverting: the raw J^T J mixes
    # parameter units, so its conditioning says nothing about
    # identifiability.  Zero columns or a singular scaled matrix do.
    norms = np.linalg.norm(jac, axis=0)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        raise DegenerateFitError("normal matrix is singular; parameters unidentifiable")
    jac_scaled = jac / norms
    jtj_scaled = jac_scaled.T @ jac_scaled
    if np.linalg.cond(jtj_scaled) > 1e12:
        raise DegenerateFitError("normal matrix is numerically singular; parameters unidentifiable")
    dof = max(len(t) - n_params, 1)
    sigma2 = cost / dof
    cov = np.linalg.inv(jtj_scaled) / np.outer(norms, norms)
    stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None) * sigma2)

    model = DampedRabiModel(*p)
    uncertainties = dict(zip(PARAM_NAMES, (float(s) for s in stderr)))
    return FitResult(
        model=model,
        param_uncertainties=uncertainties,
        residual_rms=float(np.sqrt(cost / len(t))),
        iterations=its,
        converged=conv,
    )


def phase_difference(fit_p: FitResult, fit_s: FitResult) -> float:
    """Phase offset between two fitted channels, in the sin^2 argument.

    Reduced modulo pi (the model's exact period in phi) into [0, pi).
    Complementary channels (one peaks where the other dips) give pi/2.
    """
    if not (fit_p.converged and fit_s.converged):
        raise ValueError("phase difference requires two converged fits")
    return (fit_p.model.phi - fit_s.model.phi) % math.pi


def _ols(x: np.ndarray, y: np.ndarray) -> RegressionResult:
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise ValueError("zero variance in x; regression undefined")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((y - slope * x - intercept) ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RegressionResult(slope=slope, intercept=intercept, r_squared=max(min(r2, 1.0), 0.0), n_points=n)


def scaling_regression(points: Sequence[Tuple[float, float]]) -> RegressionResult:
    """Least-squares line through (sqrt(write power), log Omega) pairs.

    The caller supplies already-transformed coordinates; natural log is the
    package-wide convention for the gain scaling law.
    """
    if len(points) < 3:
        raise ValueError("need at least 3 points for the scaling regression")
    pts = np.asarray(points, dtype=float)
    return _ols(pts[:, 0], pts[:, 1])


def loglog_slope(points: Sequence[Tuple[float, float]]) -> RegressionResult:
    """Least-squares slope of log(output) against log(input power)."""
    if len(points) < 3:
        raise ValueError("need at least 3 points for the log-log slope")
    pts = np.asarray(points, dtype=float)
    if np.any(pts <= 0.0):
        raise ValueError("log-log regression needs strictly positive values")
    return _ols(np.log(pts[:, 0]), np.log(pts[:, 1]))


def pulse_area_efficiency(
    output_trace: Trace,
    output_channel: str,
    input_trace: Trace,
    input_channel: str,
) -> float:
    """Ratio of time-integrated output intensity to input intensity.

    Trapezoidal integration on each trace's own grid.  Values above 1 are
    possible only with gain and are flagged with a warning.
    """
    out_area = float(np.trapezoid(output_trace.channel(output_channel), output_trace.times))
    in_area = float(np.trapezoid(input_trace.channel(input_channel), input_trace.times))
    if in_area <= 0.0:
        raise ValueError("input pulse area must be positive")
    eff = out_area / in_area
    if eff > 1.0:
        warnings.warn(f"pulse-area efficiency {eff:.3f} exceeds 1: gain present", stacklevel=2)
    return eff


def peak_value(trace: Trace, channel: str) -> Tuple[float, float]:
    """Maximum sample of a channel and its time; ties go to the earliest."""
    if len(trace) == 0:
        raise ValueError("empty trace has no peak")
    y = trace.channel(channel)
    k = int(np.argmax(y))
    return float(y[k]), float(trace.times[k])
