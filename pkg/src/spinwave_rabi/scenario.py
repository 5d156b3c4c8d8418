"""Scenario execution: pulse sequences, power sweeps, result records.

A scenario walks the configured pulse sequence: optical pumping resets the
spin, the write pulse builds the spin wave (on the selected engine), the
delay decays it, and a probe or read pulse runs the conversion whose trace
is fitted and integrated.  The sweep drivers re-run the scenario across a
power list and feed the per-point results to the regression helpers.

Write-to-conversion handoff: the mean-field write integrates from a small
Stokes seed, and the spin-wave magnitude carried into the conversion is the
gain relative to that seed -- which, undamped, equals the quantum magnitude
sinh(kappa * t_w) grown from vacuum.  With pump depletion enabled the write
runs unclamped at absolute scale from a one-photon-equivalent seed instead.
The Gaussian engine hands off sqrt(<n_A>) of the squeezed spin mode.
"""

from __future__ import annotations

import concurrent.futures
import math
import warnings
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from . import gaussian as gsim
from .analysis import (
    DegenerateFitError,
    FitResult,
    RegressionResult,
    fit_damped_rabi,
    initial_guess,
    loglog_slope,
    peak_value,
    phase_difference,
    pulse_area_efficiency,
    scaling_regression,
)
from .config import ConfigError, PulseSegment, ScenarioConfig, config_to_dict
from .core_model import (
    RateSet,
    SpinWaveAmplitude,
    mixing_angle_with_decay,
    rabi_frequency,
    write_gain_kappa,
)
from .meanfield import (
    DampingParams,
    FieldState,
    IntegratorConfig,
    Trace,
    integrate,
    run_conversion_phase,
    run_write_phase,
)

__all__ = [
    "OutputRecord",
    "power_to_amplitude",
    "run_scenario",
    "sweep_write_power",
    "sweep_probe_power",
]


def power_to_amplitude(power_mw: float, calibration: float) -> complex:
    """Field amplitude from optical power: A = c * sqrt(P), real positive."""
    if power_mw < 0:
        raise ValueError("power must be nonnegative")
    if not calibration > 0:
        raise ValueError("power calibration must be positive")
    return complex(calibration * math.sqrt(power_mw), 0.0)


@dataclass
class OutputRecord:
    """Everything a scenario or sweep produced, ready for emission."""

    scenario_id: str
    traces: Dict[str, Trace] = field(default_factory=dict)
    fits: Dict[str, FitResult] = field(default_factory=dict)
    phase_differences: Dict[str, float] = field(default_factory=dict)
    peaks: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    regressions: Dict[str, RegressionResult] = field(default_factory=dict)
    sweep_points: List[dict] = field(default_factory=list)
    efficiency: Optional[float] = None
    efficiency_exceeds_unity: bool = False
    rates: Optional[RateSet] = None
    warnings: List[str] = field(default_factory=list)
    metadata: Dict[str, object] = field(default_factory=dict)


def _metadata(config: ScenarioConfig) -> Dict[str, object]:
    from ._kernels import NUMBA_ENABLED

    return {
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "kernel": "numba" if NUMBA_ENABLED else "python",
        "config": config_to_dict(config),
    }


def _direction(config: ScenarioConfig) -> str:
    for seg in config.sequence:
        if seg.kind in ("Probe", "Read"):
            return "probe" if seg.kind == "Probe" else "read"
    return "probe"


def _damped_write_gain(kappa: float, t_w: float, damping: DampingParams) -> float:
    """Closed-form gain of the clamped-pump write pair, with damping.

    The linearized write system has growth exponents
    -(g_s + g_a)/2 +/- sqrt(kappa^2 + ((g_s - g_a)/2)^2); starting from a
    unit Stokes seed the spin reaches (kappa/D) e^{-mean} sinh(D t).
    Used to size sweep windows; the integrator is the ground truth.
    """
    mean = 0.5 * (damping.gamma_stokes + damping.gamma_spin)
    diff = 0.5 * (damping.gamma_stokes - damping.gamma_spin)
    d = math.sqrt(kappa * kappa + diff * diff)
    if d == 0.0:
        return 0.0
    return (kappa / d) * math.exp(-mean * t_w) * math.sinh(d * t_w)


class _GaussianSequenceState:
    """Post-write three-mode state carried between gaussian-engine segments."""

    def __init__(self, state: gsim.GaussianState):
        self.state = state


def _run_write_meanfield(config, a_w, t_w, spin_before):
    """Write phase on the mean-field engine; returns (spin magnitude, trace)."""
    cap = config.params.n_atoms if config.atom_cap else None
    if config.depletion:
        # Absolute-scale, pump free to deplete: seed the Stokes mode with a
        # one-photon-equivalent amplitude so spontaneous growth has the
        # quantum magnitude.
        state0 = FieldState(a_p=complex(a_w), a_s=1.0 + 0.0j, s=complex(spin_before))
        trace = integrate(
            state0,
            t_w,
            config.params.eta,
            config.damping,
            config.integrator,
            atom_cap=cap,
        )
        return abs(trace.final_state.s), trace
    final, trace = run_write_phase(
        a_w,
        t_w,
        config.params,
        config.damping,
        config.integrator,
        stokes_seed=config.stokes_seed,
        spin0=0.0,
    )
    gain = abs(final.s) / config.stokes_seed
    magnitude_sq = gain * gain
    if spin_before != 0.0:
        # Coherent pre-write spin amplifies through the same pair; the
        # spontaneous part adds incoherently (in quadrature).
        coh0 = FieldState(a_p=complex(a_w), a_s=0.0j, s=complex(spin_before))
        coh = integrate(
            coh0,
            t_w,
            config.params.eta,
            config.damping,
            config.integrator,
            write_drive=complex(a_w),
        )
        magnitude_sq += abs(coh.final_state.s) ** 2
    if cap is not None:
        magnitude_sq = min(magnitude_sq, cap)
    return math.sqrt(magnitude_sq), trace


def _gaussian_write_trace(a_w, kappa, t_w, config, n_points=400):
    """Closed-form expectation trace of the gaussian write phase."""
    t = np.linspace(0.0, t_w, n_points)
    growth = np.sinh(np.minimum(kappa * t, 700.0)) ** 2
    if config.atom_cap:
        growth = np.minimum(growth, config.params.n_atoms)
    i_spin = growth * np.exp(-2.0 * config.damping.gamma_spin * t)
    i_s = growth * np.exp(-2.0 * config.damping.gamma_stokes * t)
    i_p = np.full_like(t, abs(a_w) ** 2)
    return Trace(times=t, i_p=i_p, i_s=i_s, i_spin=i_spin)


def _run_write_gaussian(config, a_w, t_w, spin_before):
    """Write phase on the gaussian engine; returns (carry state, spin, trace)."""
    kappa = write_gain_kappa(config.params.eta, a_w)
    r = kappa * t_w
    if config.atom_cap:
        r = min(r, math.asinh(math.sqrt(config.params.n_atoms)))
    state = gsim.vacuum_state(3, labels=("P", "S", "A"))
    if spin_before != 0.0:
        state = gsim.displace(state, "A", complex(spin_before))
    state = gsim.apply_two_mode_squeezer(state, "S", "A", r)
    # write-phase damping as post-hoc loss channels
    if config.damping.gamma_stokes > 0:
        state = gsim.apply_loss(state, "S", math.exp(-2.0 * config.damping.gamma_stokes * t_w))
    if config.damping.gamma_spin > 0:
        state = gsim.apply_loss(state, "A", math.exp(-2.0 * config.damping.gamma_spin * t_w))
    spin = math.sqrt(max(gsim.mean_photon_number(state, "A"), 0.0))
    return _GaussianSequenceState(state), spin, _gaussian_write_trace(a_w, kappa, t_w, config)


def _gaussian_conversion_trace(carry, config, a_in, duration, direction, gamma_spin_eff, omega):
    """Time-resolved conversion on the gaussian engine.

    For each sample time the post-write state is displaced by the injected
    amplitude, rotated by the decay-corrected mixing angle and sent through
    the per-mode loss channels; converted intensities are reported with the
    no-injection baseline subtracted (the spontaneous write-phase photons
    would otherwise bury the weak converted signal).
    """
    inject_mode = "P" if direction == "probe" else "S"
    n_points = max(int(duration / (config.integrator.dt * config.integrator.record_every)), 64)
    n_points = min(n_points, 4000)
    times = np.linspace(0.0, duration, n_points)
    base = gsim.displace(carry.state, inject_mode, complex(a_in))

    i_p = np.empty_like(times)
    i_s = np.empty_like(times)
    i_spin = np.empty_like(times)
    bg_p = np.empty_like(times)
    bg_s = np.empty_like(times)
    for k, t in enumerate(times):
        theta = mixing_angle_with_decay(omega, gamma_spin_eff, float(t))
        t_p = math.exp(-2.0 * config.damping.gamma_p * t)
        t_s = math.exp(-2.0 * config.damping.gamma_stokes * t)
        t_a = math.exp(-2.0 * gamma_spin_eff * t)
        for target, source in ((None, base), ("bg", carry.state)):
            st = gsim.apply_beam_splitter(source, "S", "P", theta)
            if t_p < 1.0:
                st = gsim.apply_loss(st, "P", t_p)
            if t_s < 1.0:
                st = gsim.apply_loss(st, "S", t_s)
            if t_a < 1.0:
                st = gsim.apply_loss(st, "A", t_a)
            if target is None:
                i_p[k] = gsim.mean_photon_number(st, "P")
                i_s[k] = gsim.mean_photon_number(st, "S")
                i_spin[k] = gsim.mean_photon_number(st, "A")
            else:
                bg_p[k] = gsim.mean_photon_number(st, "P")
                bg_s[k] = gsim.mean_photon_number(st, "S")
    return Trace(
        times=times,
        i_p=np.maximum(i_p - bg_p, 0.0),
        i_s=np.maximum(i_s - bg_s, 0.0),
        i_spin=i_spin,
    )


def run_scenario(config: ScenarioConfig) -> OutputRecord:
    """Execute the configured pulse sequence and analyze the results.

    Segments run in order; the spin-wave amplitude is the state carried
    between them.  Conversion traces are fitted (when output.fit) and the
    pulse-area efficiency against the injected reference is computed (when
    output.efficiency).
    """
    record = OutputRecord(scenario_id=config.scenario_id, metadata=_metadata(config))
    direction = _direction(config)
    if config.engine == "gaussian" and config.depletion:
        msg = "gaussian engine is linear; the depletion flag has no effect there"
        warnings.warn(msg)
        record.warnings.append(msg)

    spin = 0.0 + 0.0j
    gaussian_carry: Optional[_GaussianSequenceState] = None
    kappa = 0.0
    conversion_count = 0

    for index, seg in enumerate(config.sequence):
        try:
            if seg.kind == "OpticalPump":
                spin = complex(math.sqrt(seg.residual_m_fraction), 0.0) if direction == "read" else 0.0 + 0.0j
                gaussian_carry = None
            elif seg.kind == "Write":
                if not seg.duration_us > 0:
                    raise ConfigError("Write segment needs a positive duration")
                a_w = power_to_amplitude(seg.power_mw, config.power_calibration)
                kappa = write_gain_kappa(config.params.eta, a_w)
                if config.engine == "meanfield":
                    magnitude, trace = _run_write_meanfield(config, a_w, seg.duration_us, spin)
                    spin = complex(magnitude, 0.0)
                else:
                    gaussian_carry, magnitude, trace = _run_write_gaussian(
                        config, a_w, seg.duration_us, spin
                    )
                    spin = complex(magnitude, 0.0)
                if config.output.traces:
                    record.traces["write"] = trace
            elif seg.kind == "Delay":
                decay = math.exp(-config.damping.gamma_spin * seg.tau_us)
                spin *= decay
                if gaussian_carry is not None and seg.tau_us > 0:
                    gaussian_carry = _GaussianSequenceState(
                        gsim.apply_loss(gaussian_carry.state, "A", decay * decay)
                    )
            else:  # Probe or Read
                if not seg.duration_us > 0:
                    raise ConfigError(f"{seg.kind} segment needs a positive duration")
                conversion_count += 1
                name = seg.kind.lower() if conversion_count == 1 else f"{seg.kind.lower()}{conversion_count}"
                mode = "probe" if seg.kind == "Probe" else "read"
                gamma_spin_eff = (
                    config.damping.gamma_spin if mode == "probe" else config.damping.gamma_spin_read
                )
                a_in = power_to_amplitude(seg.power_mw, config.power_calibration)
                omega = rabi_frequency(config.params.eta, SpinWaveAmplitude(spin))
                if config.engine == "meanfield":
                    trace = run_conversion_phase(
                        a_in if mode == "probe" else 0.0,
                        a_in if mode == "read" else 0.0,
                        SpinWaveAmplitude(spin),
                        seg.duration_us,
                        config.params,
                        config.damping,
                        config.integrator,
                        mode=mode,
                        clamp_spin=not config.depletion,
                        atom_cap=config.params.n_atoms if config.atom_cap else None,
                    )
                else:
                    if gaussian_carry is None:
                        carry_state = gsim.vacuum_state(3, labels=("P", "S", "A"))
                        if spin != 0.0:
                            carry_state = gsim.displace(carry_state, "A", spin)
                        gaussian_carry = _GaussianSequenceState(carry_state)
                    trace = _gaussian_conversion_trace(
                        gaussian_carry, config, a_in, seg.duration_us, mode, gamma_spin_eff, omega
                    )
                if config.output.traces:
                    record.traces[name] = trace
                record.rates = RateSet(
                    kappa=kappa,
                    omega_rabi=omega,
                    theta=mixing_angle_with_decay(omega, gamma_spin_eff, seg.duration_us),
                )
                converted, injected = ("S", "P") if mode == "probe" else ("P", "S")
                record.peaks[name] = peak_value(trace, converted)
                if config.output.fit:
                    _fit_conversion(record, name, trace, converted, injected)
                if config.output.efficiency and seg.power_mw > 0:
                    reference = Trace(
                        times=trace.times,
                        i_p=np.full_like(trace.times, abs(a_in) ** 2),
                        i_s=np.full_like(trace.times, abs(a_in) ** 2),
                        i_spin=np.zeros_like(trace.times),
                    )
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        eff = pulse_area_efficiency(trace, converted, reference, injected)
                    record.efficiency = eff
                    record.efficiency_exceeds_unity = eff > 1.0
        except (ValueError, RuntimeError) as exc:
            raise type(exc)(f"sequence[{index}] ({seg.kind}): {exc}") from exc

    return record


def _fit_conversion(record: OutputRecord, name: str, trace: Trace, converted: str, injected: str) -> None:
    """Fit both channels of a conversion trace; tolerate degenerate ones."""
    for channel, label in ((converted, "converted"), (injected, "injected")):
        key = f"{name}_{label}"
        try:
            fit = fit_damped_rabi(trace, channel, initial_guess(trace, channel))
        except DegenerateFitError as exc:
            record.warnings.append(f"{key}: {exc}")
            continue
        record.fits[key] = fit
        if not fit.converged:
            record.warnings.append(f"{key}: fit did not converge")
    fit_c = record.fits.get(f"{name}_converted")
    fit_i = record.fits.get(f"{name}_injected")
    if fit_c is not None and fit_i is not None and fit_c.converged and fit_i.converged:
        record.phase_differences[name] = phase_difference(fit_i, fit_c)


def _segment_index(config: ScenarioConfig, kinds: Tuple[str, ...]) -> int:
    for i, seg in enumerate(config.sequence):
        if seg.kind in kinds:
            return i
    raise ConfigError(f"sequence has no segment of kind {kinds}")


def _point_config(config: ScenarioConfig, index: int, **seg_overrides) -> ScenarioConfig:
    sequence = list(config.sequence)
    sequence[index] = replace(sequence[index], **seg_overrides)
    return replace(config, sequence=tuple(sequence), output=replace(config.output, traces=False))


def _auto_window_config(config: ScenarioConfig, power_mw: float) -> ScenarioConfig:
    """Per-point window for the write sweep: size to the expected frequency."""
    widx = _segment_index(config, ("Write",))
    cidx = _segment_index(config, ("Probe", "Read"))
    write = config.sequence[widx]
    a_w = abs(power_to_amplitude(power_mw, config.power_calibration))
    kappa = write_gain_kappa(config.params.eta, a_w)
    gain = _damped_write_gain(kappa, write.duration_us, config.damping)
    if config.atom_cap:
        gain = min(gain, math.sqrt(config.params.n_atoms))
    omega_est = config.params.eta * max(gain, 1e-12)
    period = math.pi / omega_est
    duration = config.sweep.fit_periods * period
    dt = period / config.sweep.samples_per_period
    record_every = max(1, config.sweep.samples_per_period // 50)
    n_steps = int(math.ceil(duration / dt))
    integ = IntegratorConfig(dt=dt, max_steps=max(n_steps + 1, 1_000_000), record_every=record_every)
    point = _point_config(config, widx, power_mw=power_mw)
    sequence = list(point.sequence)
    sequence[cidx] = replace(sequence[cidx], duration_us=duration)
    return replace(point, sequence=tuple(sequence), integrator=integ)


def _run_points(config: ScenarioConfig, configs: List[ScenarioConfig]) -> List[OutputRecord]:
    if config.sweep.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.sweep.workers) as pool:
            return list(pool.map(run_scenario, configs))
    return [run_scenario(c) for c in configs]


def _check_powers(powers: Sequence[float]) -> List[float]:
    powers = [float(p) for p in powers]
    if len(powers) < 3:
        raise ConfigError("sweep needs at least 3 powers")
    if any(p <= 0 for p in powers):
        raise ConfigError("sweep powers must be positive")
    return powers


def sweep_write_power(config: ScenarioConfig, powers: Optional[Sequence[float]] = None) -> OutputRecord:
    """Vary the write power, fit the conversion frequency at each point, and
    regress log(Omega) against sqrt(power).

    Points with unconverged fits are flagged and excluded (at least 3 must
    survive).  Windows auto-scale with the expected frequency unless
    sweep.auto_window is off.
    """
    powers = _check_powers(powers if powers is not None else config.sweep.powers_mw)
    widx = _segment_index(config, ("Write",))
    point_configs = []
    for p in powers:
        if config.sweep.auto_window:
            point_configs.append(_auto_window_config(config, p))
        else:
            point_configs.append(_point_config(config, widx, power_mw=p))

    record = OutputRecord(scenario_id=f"{config.scenario_id}_write_sweep", metadata=_metadata(config))
    results = _run_points(config, point_configs)

    surviving: List[Tuple[float, float]] = []
    for p, res in sorted(zip(powers, results), key=lambda t: t[0]):
        fits = [v for k, v in res.fits.items() if k.endswith("_converted")]
        fit = fits[0] if fits else None
        row = {
            "power_mw": p,
            "sqrt_power": math.sqrt(p),
            "kappa": res.rates.kappa if res.rates else None,
            "omega_fit": fit.model.omega if fit else None,
            "gamma_fit": fit.model.gamma if fit else None,
            "converged": bool(fit.converged) if fit else False,
        }
        record.sweep_points.append(row)
        if fit is not None and fit.converged and fit.model.omega > 0:
            surviving.append((row["sqrt_power"], math.log(fit.model.omega)))
        else:
            msg = f"write sweep point {p} mW excluded: fit unavailable or unconverged"
            warnings.warn(msg)
            record.warnings.append(msg)
    if len(surviving) < 3:
        raise RuntimeError("fewer than 3 converged sweep points; cannot regress")
    reg = scaling_regression(surviving)
    record.regressions["write_power_scaling"] = reg
    for row in record.sweep_points:
        if row["omega_fit"] and row["omega_fit"] > 0:
            row["log_omega"] = math.log(row["omega_fit"])
            row["residual"] = row["log_omega"] - (reg.slope * row["sqrt_power"] + reg.intercept)
    return record


def sweep_probe_power(config: ScenarioConfig, powers: Optional[Sequence[float]] = None) -> OutputRecord:
    """Vary the injected probe power and regress the converted peak against
    it on log-log axes (unit slope in the linear-conversion regime)."""
    powers = _check_powers(powers if powers is not None else config.sweep.powers_mw)
    cidx = _segment_index(config, ("Probe", "Read"))
    point_configs = [_point_config(config, cidx, power_mw=p) for p in powers]

    record = OutputRecord(scenario_id=f"{config.scenario_id}_probe_sweep", metadata=_metadata(config))
    results = _run_points(config, point_configs)

    trace_name = config.sequence[cidx].kind.lower()
    pairs: List[Tuple[float, float]] = []
    for p, res in sorted(zip(powers, results), key=lambda t: t[0]):
        peak = res.peaks.get(trace_name)
        row = {
            "power_mw": p,
            "peak": peak[0] if peak else None,
            "peak_time": peak[1] if peak else None,
            "efficiency": res.efficiency,
        }
        record.sweep_points.append(row)
        if peak is not None and peak[0] > 0:
            pairs.append((p, peak[0]))
        else:
            msg = f"probe sweep point {p} mW excluded: no converted peak"
            warnings.warn(msg)
            record.warnings.append(msg)
    if len(pairs) < 3:
        raise RuntimeError("fewer than 3 usable sweep points; cannot regress")
    record.regressions["probe_power_loglog"] = loglog_slope(pairs)
    return record
