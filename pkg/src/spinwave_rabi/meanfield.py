"""Mean-field trilinear dynamics of probe, Stokes and spin-wave amplitudes.

Treating all three mode operators as c-numbers, the interaction gives the
coupled equations

    da_p/dt = -eta * a_s * s         - gamma_p    * a_p
    da_s/dt =  eta * a_p * conj(s)   - gamma_s    * a_s
    ds/dt   =  eta * a_p * conj(a_s) - gamma_spin * s

which reduce to the beam-splitter rotation when s is large and constant,
and to cosh/sinh gain when a_p is clamped to a strong write drive.  Unlike
the closed forms, the integrator captures pump depletion, spin depletion
and the atom-number cap.

Undamped invariants (used as integration sanity checks):

* conversion: i_p + i_s is conserved;
* write (clamped pump): i_s - i_spin is conserved.

Integration is fixed-step RK4, deterministic for identical inputs.  The
classical equations cannot grow from an exactly empty Stokes mode, so write
runs are seeded with a small Stokes amplitude; gain is meaningful relative
to that seed (the quantum treatment from true vacuum lives in
:mod:`spinwave_rabi.gaussian`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from . import _kernels
from .core_model import PhysicalParams, SpinWaveAmplitude

__all__ = [
    "FieldState",
    "DampingParams",
    "IntegratorConfig",
    "Trace",
    "IntegrationDivergedError",
    "derivatives",
    "integrate",
    "run_write_phase",
    "run_conversion_phase",
    "check_manley_rowe",
]


class IntegrationDivergedError(RuntimeError):
    """A non-finite amplitude appeared during integration."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"integration diverged at step {step}")


@dataclass(frozen=True)
class FieldState:
    """Complex amplitudes of the three modes at time t (us)."""

    a_p: complex
    a_s: complex
    s: complex
    t: float = 0.0

    def __post_init__(self):
        for name in ("a_p", "a_s", "s"):
            v = getattr(self, name)
            if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                raise ValueError(f"{name} must be finite")
        if self.t < 0:
            raise ValueError("time must be nonnegative")


@dataclass(frozen=True)
class DampingParams:
    """Phenomenological amplitude decay rates (1/us).

    ``gamma_spin_read`` applies to the spin during read-direction
    conversion; it must not be smaller than ``gamma_spin`` (the read
    process decays faster, being initiated from the less-populated state).
    """

    gamma_p: float = 0.0
    gamma_stokes: float = 0.0
    gamma_spin: float = 0.0
    gamma_spin_read: float = 0.0

    def __post_init__(self):
        for name in ("gamma_p", "gamma_stokes", "gamma_spin", "gamma_spin_read"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.gamma_spin_read < self.gamma_spin:
            raise ValueError("gamma_spin_read must be >= gamma_spin")


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 settings."""

    dt: float = 2e-4
    max_steps: int = 10_000_000
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class Trace:
    """Time series of mode intensities |a_p|^2, |a_s|^2, |s|^2."""

    times: np.ndarray
    i_p: np.ndarray
    i_s: np.ndarray
    i_spin: np.ndarray
    final_state: Optional[FieldState] = None

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.i_p) == len(self.i_s) == len(self.i_spin) == n):
            raise ValueError("trace arrays must have equal length")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    _CHANNELS = {"P": "i_p", "S": "i_s", "spin": "i_spin"}

    def channel(self, name: str) -> np.ndarray:
        """Intensity array for channel 'P', 'S' or 'spin'."""
        try:
            return getattr(self, self._CHANNELS[name])
        except KeyError:
            raise ValueError(f"unknown channel {name!r}; expected one of {sorted(self._CHANNELS)}") from None


def derivatives(
    state: FieldState,
    eta: float,
    damping: DampingParams,
    write_drive: Optional[complex] = None,
) -> Tuple[complex, complex, complex]:
    """Right-hand side (da_p/dt, da_s/dt, ds/dt) of the trilinear system.

    With ``write_drive`` set, a_p is clamped to the drive value: the probe
    slot contributes the drive amplitude to the other equations and its own
    derivative is zero (undepleted pump).
    """
    a_p = state.a_p if write_drive is None else complex(write_drive)
    d_as = eta * a_p * np.conj(state.s) - damping.gamma_stokes * state.a_s
    d_s = eta * a_p * np.conj(state.a_s) - damping.gamma_spin * state.s
    if write_drive is None:
        d_ap = -eta * state.a_s * state.s - damping.gamma_p * state.a_p
    else:
        d_ap = 0.0 + 0.0j
    return d_ap, d_as, d_s


def _plan_steps(duration: float, config: IntegratorConfig) -> Tuple[int, float]:
    """Split the window into n equal RK4 steps with step <= config.dt.

    n is rounded up to a multiple of record_every so the recorded time grid
    stays uniform (the fit stage requires that).
    """
    n_steps = int(np.ceil(duration / config.dt - 1e-12))
    n_steps = max(n_steps, 1)
    stride = config.record_every
    n_steps = ((n_steps + stride - 1) // stride) * stride
    if n_steps > config.max_steps:
        raise ValueError(
            f"window needs {n_steps} steps of dt <= {config.dt} but max_steps = {config.max_steps}"
        )
    return n_steps, duration / n_steps


def integrate(
    state0: FieldState,
    duration: float,
    eta: float,
    damping: DampingParams,
    config: IntegratorConfig,
    write_drive: Optional[complex] = None,
    *,
    clamp_spin: bool = False,
    atom_cap: Optional[float] = None,
) -> Trace:
    """Integrate the trilinear system over ``duration`` and record a trace.

    The step is ``duration / n`` with the smallest n making it <= config.dt,
    so the window is covered exactly.  ``atom_cap`` clamps |s|^2 to the
    given excitation number after every step.  The final FieldState is
    available as ``trace.final_state``.  Raises
    :class:`IntegrationDivergedError` if an amplitude becomes non-finite.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    n_steps, dt = _plan_steps(duration, config)

    a_p0 = complex(write_drive) if write_drive is not None else complex(state0.a_p)
    rate_scale = abs(eta) * max(abs(state0.s), abs(a_p0), abs(state0.a_s))
    if dt * rate_scale >= 0.1:
        warnings.warn(
            f"dt * max-rate = {dt * rate_scale:.3g} >= 0.1; RK4 accuracy degrades, reduce dt",
            stacklevel=2,
        )

    n_rec = _kernels.record_count(n_steps, config.record_every)
    out_steps = np.empty(n_rec, dtype=np.int64)
    out_ap = np.empty(n_rec, dtype=np.complex128)
    out_as = np.empty(n_rec, dtype=np.complex128)
    out_s = np.empty(n_rec, dtype=np.complex128)

    ap, as_, s, diverged = _kernels.rk4_trilinear(
        a_p0,
        complex(state0.a_s),
        complex(state0.s),
        float(eta),
        float(damping.gamma_p),
        float(damping.gamma_stokes),
        float(damping.gamma_spin),
        float(dt),
        n_steps,
        int(config.record_every),
        write_drive is not None,
        bool(clamp_spin),
        atom_cap is not None,
        float(atom_cap) if atom_cap is not None else 0.0,
        out_steps,
        out_ap,
        out_as,
        out_s,
    )
    if diverged >= 0:
        raise IntegrationDivergedError(int(diverged))

    times = state0.t + out_steps * dt
    final = FieldState(a_p=complex(ap), a_s=complex(as_), s=complex(s), t=state0.t + duration)
    return Trace(
        times=times,
        i_p=np.abs(out_ap) ** 2,
        i_s=np.abs(out_as) ** 2,
        i_spin=np.abs(out_s) ** 2,
        final_state=final,
    )


def run_write_phase(
    a_w: complex,
    t_w: float,
    params: PhysicalParams,
    damping: DampingParams,
    config: IntegratorConfig,
    *,
    stokes_seed: float = 1e-6,
    spin0: complex = 0.0,
    atom_cap: Optional[float] = None,
) -> Tuple[FieldState, Trace]:
    """Run the write phase: pump clamped to ``a_w``, Stokes seeded small.

    Starts from (a_p = a_w clamped, a_s = stokes_seed, s = spin0) and
    integrates for ``t_w``.  Undamped and with spin0 = 0 the spin grows to
    ``stokes_seed * sinh(kappa * t_w)``, i.e. the gain relative to the seed
    equals the quantum spin-wave magnitude built from vacuum.
    """
    if not t_w > 0:
        raise ValueError("write duration must be positive")
    state0 = FieldState(a_p=complex(a_w), a_s=complex(stokes_seed), s=complex(spin0))
    trace = integrate(
        state0,
        t_w,
        params.eta,
        damping,
        config,
        write_drive=complex(a_w),
        atom_cap=atom_cap,
    )
    return trace.final_state, trace


def run_conversion_phase(
    input_p: complex,
    input_s: complex,
    spin0: SpinWaveAmplitude,
    duration: float,
    params: PhysicalParams,
    damping: DampingParams,
    config: IntegratorConfig,
    mode: str = "probe",
    *,
    clamp_spin: bool = False,
    atom_cap: Optional[float] = None,
) -> Trace:
    """Run the conversion phase from injected fields and a pre-built spin wave.

    ``mode='probe'`` converts the injected probe toward Stokes with the spin
    decaying at gamma_spin; ``mode='read'`` is the reverse process (inject
    into the Stokes slot, the converted field appears in the probe slot) and
    the spin decays at the faster gamma_spin_read.
    """
    if mode not in ("probe", "read"):
        raise ValueError(f"mode must be 'probe' or 'read', got {mode!r}")
    if not duration > 0:
        raise ValueError("duration must be positive")
    eff = damping
    if mode == "read":
        eff = replace(damping, gamma_spin=damping.gamma_spin_read)
    state0 = FieldState(a_p=complex(input_p), a_s=complex(input_s), s=spin0.value)
    return integrate(
        state0,
        duration,
        params.eta,
        eff,
        config,
        clamp_spin=clamp_spin,
        atom_cap=atom_cap,
    )


def check_manley_rowe(trace: Trace, phase: str) -> float:
    """Max relative drift of the conserved combination for the given phase.

    ``phase='convert'`` checks i_p + i_s; ``phase='write'`` checks
    i_s - i_spin.  Meaningful for undamped runs, where RK4 holds the
    combination constant to ~1e-12 relative; damping makes it drift.
    """
    if phase == "convert":
        combo = trace.i_p + trace.i_s
    elif phase == "write":
        combo = trace.i_s - trace.i_spin
    else:
        raise ValueError(f"phase must be 'convert' or 'write', got {phase!r}")
    ref = abs(combo[0])
    if ref == 0.0:
        scale = float(np.max(trace.i_p + trace.i_s + trace.i_spin))
        if scale == 0.0:
            return 0.0
        ref = scale
    return float(np.max(np.abs(combo - combo[0])) / ref)
