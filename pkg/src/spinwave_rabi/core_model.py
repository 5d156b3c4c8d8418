"""Closed-form model of spin-wave-assisted photonic Rabi oscillation.

Physical picture: a strong "write" pulse drives Raman gain in an atomic
ensemble and builds a collective spin wave between two ground hyperfine
states.  A weak probe pulse sent in afterwards then exchanges photons with
the Stokes mode at the Rabi-like rate ``Omega = |eta * S|``, where ``S`` is
the classical spin-wave amplitude and ``eta`` the effective Raman coupling.

This module holds the static parameters and the analytic solutions of the
two quadratic regimes:

* write phase  -- two-mode-squeezing growth, ``|S|^2 = sinh^2(kappa * t)``
  with ``kappa = |eta * A_W|``, optionally capped by the atom number;
* conversion   -- beam-splitter rotation of the probe/Stokes pair by the
  mixing angle ``theta = Omega * t``.

Everything here is exact and cheap; the numerical engines in
:mod:`spinwave_rabi.meanfield` and :mod:`spinwave_rabi.gaussian` are tested
against these closed forms.

Units: time in microseconds, rates in rad/us, field amplitudes dimensionless
(photon-number normalized, i.e. |a|^2 counts photons).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

__all__ = [
    "PhysicalParams",
    "ResonanceSpec",
    "SpinWaveAmplitude",
    "RateSet",
    "SinglePhotonState",
    "coupling_eta",
    "write_gain_kappa",
    "spin_wave_from_write",
    "rabi_frequency",
    "conversion_closed_form",
    "single_photon_output",
    "mixing_angle_with_decay",
    "validate_resonance",
]


def coupling_eta(g_eg: float, g_em: float, delta: float) -> float:
    """Effective Raman coupling from the two one-photon couplings.

    ``eta = g_eg * g_em / delta`` with ``delta`` the common one-photon
    detuning from the excited level.  Raises ``ValueError`` on zero
    detuning (the adiabatic elimination behind this expression breaks
    down there).
    """
    if delta == 0.0:
        raise ValueError("one-photon detuning must be nonzero")
    return g_eg * g_em / delta


@dataclass(frozen=True)
class PhysicalParams:
    """Static physics of one run: couplings, detuning, atom number.

    ``eta`` may be given directly; when omitted it is derived as
    ``g_eg * g_em / delta``.
    """

    g_eg: float
    g_em: float
    delta: float
    n_atoms: float
    eta: Optional[float] = None

    def __post_init__(self):
        if self.delta == 0.0:
            raise ValueError("one-photon detuning must be nonzero")
        if not self.n_atoms > 0:
            raise ValueError("atom number must be positive")
        if self.eta is None:
            object.__setattr__(self, "eta", coupling_eta(self.g_eg, self.g_em, self.delta))


@dataclass(frozen=True)
class ResonanceSpec:
    """Angular frequencies of the probe, Stokes and hyperfine transitions."""

    omega_p: float
    omega_s: float
    omega_mg: float
    read_detuning: Optional[float] = None


def validate_resonance(spec: ResonanceSpec, tol: float) -> bool:
    """True iff the two-photon resonance |w_P - w_S - w_mg| <= tol holds."""
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    return abs(spec.omega_p - spec.omega_s - spec.omega_mg) <= tol


@dataclass(frozen=True)
class SpinWaveAmplitude:
    """Classical spin-wave amplitude; |value|^2 counts spin excitations."""

    value: complex

    @property
    def excitations(self) -> float:
        return abs(self.value) ** 2


@dataclass(frozen=True)
class RateSet:
    """Derived rates of a run: write gain, Rabi frequency, mixing angle."""

    kappa: float
    omega_rabi: float
    theta: float

    def __post_init__(self):
        for name in ("kappa", "omega_rabi", "theta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} is a magnitude and must be >= 0")


def write_gain_kappa(eta: float, a_w: complex) -> float:
    """Write-phase gain rate ``kappa = |eta * A_W|``."""
    return abs(eta * a_w)


def spin_wave_from_write(kappa: float, t_w: float, n_atoms: float) -> SpinWaveAmplitude:
    """Spin wave built by a write pulse of duration ``t_w``.

    Growth from vacuum gives ``|S|^2 = sinh^2(kappa * t_w)``; the ensemble
    cannot hold more excitations than atoms, so the magnitude is capped at
    ``sqrt(n_atoms)``.  The phase is fixed to zero (real positive) -- all
    downstream intensities are insensitive to it.
    """
    if t_w < 0:
        raise ValueError("write duration must be nonnegative")
    if not n_atoms > 0:
        raise ValueError("atom number must be positive")
    excitations = min(math.sinh(kappa * t_w) ** 2, n_atoms)
    return SpinWaveAmplitude(complex(math.sqrt(excitations), 0.0))


def rabi_frequency(eta: float, spin: SpinWaveAmplitude) -> float:
    """Conversion Rabi frequency ``Omega = |eta| * |S|``."""
    return abs(eta) * abs(spin.value)


def conversion_closed_form(a_p0: complex, a_s0: complex, theta: float) -> Tuple[complex, complex]:
    """Beam-splitter rotation of the probe/Stokes pair by angle ``theta``.

    Returns ``(a_p, a_s)`` with::

        a_s = a_s0 * cos(theta) + a_p0 * sin(theta)
        a_p = a_p0 * cos(theta) - a_s0 * sin(theta)

    The rotation conserves |a_p|^2 + |a_s|^2 exactly.
    """
    c, s = math.cos(theta), math.sin(theta)
    a_s = a_s0 * c + a_p0 * s
    a_p = a_p0 * c - a_s0 * s
    return a_p, a_s


@dataclass(frozen=True)
class SinglePhotonState:
    """Single photon shared between Stokes (c1) and probe (c2) modes."""

    c1: complex
    c2: complex

    def __post_init__(self):
        norm = abs(self.c1) ** 2 + abs(self.c2) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"amplitudes not normalized: |c1|^2+|c2|^2 = {norm!r}")


def single_photon_output(theta: float) -> SinglePhotonState:
    """Output state for a single input probe photon after mixing angle theta.

    The photon ends up in a coherent superposition of the two frequency
    modes, ``c1 = sin(theta)`` on Stokes and ``c2 = cos(theta)`` on probe,
    with the global phase fixed real-positive.  ``theta = pi/4`` gives the
    maximally entangled 50/50 superposition.
    """
    return SinglePhotonState(complex(math.sin(theta), 0.0), complex(math.cos(theta), 0.0))


def mixing_angle_with_decay(omega0: float, gamma_s: float, t: float) -> float:
    """Accumulated mixing angle when the Rabi frequency decays exponentially.

    With ``Omega(t) = omega0 * exp(-gamma_s * t)`` the angle integrates to
    ``theta(t) = (omega0 / gamma_s) * (1 - exp(-gamma_s * t))``, saturating
    at ``omega0 / gamma_s``.  For ``gamma_s * t < 1e-6`` the series
    ``omega0 * t * (1 - gamma_s * t / 2)`` is used to avoid 0/0.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if gamma_s < 0:
        raise ValueError("decay rate must be nonnegative")
    x = gamma_s * t
    if x < 1e-6:
        return omega0 * t * (1.0 - 0.5 * x)
    return (omega0 / gamma_s) * (1.0 - math.exp(-x))
