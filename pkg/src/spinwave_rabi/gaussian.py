"""Exact Gaussian-state simulation of the quadratic regimes.

The write phase (two-mode squeezing of Stokes and spin from vacuum) and the
conversion phase (beam splitting of probe and Stokes) are both quadratic
Hamiltonians, so the full quantum evolution closes on Gaussian states:
a quadrature mean vector and covariance matrix per state.

Conventions: quadratures x = (a + a^dag)/sqrt(2), p = (a - a^dag)/(i sqrt(2)),
interleaved ordering (x1, p1, ..., xM, pM), vacuum covariance = I/2.
A covariance matrix is physical iff all its symplectic eigenvalues are
>= 1/2; every operation here is a Gaussian CP map and preserves that.

States are immutable values; operations return new states.  Modes are
addressed by label, 'P' (probe), 'S' (Stokes) and 'A' (atomic spin) in the
three-mode sequences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "GaussianState",
    "SymplecticMatrix",
    "SequenceResult",
    "vacuum_state",
    "displace",
    "apply_symplectic",
    "apply_beam_splitter",
    "apply_two_mode_squeezer",
    "apply_loss",
    "mean_photon_number",
    "symplectic_form",
    "symplectic_eigenvalues",
    "beam_splitter_symplectic",
    "two_mode_squeezer_symplectic",
    "simulate_full_sequence",
]


def symplectic_form(num_modes: int) -> np.ndarray:
    """Block-diagonal symplectic form J = diag([[0,1],[-1,0]], ...)."""
    j = np.zeros((2 * num_modes, 2 * num_modes))
    for k in range(num_modes):
        j[2 * k, 2 * k + 1] = 1.0
        j[2 * k + 1, 2 * k] = -1.0
    return j


@dataclass(frozen=True)
class GaussianState:
    """Quadrature means and covariance matrix of M bosonic modes."""

    mean: np.ndarray
    cov: np.ndarray
    mode_labels: Tuple[str, ...]

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).copy()
        cov = np.asarray(self.cov, dtype=float).copy()
        labels = tuple(self.mode_labels)
        m = len(labels)
        if mean.shape != (2 * m,):
            raise ValueError(f"mean must have shape ({2 * m},), got {mean.shape}")
        if cov.shape != (2 * m, 2 * m):
            raise ValueError(f"cov must have shape ({2 * m}, {2 * m}), got {cov.shape}")
        if len(set(labels)) != m:
            raise ValueError("mode labels must be unique")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise ValueError("covariance matrix must be symmetric (tol 1e-12)")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mode_labels", labels)

    @property
    def num_modes(self) -> int:
        return len(self.mode_labels)

    def mode_index(self, label: str) -> int:
        try:
            return self.mode_labels.index(label)
        except ValueError:
            raise ValueError(f"unknown mode label {label!r}; have {list(self.mode_labels)}") from None

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self.cov)

    def is_physical(self, tol: float = 1e-9) -> bool:
        """All symplectic eigenvalues >= 1/2 - tol (uncertainty principle)."""
        return bool(np.all(self.symplectic_eigenvalues() >= 0.5 - tol))


@dataclass(frozen=True)
class SymplecticMatrix:
    """Real linear mode transform; must satisfy m J m^T = J (tol 1e-10)."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).copy()
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 != 0:
            raise ValueError("symplectic matrix must be square with even dimension")
        j = symplectic_form(m.shape[0] // 2)
        if not np.allclose(m @ j @ m.T, j, rtol=0.0, atol=1e-10):
            raise ValueError("matrix does not satisfy the symplectic condition m J m^T = J")
        m.flags.writeable = False
        object.__setattr__(self, "m", m)


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic spectrum of a covariance matrix, ascending.

    Computed as the moduli of the eigenvalues of i J cov, which come in
    +/- pairs; one representative per pair is returned (M values).
    """
    cov = np.asarray(cov, dtype=float)
    num_modes = cov.shape[0] // 2
    j = symplectic_form(num_modes)
    vals = np.sort(np.abs(np.linalg.eigvals(1j * j @ cov)))
    return vals[::2].copy()


def vacuum_state(num_modes: int, labels: Optional[Sequence[str]] = None) -> GaussianState:
    """M-mode vacuum: zero mean, covariance I/2."""
    if num_modes < 1:
        raise ValueError("need at least one mode")
    if labels is None:
        labels = tuple(f"m{k}" for k in range(num_modes))
    return GaussianState(
        mean=np.zeros(2 * num_modes),
        cov=0.5 * np.eye(2 * num_modes),
        mode_labels=tuple(labels),
    )


def displace(state: GaussianState, mode: str, alpha: complex) -> GaussianState:
    """Displace one mode by alpha: injects a coherent amplitude.

    Shifts the mode's mean by (sqrt(2) Re alpha, sqrt(2) Im alpha); the
    covariance is untouched.  Displacements compose additively.
    """
    k = state.mode_index(mode)
    mean = state.mean.copy()
    mean[2 * k] += np.sqrt(2.0) * alpha.real
    mean[2 * k + 1] += np.sqrt(2.0) * alpha.imag
    return GaussianState(mean=mean, cov=state.cov, mode_labels=state.mode_labels)


def apply_symplectic(state: GaussianState, sym: SymplecticMatrix) -> GaussianState:
    """Apply a symplectic transform: mean -> S mean, cov -> S cov S^T."""
    m = sym.m
    if m.shape[0] != 2 * state.num_modes:
        raise ValueError("symplectic matrix dimension does not match state")
    cov = m @ state.cov @ m.T
    cov = 0.5 * (cov + cov.T)
    return GaussianState(mean=m @ state.mean, cov=cov, mode_labels=state.mode_labels)


def beam_splitter_symplectic(num_modes: int, i: int, j: int, theta: float) -> SymplecticMatrix:
    """Symplectic matrix rotating mode i toward mode j by angle theta.

    Implements a_i -> a_i cos(theta) + a_j sin(theta),
    a_j -> a_j cos(theta) - a_i sin(theta); both quadratures rotate alike
    because the coefficients are real.
    """
    if i == j:
        raise ValueError("beam splitter needs two distinct modes")
    c, s = np.cos(theta), np.sin(theta)
    m = np.eye(2 * num_modes)
    for q in (0, 1):  # x then p
        a, b = 2 * i + q, 2 * j + q
        m[a, a] = c
        m[a, b] = s
        m[b, b] = c
        m[b, a] = -s
    return SymplecticMatrix(m)


def two_mode_squeezer_symplectic(num_modes: int, i: int, j: int, r: float) -> SymplecticMatrix:
    """Symplectic matrix of two-mode squeezing with gain parameter r.

    Implements a_i -> a_i cosh(r) + a_j^dag sinh(r) and symmetrically for j;
    on quadratures: x_i -> x_i cosh r + x_j sinh r,
    p_i -> p_i cosh r - p_j sinh r.
    """
    if i == j:
        raise ValueError("two-mode squeezer needs two distinct modes")
    ch, sh = np.cosh(r), np.sinh(r)
    m = np.eye(2 * num_modes)
    xi, pi_, xj, pj = 2 * i, 2 * i + 1, 2 * j, 2 * j + 1
    m[xi, xi] = ch
    m[xi, xj] = sh
    m[pi_, pi_] = ch
    m[pi_, pj] = -sh
    m[xj, xj] = ch
    m[xj, xi] = sh
    m[pj, pj] = ch
    m[pj, pi_] = -sh
    return SymplecticMatrix(m)


def apply_beam_splitter(state: GaussianState, mode_i: str, mode_j: str, theta: float) -> GaussianState:
    """Beam-splitter rotation between two modes (photon-number conserving)."""
    i, j = state.mode_index(mode_i), state.mode_index(mode_j)
    if i == j:
        raise ValueError("beam splitter needs two distinct modes")
    return apply_symplectic(state, beam_splitter_symplectic(state.num_modes, i, j, theta))


def apply_two_mode_squeezer(state: GaussianState, mode_i: str, mode_j: str, r: float) -> GaussianState:
    """Two-mode squeezing of a mode pair (creates correlated excitation pairs)."""
    i, j = state.mode_index(mode_i), state.mode_index(mode_j)
    if i == j:
        raise ValueError("two-mode squeezer needs two distinct modes")
    return apply_symplectic(state, two_mode_squeezer_symplectic(state.num_modes, i, j, r))


def apply_loss(state: GaussianState, mode: str, transmissivity: float) -> GaussianState:
    """Pure-loss channel on one mode: mix with a vacuum environment.

    The mode's mean scales by sqrt(T), its covariance block by T plus
    (1 - T)/2 of vacuum on the diagonal, and every cross-covariance with
    other modes by sqrt(T).
    """
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError("transmissivity must be in [0, 1]")
    k = state.mode_index(mode)
    t = transmissivity
    rt = np.sqrt(t)
    sl = slice(2 * k, 2 * k + 2)

    mean = state.mean.copy()
    mean[sl] *= rt

    cov = state.cov.copy()
    cov[sl, :] *= rt
    cov[:, sl] *= rt  # block (sl, sl) now scaled by t overall
    cov[sl, sl] += (1.0 - t) * 0.5 * np.eye(2)
    return GaussianState(mean=mean, cov=cov, mode_labels=state.mode_labels)


def mean_photon_number(state: GaussianState, mode: str) -> float:
    """<n> of one mode: (var_x + var_p - 1)/2 + (mean_x^2 + mean_p^2)/2."""
    k = state.mode_index(mode)
    x, p = 2 * k, 2 * k + 1
    quad = 0.5 * (state.cov[x, x] + state.cov[p, p] - 1.0)
    coh = 0.5 * (state.mean[x] ** 2 + state.mean[p] ** 2)
    return float(quad + coh)


@dataclass(frozen=True)
class SequenceResult:
    """Per-mode photon numbers of a full write/delay/convert sequence.

    ``s1`` is the spontaneous write-phase Stokes population (before
    conversion), ``s2`` the Stokes population after conversion; ``state``
    is the final three-mode Gaussian state.
    """

    photon_numbers: Dict[str, float]
    s1: float
    s2: float
    state: GaussianState


def simulate_full_sequence(
    write_r: float,
    loss_spec: Optional[Dict[str, float]] = None,
    probe_alpha: complex = 0.0,
    conversion_theta: float = 0.0,
) -> SequenceResult:
    """Compose the full pulse sequence on the three-mode vacuum.

    Order: squeeze (S, A) by ``write_r`` (the write phase), apply the
    per-mode loss channels of ``loss_spec`` (the delay), displace P by
    ``probe_alpha`` (inject the probe), beam-split (S, P) by
    ``conversion_theta`` (the conversion), then report photon numbers.
    """
    state = vacuum_state(3, labels=("P", "S", "A"))
    state = apply_two_mode_squeezer(state, "S", "A", write_r)
    for mode, t in (loss_spec or {}).items():
        state = apply_loss(state, mode, t)
    s1 = mean_photon_number(state, "S")
    state = displace(state, "P", complex(probe_alpha))
    state = apply_beam_splitter(state, "S", "P", conversion_theta)
    numbers = {label: mean_photon_number(state, label) for label in state.mode_labels}
    return SequenceResult(photon_numbers=numbers, s1=s1, s2=numbers["S"], state=state)
