"""Hot integration kernel for the trilinear mean-field equations.

The fixed-step RK4 loop below dominates the runtime of every trace and
sweep, so it is compiled with numba's ``@njit`` by default.  Setting the
environment variable ``SPINWAVE_RABI_NO_NUMBA=1`` (or running without numba
installed) selects the interpreted pure-Python/numpy path instead -- same
source, same arithmetic, same results.  ``benchmarks/benchmark_kernels.py``
times the two paths against each other.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "SPINWAVE_RABI_NO_NUMBA"


def _numba_disabled() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


NUMBA_ENABLED = False
if not _numba_disabled():
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):
        """No-op stand-in so the kernel below stays a plain function."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorate(func):
            return func

        return decorate


@njit(cache=True)
def rk4_trilinear(
    a_p0,
    a_s0,
    s0,
    eta,
    gamma_p,
    gamma_s,
    gamma_spin,
    dt,
    n_steps,
    rec_stride,
    drive_on,
    clamp_spin,
    cap_on,
    cap_nsq,
    out_steps,
    out_ap,
    out_as,
    out_s,
):
    """Integrate the damped trilinear amplitude equations with fixed-step RK4.

    Equations of motion (complex amplitudes a_p, a_s, s):

        da_p/dt = -eta * a_s * s          - gamma_p    * a_p
        da_s/dt =  eta * a_p * conj(s)    - gamma_s    * a_s
        ds/dt   =  eta * a_p * conj(a_s)  - gamma_spin * s

    ``drive_on`` clamps a_p to its initial value (undepleted pump, da_p = 0);
    ``clamp_spin`` drops the back-action term of ds (undepleted spin: it
    still decays at gamma_spin but is not consumed by conversion);
    ``cap_on`` rescales s after each step so that |s|^2 <= cap_nsq.
    Samples are written into the ``out_*`` arrays every ``rec_stride``
    steps (step 0 and the final step always included).

    Returns ``(a_p, a_s, s, diverged_step)`` with ``diverged_step = -1`` on
    success, else the 1-based step index at which a non-finite value appeared.
    """
    ap = a_p0
    as_ = a_s0
    s = s0

    n_rec = out_ap.shape[0]
    rec = 0
    out_steps[rec] = 0
    out_ap[rec] = ap
    out_as[rec] = as_
    out_s[rec] = s
    rec += 1

    for i in range(1, n_steps + 1):
        # stage 1
        if drive_on:
            d1p = 0.0 + 0.0j
        else:
            d1p = -eta * as_ * s - gamma_p * ap
        d1s = eta * ap * np.conj(s) - gamma_s * as_
        if clamp_spin:
            d1a = -gamma_spin * s
        else:
            d1a = eta * ap * np.conj(as_) - gamma_spin * s

        # stage 2
        ap2 = ap + 0.5 * dt * d1p
        as2 = as_ + 0.5 * dt * d1s
        s2 = s + 0.5 * dt * d1a
        if drive_on:
            d2p = 0.0 + 0.0j
        else:
            d2p = -eta * as2 * s2 - gamma_p * ap2
        d2s = eta * ap2 * np.conj(s2) - gamma_s * as2
        if clamp_spin:
            d2a = -gamma_spin * s2
        else:
            d2a = eta * ap2 * np.conj(as2) - gamma_spin * s2

        # stage 3
        ap3 = ap + 0.5 * dt * d2p
        as3 = as_ + 0.5 * dt * d2s
        s3 = s + 0.5 * dt * d2a
        if drive_on:
            d3p = 0.0 + 0.0j
        else:
            d3p = -eta * as3 * s3 - gamma_p * ap3
        d3s = eta * ap3 * np.conj(s3) - gamma_s * as3
        if clamp_spin:
            d3a = -gamma_spin * s3
        else:
            d3a = eta * ap3 * np.conj(as3) - gamma_spin * s3

        # stage 4
        ap4 = ap + dt * d3p
        as4 = as_ + dt * d3s
        s4 = s + dt * d3a
        if drive_on:
            d4p = 0.0 + 0.0j
        else:
            d4p = -eta * as4 * s4 - gamma_p * ap4
        d4s = eta * ap4 * np.conj(s4) - gamma_s * as4
        if clamp_spin:
            d4a = -gamma_spin * s4
        else:
            d4a = eta * ap4 * np.conj(as4) - gamma_spin * s4

        sixth = dt / 6.0
        ap = ap + sixth * (d1p + 2.0 * d2p + 2.0 * d3p + d4p)
        as_ = as_ + sixth * (d1s + 2.0 * d2s + 2.0 * d3s + d4s)
        s = s + sixth * (d1a + 2.0 * d2a + 2.0 * d3a + d4a)

        if cap_on:
            nsq = s.real * s.real + s.imag * s.imag
            if nsq > cap_nsq:
                s = s * np.sqrt(cap_nsq / nsq)

        finite = (
            np.isfinite(ap.real)
            and np.isfinite(ap.imag)
            and np.isfinite(as_.real)
            and np.isfinite(as_.imag)
            and np.isfinite(s.real)
            and np.isfinite(s.imag)
        )
        if not finite:
            return ap, as_, s, i

        if (i % rec_stride == 0 or i == n_steps) and rec < n_rec:
            out_steps[rec] = i
            out_ap[rec] = ap
            out_as[rec] = as_
            out_s[rec] = s
            rec += 1

    return ap, as_, s, -1


def record_count(n_steps: int, rec_stride: int) -> int:
    """Number of samples the kernel writes for the given step/stride pair."""
    n = 1 + n_steps // rec_stride
    if n_steps % rec_stride != 0:
        n += 1
    return n


def pure_python_kernel():
    """The interpreted version of :func:`rk4_trilinear` (for benchmarks)."""
    return rk4_trilinear.py_func if NUMBA_ENABLED else rk4_trilinear
