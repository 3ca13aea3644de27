"""Fixed-step RK4 inner loop over the real Hermitian coordinates.

The equation of motion in the 16-dimensional real basis is

    dx/dt = (M + s(x) * C) @ x,      s(x) = x[2] + x[3] - x[0] - x[1],

where M is the linear generator (free Hamiltonian, drive at the current
phase, dissipator) and C the mean-field commutator superoperator scaled
by the angular interaction strength.  The mean field is re-evaluated at
every RK4 stage.

Compiled with numba when available; the pure-Python fallback is
semantically identical but far too slow for production horizons.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap

STATUS_OK = 0
STATUS_NONFINITE = 1

N = 16


@njit(cache=True)
def _rhs_into(m, c, s, x, out):
    for i in range(N):
        acc = 0.0
        for j in range(N):
            acc += (m[i, j] + s * c[i, j]) * x[j]
        out[i] = acc


@njit(cache=True)
def run_segment(x, m, c, dt, n_steps, step_offset, renorm_interval,
                record_stride, out, rec_count):
    """Advance ``n_steps`` RK4 steps, recording decimated states into ``out``.

    ``step_offset`` is the global step index of the segment start so that
    recording and renormalization cadences stay aligned across drive-phase
    segments.  Returns (status, new_rec_count, steps_done).
    """
    k1 = np.empty(N)
    k2 = np.empty(N)
    k3 = np.empty(N)
    k4 = np.empty(N)
    tmp = np.empty(N)
    for step in range(n_steps):
        s = x[2] + x[3] - x[0] - x[1]
        _rhs_into(m, c, s, x, k1)
        for i in range(N):
            tmp[i] = x[i] + 0.5 * dt * k1[i]
        s = tmp[2] + tmp[3] - tmp[0] - tmp[1]
        _rhs_into(m, c, s, tmp, k2)
        for i in range(N):
            tmp[i] = x[i] + 0.5 * dt * k2[i]
        s = tmp[2] + tmp[3] - tmp[0] - tmp[1]
        _rhs_into(m, c, s, tmp, k3)
        for i in range(N):
            tmp[i] = x[i] + dt * k3[i]
        s = tmp[2] + tmp[3] - tmp[0] - tmp[1]
        _rhs_into(m, c, s, tmp, k4)
        for i in range(N):
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        g = step_offset + step + 1
        if g % renorm_interval == 0:
            tr = x[0] + x[1] + x[2] + x[3]
            if not np.isfinite(tr) or tr == 0.0:
                return STATUS_NONFINITE, rec_count, step + 1
            inv = 1.0 / tr
            for i in range(N):
                x[i] *= inv
        if g % record_stride == 0:
            ok = True
            for i in range(N):
                if not np.isfinite(x[i]):
                    ok = False
                    break
            if not ok:
                return STATUS_NONFINITE, rec_count, step + 1
            out[rec_count, :] = x
            rec_count += 1
    return STATUS_OK, rec_count, n_steps


@njit(cache=True)
def rk4_single_step(x, m, c, dt):
    """One RK4 step in the real basis (no hygiene, no recording)."""
    k1 = np.empty(N)
    k2 = np.empty(N)
    k3 = np.empty(N)
    k4 = np.empty(N)
    tmp = np.empty(N)
    s = x[2] + x[3] - x[0] - x[1]
    _rhs_into(m, c, s, x, k1)
    for i in range(N):
        tmp[i] = x[i] + 0.5 * dt * k1[i]
    s = tmp[2] + tmp[3] - tmp[0] - tmp[1]
    _rhs_into(m, c, s, tmp, k2)
    for i in range(N):
        tmp[i] = x[i] + 0.5 * dt * k2[i]
    s = tmp[2] + tmp[3] - tmp[0] - tmp[1]
    _rhs_into(m, c, s, tmp, k3)
    for i in range(N):
        tmp[i] = x[i] + dt * k3[i]
    s = tmp[2] + tmp[3] - tmp[0] - tmp[1]
    _rhs_into(m, c, s, tmp, k4)
    out = np.empty(N)
    for i in range(N):
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return out
