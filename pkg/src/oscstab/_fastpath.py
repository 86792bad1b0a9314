"""Compiled trajectory kernels for the ten-state case-study closed loop.

Everything here mirrors the generic stepper in :mod:`oscstab.integrator`
exactly (same scheme, same step plan, same blow-up guard); it exists only to
make the long reproduction runs cheap.  Importing this module without numba
installed leaves ``HAVE_NUMBA`` false and the integrator silently keeps the
generic path.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def deco(f):
            return f
        return deco if not (args and callable(args[0])) else args[0]

BLOWUP_SQ = 1e12


@njit(cache=True)
def _rhs(x, xf, t, p, gamma, kw, gamma_amp, i_idx, j_idx, out):
    # control from the (possibly frozen) state xf, fields from x
    u = np.empty(4)
    u[0] = -xf[0]
    u[1] = -xf[1]
    u[2] = -xf[2]
    u[3] = -xf[3]
    for q in range(6):
        xc = xf[4 + q]
        s = 1.0 if xc > 0.0 else (-1.0 if xc < 0.0 else 0.0)
        vt = -0.5 * s * abs(xc) ** (2.0 * p - 1.0)
        vi = np.sqrt(abs(vt))
        vj = vi * (1.0 if vt > 0.0 else (-1.0 if vt < 0.0 else 0.0))
        th = kw[q] * t
        u[i_idx[q]] += gamma_amp[q] * vi * np.cos(th)
        u[j_idx[q]] += gamma_amp[q] * vj * np.sin(th)
    out[0] = u[0]
    out[1] = u[1]
    out[2] = u[2]
    out[3] = u[3]
    out[4] = x[0] * u[1] - x[1] * u[0]
    out[5] = x[0] * u[2] - x[2] * u[0]
    out[6] = x[0] * u[3] - x[3] * u[0]
    out[7] = x[1] * u[2] - x[2] * u[1]
    out[8] = x[1] * u[3] - x[3] * u[1]
    out[9] = x[2] * u[3] - x[3] * u[2]


@njit(cache=True)
def brockett_trajectory(x0, J, substeps, h, p, gamma, kw, gamma_amp,
                        i_idx, j_idx, sampled):
    K = J * substeps + 1
    xs = np.empty((K, 10))
    xs[0] = x0
    x = x0.copy()
    xf = x0.copy()
    k1 = np.empty(10)
    k2 = np.empty(10)
    k3 = np.empty(10)
    k4 = np.empty(10)
    xt = np.empty(10)
    for step in range(K - 1):
        if sampled and step % substeps == 0:
            for d in range(10):
                xf[d] = x[d]
        t = step * h
        _rhs(x, xf if sampled else x, t, p, gamma, kw, gamma_amp, i_idx, j_idx, k1)
        for d in range(10):
            xt[d] = x[d] + 0.5 * h * k1[d]
        _rhs(xt, xf if sampled else xt, t + 0.5 * h, p, gamma, kw, gamma_amp,
             i_idx, j_idx, k2)
        for d in range(10):
            xt[d] = x[d] + 0.5 * h * k2[d]
        _rhs(xt, xf if sampled else xt, t + 0.5 * h, p, gamma, kw, gamma_amp,
             i_idx, j_idx, k3)
        for d in range(10):
            xt[d] = x[d] + h * k3[d]
        _rhs(xt, xf if sampled else xt, t + h, p, gamma, kw, gamma_amp,
             i_idx, j_idx, k4)
        nrm = 0.0
        ok = True
        for d in range(10):
            x[d] = x[d] + (h / 6.0) * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d])
            nrm += x[d] * x[d]
            if not np.isfinite(x[d]):
                ok = False
        xs[step + 1] = x
        if not ok or nrm > BLOWUP_SQ:
            return xs, step + 2
    return xs, K
