"""Jitted one-period propagator integration (optional numba fast path).

Same Dormand-Prince 5(4) pair and step controller as `integrate`, specialized
to the cavity coefficient ODE on (M, M) complex propagator matrices.  Falls
back cleanly when numba is unavailable; results agree with the generic path
to integrator tolerance (the two are cross-checked in the test suite).
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except Exception:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap


@njit(cache=True)
def _dp54_matrix_run(energies, eta_c, eps, w, sample_times, rtol, atol, max_steps):
    M = energies.shape[0]
    n_samp = sample_times.shape[0]
    t_end = sample_times[n_samp - 1]
    out = np.empty((n_samp, M, M), dtype=np.complex128)

    y = np.zeros((M, M), dtype=np.complex128)
    for i in range(M):
        y[i, i] = 1.0

    # Dormand-Prince 5(4) coefficients
    c2, c3, c4, c5 = 0.2, 0.3, 0.8, 8.0 / 9.0
    a21 = 0.2
    a31, a32 = 3.0 / 40.0, 9.0 / 40.0
    a41, a42, a43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
    a51, a52, a53, a54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
    a61, a62, a63, a64, a65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
    b1, b3, b4, b5, b6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
    e1 = 35.0 / 384.0 - 5179.0 / 57600.0
    e3 = 500.0 / 1113.0 - 7571.0 / 16695.0
    e4 = 125.0 / 192.0 - 393.0 / 640.0
    e5 = -2187.0 / 6784.0 + 92097.0 / 339200.0
    e6 = 11.0 / 84.0 - 187.0 / 2100.0
    e7 = -1.0 / 40.0

    def rhs(t, ym):
        s = 1.0 + eps * math.sin(w * t)
        a2 = 1.0 / (s * s)
        drive = eps * w * math.cos(w * t) / s
        res = drive * np.dot(eta_c, ym)
        for i in range(M):
            ci = -1j * (a2 * energies[i])
            for j in range(M):
                res[i, j] += ci * ym[i, j]
        return res

    t = 0.0
    k1 = rhs(t, y)
    # initial step from the local derivative scale
    d0 = 0.0
    d1 = 0.0
    for i in range(M):
        for j in range(M):
            sc = atol + rtol * abs(y[i, j])
            d0 += abs(y[i, j] / sc) ** 2
            d1 += abs(k1[i, j] / sc) ** 2
    d0 = math.sqrt(d0 / (M * M))
    d1 = math.sqrt(d1 / (M * M))
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1

    idx = 0
    n_inner = M * M
    for _ in range(max_steps):
        while idx < n_samp and abs(sample_times[idx] - t) <= 1e-12 * max(1.0, abs(t)):
            out[idx] = y
            idx += 1
        if t - t_end >= -1e-14 * max(1.0, abs(t_end)):
            break
        stop = t_end
        if idx < n_samp:
            stop = sample_times[idx]
        if t + h - stop > 0.0:
            h = stop - t
        if t + h == t:
            raise RuntimeError("step size underflow in propagator integration")

        k2 = rhs(t + c2 * h, y + (h * a21) * k1)
        k3 = rhs(t + c3 * h, y + h * (a31 * k1 + a32 * k2))
        k4 = rhs(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3))
        k5 = rhs(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4))
        k6 = rhs(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5))
        y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6)
        k7 = rhs(t + h, y_new)

        err_acc = 0.0
        for i in range(M):
            for j in range(M):
                ev = h * (e1 * k1[i, j] + e3 * k3[i, j] + e4 * k4[i, j]
                          + e5 * k5[i, j] + e6 * k6[i, j] + e7 * k7[i, j])
                ay = abs(y[i, j])
                an = abs(y_new[i, j])
                big = ay if ay > an else an
                sc = atol + rtol * big
                err_acc += (abs(ev) / sc) ** 2
        err = math.sqrt(err_acc / n_inner)

        if err <= 1.0:
            t = t + h
            y = y_new
            k1 = k7
            if err == 0.0:
                factor = 5.0
            else:
                factor = 0.9 * err ** -0.2
                if factor > 5.0:
                    factor = 5.0
                elif factor < 0.2:
                    factor = 0.2
            h = h * factor
        else:
            factor = 0.9 * err ** -0.2
            if factor < 0.2:
                factor = 0.2
            h = h * factor

    while idx < n_samp:
        if abs(sample_times[idx] - t) <= 1e-9 * max(1.0, abs(t)):
            out[idx] = y
            idx += 1
        else:
            raise RuntimeError("unreached sample time in propagator integration")
    return out


def propagator_samples(energies, eta, eps, omega, sample_times, rtol, atol,
                       max_steps=50_000_000):
    """Propagator U(t_s, 0) at each requested sample time (jitted when possible)."""
    result = _dp54_matrix_run(np.asarray(energies, dtype=np.float64),
                              np.asarray(eta, dtype=np.complex128),
                              float(eps), float(omega),
                              np.asarray(sample_times, dtype=np.float64),
                              float(rtol), float(atol), int(max_steps))
    return [result[i] for i in range(result.shape[0])]
