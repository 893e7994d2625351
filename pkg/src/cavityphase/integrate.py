"""Adaptive embedded Dormand-Prince 5(4) integrator for complex ODE systems.

Works on numpy arrays of any shape and dtype (complex included), integrates
forward or backward in time, and can emit the solution at prescribed sample
times by clamping step endpoints (sample spacing is always much larger than
the natural step here, so clamping costs nothing in accuracy).
"""

from __future__ import annotations

import numpy as np


class IntegrationError(RuntimeError):
    """Step-size underflow or step budget exhausted; carries the last good state."""

    def __init__(self, message, t=None, y=None):
        super().__init__(message)
        self.t = t
        self.y = y


# Dormand-Prince 5(4) tableau; the 5th-order weights propagate, the embedded
# 4th-order row provides the local error estimate.  First-same-as-last.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4

_A_ROWS = [np.array(row) for row in _A]
_E_NZ = np.nonzero(_E)[0]
_E_W = _E[_E_NZ]

_SAFETY = 0.9
_MIN_SHRINK = 0.2
_MAX_GROW = 5.0
_ORDER_EXP = 0.2  # 1 / (order of the error estimate + 1)


def _error_norm(err, y_old, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def _initial_step(f, t0, y0, direction, rtol, atol):
    f0 = f(t0, y0)
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean(np.abs(y0 / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    return direction * h, f0


def integrate_adaptive(f, t0, y0, t_end, rtol=1e-10, atol=1e-12,
                       sample_times=None, on_accept=None,
                       max_steps=50_000_000):
    """Integrate dy/dt = f(t, y) from t0 to t_end.

    sample_times: optional increasing (or decreasing, matching the
        integration direction) times at which the solution is recorded;
        steps are clamped to land on them exactly.
    on_accept: optional hook called as on_accept(t, y) after every accepted
        step; it may return a replacement state (used for chart restarts),
        or None to keep y.

    Returns (t_end, y_end, samples) where samples is the list of recorded
    states (None entries never occur) or None when sample_times is None.
    """
    y = np.array(y0, copy=True)
    t = float(t0)
    t_end = float(t_end)
    if t_end == t:
        if sample_times is not None:
            return t, y, [np.array(y, copy=True) for _ in sample_times]
        return t, y, None
    direction = 1.0 if t_end > t else -1.0

    pending = None
    samples = None
    sample_idx = 0
    if sample_times is not None:
        pending = [float(s) for s in sample_times]
        samples = [None] * len(pending)
        for s in pending:
            if direction * (s - t0) < -1e-12 or direction * (s - t_end) > 1e-12:
                raise ValueError("sample times must lie within [t0, t_end]")

    shape = y.shape
    y_flat = y.ravel()
    h, k1 = _initial_step(f, t, y, direction, rtol, atol)
    K = np.empty((7, y_flat.size), dtype=np.result_type(y_flat, k1))
    K[0] = k1.ravel()

    for _ in range(max_steps):
        # record any samples that coincide with the current time
        while pending is not None and sample_idx < len(pending) and \
                abs(pending[sample_idx] - t) <= 1e-12 * max(1.0, abs(t)):
            samples[sample_idx] = y_flat.reshape(shape).copy()
            sample_idx += 1
        if direction * (t - t_end) >= -1e-14 * max(1.0, abs(t_end)):
            break

        # clamp to the next stop (sample time or final time)
        stop = t_end
        if pending is not None and sample_idx < len(pending):
            stop = pending[sample_idx]
        if direction * (t + h - stop) > 0.0:
            h = stop - t
        if t + h == t:
            raise IntegrationError("step size underflow", t=t, y=y_flat.reshape(shape))

        for i in range(1, 7):
            yi = y_flat + (h * _A_ROWS[i]) @ K[:i]
            K[i] = f(t + _C[i] * h, yi.reshape(shape)).ravel()
        y_new = y_flat + (h * _A_ROWS[6]) @ K[:6]
        # stage 7 evaluates f at the step end (FSAL)
        K[6] = f(t + h, y_new.reshape(shape)).ravel()
        err_vec = (h * _E_W) @ K[_E_NZ]
        err = _error_norm(err_vec, y_flat, y_new, rtol, atol)

        if err <= 1.0:
            t = t + h
            y_flat = y_new
            K[0] = K[6]
            if on_accept is not None:
                replacement = on_accept(t, y_flat.reshape(shape))
                if replacement is not None:
                    y_flat = np.array(replacement, copy=True).ravel()
                    K[0] = f(t, y_flat.reshape(shape)).ravel()
            factor = _MAX_GROW if err == 0.0 else min(
                _MAX_GROW, max(_MIN_SHRINK, _SAFETY * err ** (-_ORDER_EXP)))
            h = h * factor
        else:
            h = h * max(_MIN_SHRINK, _SAFETY * err ** (-_ORDER_EXP))
    else:
        raise IntegrationError("step budget exhausted", t=t, y=y_flat.reshape(shape))
    y = y_flat.reshape(shape)

    while pending is not None and sample_idx < len(pending):
        if abs(pending[sample_idx] - t) <= 1e-9 * max(1.0, abs(t)):
            samples[sample_idx] = np.array(y, copy=True)
            sample_idx += 1
        else:
            raise IntegrationError(
                f"unreached sample time {pending[sample_idx]}", t=t, y=y)
    return t, y, samples
