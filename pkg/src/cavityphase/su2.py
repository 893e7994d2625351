"""Exact two-level evolution via a product decomposition of the propagator.

The truncated generator G(t) (with da/dt = G a) is expanded over the identity,
the raising/lowering operators and sigma_3 as
    G = f0 I + f1 sigma_+ + f2 sigma_3 + f3 sigma_-,
and the propagator is parametrized by three auxiliary functions
    U(t, 0) = b e^{int f0} [[b^-2 + g1 g3, g1], [g3, 1]],   b = e^{-g2},
with  g1' = f1 + 2 f2 g1 - f3 g1^2  (Riccati),
      g2' = f2 - f3 g1,
      g3' = f3 e^{2 g2},    g_j(0) = 0.

The parametrization is a local chart: g1 diverges whenever the (2,2) element
of U passes through zero (population inversion).  Before that happens the
chart is restarted: the accumulated amplitudes are frozen and a fresh set of
g's continues from the restart time, composing the exact propagator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cavity import Basis, CavityConfig
from .evolve import Trajectory
from .integrate import integrate_adaptive


@dataclass(frozen=True)
class SU2Driver:
    """Generator decomposition coefficients f0..f3 as functions of time."""

    f0: Callable[[float], complex]
    f1: Callable[[float], complex]
    f2: Callable[[float], complex]
    f3: Callable[[float], complex]


@dataclass(frozen=True)
class GState:
    g1: complex
    g2: complex
    g3: complex
    t: float


def cavity_driver(k: int, n: int, cfg: CavityConfig, basis: Basis) -> SU2Driver:
    """Two-level truncation of the cavity generator for levels (k, n).

    Level k occupies the first matrix slot, n the second, so the initial
    condition a_k(0) = 1 is the first column of U.  With that ordering
    f0 = -i alpha^2 (E_k + E_n)/2, f2 = -i alpha^2 (E_k - E_n)/2,
    f1 = -(Rdot/R) eta_nk, f3 = +(Rdot/R) eta_nk.
    """
    E_k = float(basis.energies[k - 1])
    E_n = float(basis.energies[n - 1])
    eta_nk = float(basis.eta[n - 1, k - 1])
    eps, w = cfg.epsilon, cfg.omega

    def alpha2(t: float) -> float:
        s = 1.0 + eps * math.sin(w * t)
        return 1.0 / (s * s)

    def drive(t: float) -> float:
        s = 1.0 + eps * math.sin(w * t)
        return eps * w * math.cos(w * t) / s

    return SU2Driver(
        f0=lambda t: -0.5j * alpha2(t) * (E_k + E_n),
        f1=lambda t: -drive(t) * eta_nk,
        f2=lambda t: -0.5j * alpha2(t) * (E_k - E_n),
        f3=lambda t: drive(t) * eta_nk,
    )


def driver_generator(driver: SU2Driver, t: float) -> np.ndarray:
    """Reassembled 2x2 generator f0 I + f1 s+ + f2 s3 + f3 s- at time t."""
    f0, f1, f2, f3 = driver.f0(t), driver.f1(t), driver.f2(t), driver.f3(t)
    return np.array([[f0 + f2, f1], [f3, f0 - f2]], dtype=complex)


def amplitudes(g: GState, phase0: complex) -> np.ndarray:
    """First propagator column b e^{int f0} (b^-2 + g1 g3, g3) for a(0) = (1, 0)."""
    b = np.exp(-g.g2)
    pref = b * np.exp(phase0)
    return np.array([pref * (1.0 / b ** 2 + g.g1 * g.g3), pref * g.g3])


def _chart_matrix(y: np.ndarray) -> np.ndarray:
    """Full segment propagator from the chart state y = (g1, g2, g3, int f0)."""
    g1, g2, g3, ph = y
    b = np.exp(-g2)
    return b * np.exp(ph) * np.array([[1.0 / b ** 2 + g1 * g3, g1],
                                      [g3, 1.0]], dtype=complex)


class ChartBlowupError(RuntimeError):
    """Riccati variable exceeded the overflow guard with restarts disabled."""


def _g_rhs(driver: SU2Driver):
    def f(t, y):
        g1, g2, g3, _ = y
        f0, f1 = driver.f0(t), driver.f1(t)
        f2, f3 = driver.f2(t), driver.f3(t)
        return np.array([
            f1 + 2.0 * f2 * g1 - f3 * g1 * g1,
            f2 - f3 * g1,
            f3 * np.exp(2.0 * g2),
            f0,
        ])
    return f


def integrate_g(driver: SU2Driver, t_end: float, tol: float = 1e-10,
                sample_times=None, initial_amps=(1.0, 0.0),
                g1_max: float = 10.0, g2_max: float = 2.5,
                allow_restart: bool = True):
    """Integrate the auxiliary system to t_end, restarting the chart on blow-up.

    Returns (amps_end, samples, n_restarts) where samples holds the two-level
    amplitude vectors at the requested times (None if no times given).  The
    restart composes the exact relation between the propagator and a fresh
    chart: the running amplitudes absorb the finished segment's propagator.
    """
    f = _g_rhs(driver)
    seg = {"a": np.array(initial_amps, dtype=complex), "restarts": 0}
    samples = None
    pending: list[float] | None = None
    if sample_times is not None:
        samples = []
        pending = [float(s) for s in sample_times]
        while pending and pending[0] == 0.0:
            samples.append(np.array(initial_amps, dtype=complex))
            pending.pop(0)

    def hook(t, y):
        if pending:
            while pending and abs(pending[0] - t) <= 1e-12 * max(1.0, abs(t)):
                samples.append(_chart_matrix(y) @ seg["a"])
                pending.pop(0)
        if abs(y[0]) > g1_max or y[1].real > g2_max:
            if not allow_restart:
                raise ChartBlowupError(f"chart variable blow-up at t = {t}")
            seg["a"] = _chart_matrix(y) @ seg["a"]
            seg["restarts"] += 1
            return np.zeros(4, dtype=complex)
        return None

    _, y_end, _ = integrate_adaptive(
        f, 0.0, np.zeros(4, dtype=complex), t_end, rtol=tol, atol=tol * 1e-2,
        sample_times=pending if pending else None, on_accept=hook)
    amps_end = _chart_matrix(y_end) @ seg["a"]
    if pending is not None:
        while pending:
            if abs(pending[0] - t_end) <= 1e-9 * max(1.0, abs(t_end)):
                samples.append(np.array(amps_end, copy=True))
                pending.pop(0)
            else:
                raise RuntimeError(f"unrecorded sample time {pending[0]}")
    return amps_end, samples, seg["restarts"]


def su2_trajectory(k: int, n: int, cfg: CavityConfig, basis: Basis,
                   t_end: float, steps_per_period: int = 200,
                   tol: float = 1e-10) -> Trajectory:
    """Two-level trajectory (levels k, n) in the same form the full evolver emits.

    Energy uses the truncated two-level coupling, so the phase engine can be
    applied to it directly.
    """
    from .cavity import alpha_at, wall_log_derivative
    driver = cavity_driver(k, n, cfg, basis)
    tau = cfg.tau
    periods = max(1, int(np.ceil(t_end / tau - 1e-9)))
    n_samples = periods * steps_per_period + 1
    dt = tau / steps_per_period
    times = np.arange(n_samples) * dt
    _, samples, _ = integrate_g(driver, float(times[-1]), tol=tol,
                                sample_times=list(times))
    coeffs = np.array(samples)
    E_k = float(basis.energies[k - 1])
    E_n = float(basis.energies[n - 1])
    eta_nk = float(basis.eta[n - 1, k - 1])
    eta2 = np.array([[0.0, -eta_nk], [eta_nk, 0.0]])
    energies2 = np.array([E_k, E_n])
    a2 = np.asarray(alpha_at(times, cfg)) ** 2
    drive = np.asarray(wall_log_derivative(times, cfg))
    diag = (np.abs(coeffs) ** 2) @ energies2
    cross = -drive * np.einsum("qm,qm->q", np.conj(coeffs), coeffs @ eta2.T).imag
    energy = a2 * diag + cross
    norm = np.sum(np.abs(coeffs) ** 2, axis=1)
    return Trajectory(times=times, energy=energy, norm=norm, coeffs=coeffs,
                      coeff_index=np.arange(n_samples), omega=cfg.omega,
                      epsilon=cfg.epsilon, steps_per_period=steps_per_period,
                      level_energies=energies2, eta=eta2, levels=(k, n))
