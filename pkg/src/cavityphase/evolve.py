"""Spectral time evolution of the driven cavity in the static eigenbasis.

The projected coefficient system is
    da_m/dt = -i alpha(t)^2 E_m a_m + (Rdot/R) sum_n eta[m, n] a_n,
an exactly norm-preserving (anti-Hermitian) linear ODE with
period-tau coefficients.  One period is integrated with an adaptive
embedded Runge-Kutta pair at tight tolerance; the one-period propagator is
then checked for unitarity, projected onto the unitary group, and
eigendecomposed, which makes states at any later period boundary available
by closed-form phase powers.  Long runs therefore cost one period of ODE
work plus dense linear algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from . import _fastprop
from .cavity import Basis, CavityConfig, alpha_at, wall_log_derivative
from .integrate import integrate_adaptive


class IntegrityError(RuntimeError):
    """Unitarity or norm conservation violated beyond tolerance."""


@dataclass(frozen=True)
class StateVector:
    """Coefficients of the wavefunction in the static eigenbasis at time t."""

    coeffs: np.ndarray
    t: float = 0.0


class MaxEnergyResult(NamedTuple):
    value: float
    span_ok: bool


def ground_state(size: int) -> np.ndarray:
    a = np.zeros(size, dtype=complex)
    a[0] = 1.0
    return a


def coefficient_rhs(cfg: CavityConfig, basis: Basis):
    """RHS closure for coefficient vectors (shape (M,)) or propagators (M, M)."""
    energies = basis.energies
    energies_col = energies[:, None]
    eta = basis.eta
    eps, w = cfg.epsilon, cfg.omega

    def f(t, y):
        s = 1.0 + eps * math.sin(w * t)
        a2 = 1.0 / (s * s)
        drive = eps * w * math.cos(w * t) / s
        diag = energies * y if y.ndim == 1 else energies_col * y
        return (-1j * a2) * diag + drive * (eta @ y)

    return f


def energy(state, t: float, cfg: CavityConfig, basis: Basis) -> float:
    """Instantaneous energy expectation in the rescaled frame.

    E = alpha^2 * sum E_m |a_m|^2 + Re[i (Rdot/R) <a| eta |a>]; the second
    term is real because i*eta is Hermitian for real antisymmetric eta.
    """
    a = state.coeffs if isinstance(state, StateVector) else np.asarray(state)
    a2 = float(alpha_at(t, cfg)) ** 2
    drive = float(wall_log_derivative(t, cfg))
    diag = float(np.sum(basis.energies * np.abs(a) ** 2))
    cross = -drive * float(np.imag(np.vdot(a, basis.eta @ a)))
    return a2 * diag + cross


def _energy_block(states, t: float, cfg: CavityConfig, energies, eta):
    """Energies of a block of states (M, n) sharing one in-period time t."""
    a2 = float(alpha_at(t, cfg)) ** 2
    drive = float(wall_log_derivative(t, cfg))
    diag = energies @ (np.abs(states) ** 2)
    cross = -drive * np.einsum("mq,mq->q", np.conj(states), eta @ states).imag
    return a2 * diag + cross


class PeriodPropagator:
    """One-period evolution operators at a grid of in-period offsets.

    U_offsets[j] maps a state at a period boundary to the state j*tau/n_off
    later; the full-period operator is unitarity-checked, polar-projected,
    and eigendecomposed so that boundary states at arbitrary period counts
    come from closed-form eigenphase powers.
    """

    def __init__(self, cfg: CavityConfig, basis: Basis, offsets_per_period: int,
                 rtol: float = 1e-10, atol: float = 1e-12,
                 unitarity_tol: float = 1e-5):
        self.cfg = cfg
        self.basis = basis
        self.offsets_per_period = offsets_per_period
        tau = cfg.tau
        size = basis.size
        sample_times = [j * tau / offsets_per_period for j in range(offsets_per_period + 1)]
        eye = np.eye(size, dtype=complex)
        if _fastprop.HAVE_NUMBA:
            samples = _fastprop.propagator_samples(
                basis.energies, basis.eta, cfg.epsilon, cfg.omega,
                sample_times, rtol, atol)
        else:
            f = coefficient_rhs(cfg, basis)
            _, _, samples = integrate_adaptive(f, 0.0, eye, tau, rtol=rtol,
                                               atol=atol, sample_times=sample_times)
        self.offset_times = np.asarray(sample_times[:-1])
        # raw unitarity defect is the integrator health gate; the exact
        # operators are unitary, so afterwards each one is polar-projected
        # onto the unitary group (a change of the same order as the error
        # already present, and it stops norm drift from compounding over
        # period powers)
        defect = max(float(np.max(np.abs(U.conj().T @ U - eye))) for U in samples)
        if defect > unitarity_tol:
            raise IntegrityError(
                f"one-period propagator unitarity defect {defect:.3e} exceeds "
                f"{unitarity_tol:.1e}")
        self.unitarity_defect = defect
        projected = []
        for U in samples:
            u, _, vh = np.linalg.svd(U)
            projected.append(u @ vh)
        self.U_offsets = projected[:-1]
        U_full = projected[-1]
        T, Z = scipy.linalg.schur(U_full, output="complex")
        self.eigenphases = np.angle(np.diag(T))
        self.modes = Z
        self.U_period = U_full

    def boundary_states(self, a0: np.ndarray, qs: np.ndarray) -> np.ndarray:
        """States at period boundaries q*tau for integer counts qs: (M, len(qs))."""
        qs = np.asarray(qs, dtype=float)
        w = self.modes.conj().T @ a0
        phases = np.exp(1j * np.outer(self.eigenphases, qs))
        return self.modes @ (phases * w[:, None])


@dataclass
class Trajectory:
    """Sampled evolution: fine-grid energy/norm plus (possibly strided) coefficients.

    times is uniform with steps_per_period samples per drive period, starting
    at 0 and ending on a period boundary, so per-cycle phase extraction is
    exact in t.  coeffs[i] is the coefficient vector at times[coeff_index[i]].
    """

    times: np.ndarray
    energy: np.ndarray
    norm: np.ndarray
    coeffs: np.ndarray
    coeff_index: np.ndarray
    omega: float
    epsilon: float
    steps_per_period: int
    level_energies: np.ndarray | None = None
    eta: np.ndarray | None = None
    levels: tuple | None = None

    @property
    def tau(self) -> float:
        return 2.0 * np.pi / self.omega

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def coeff_times(self) -> np.ndarray:
        return self.times[self.coeff_index]

    def state_at_index(self, i: int) -> np.ndarray:
        pos = np.searchsorted(self.coeff_index, i)
        if pos >= len(self.coeff_index) or self.coeff_index[pos] != i:
            raise ValueError(f"no stored coefficients at sample index {i}")
        return self.coeffs[pos]


def evolve(cfg: CavityConfig, initial, t_end: float, steps_per_period: int = 200,
           rtol: float = 1e-10, atol: float = 1e-12, coeff_stride: int = 1,
           norm_tol: float = 1e-6, max_samples: int = 30_000_000) -> Trajectory:
    """Evolve an initial coefficient vector to t_end (rounded up to full periods).

    steps_per_period sets the emission grid only; integration accuracy is the
    adaptive pair's.  coeff_stride thins coefficient storage (energy and norm
    stay on the full grid); it must divide steps_per_period or be a multiple
    of it, so period boundaries are always stored.
    """
    if steps_per_period < 64:
        raise ValueError("steps_per_period must be at least 64")
    a0 = initial.coeffs if isinstance(initial, StateVector) else np.asarray(initial, dtype=complex)
    if a0.shape != (cfg.basis_size,):
        raise ValueError("initial state size does not match basis_size")
    if abs(np.sum(np.abs(a0) ** 2) - 1.0) > 1e-9:
        raise ValueError("initial state must be normalized")
    if coeff_stride < 1 or (steps_per_period % coeff_stride != 0
                            and coeff_stride % steps_per_period != 0):
        raise ValueError("coeff_stride must divide steps_per_period or be a multiple of it")

    from .cavity import build_basis
    basis = build_basis(cfg.geometry, cfg.basis_size)
    tau = cfg.tau
    periods = max(1, int(np.ceil(t_end / tau - 1e-9)))
    n_samples = periods * steps_per_period + 1
    if n_samples > max_samples:
        raise ValueError(
            f"run would produce {n_samples} samples (> {max_samples}); "
            "increase coeff_stride/steps or shorten the run")

    prop = PeriodPropagator(cfg, basis, steps_per_period, rtol=rtol, atol=atol)
    boundaries = prop.boundary_states(a0, np.arange(periods + 1))

    dt = tau / steps_per_period
    times = np.arange(n_samples) * dt
    energy_arr = np.empty(n_samples)
    norm_arr = np.empty(n_samples)
    store_mask = np.zeros(n_samples, dtype=bool)
    store_mask[::coeff_stride] = True
    store_mask[-1] = True
    stored = np.nonzero(store_mask)[0]
    position = np.cumsum(store_mask) - 1
    coeffs = np.empty((len(stored), basis.size), dtype=complex)

    inner = boundaries[:, :-1]
    for j in range(steps_per_period):
        t_off = prop.offset_times[j]
        block = inner if j == 0 else prop.U_offsets[j] @ inner
        idx = j + steps_per_period * np.arange(periods)
        energy_arr[idx] = _energy_block(block, t_off, cfg, basis.energies, basis.eta)
        norm_arr[idx] = np.sum(np.abs(block) ** 2, axis=0)
        sel = store_mask[idx]
        if np.any(sel):
            coeffs[position[idx[sel]]] = block[:, sel].T
    # final sample is the last period boundary
    energy_arr[-1] = _energy_block(boundaries[:, -1:], 0.0, cfg,
                                   basis.energies, basis.eta)[0]
    norm_arr[-1] = float(np.sum(np.abs(boundaries[:, -1]) ** 2))
    coeffs[position[n_samples - 1]] = boundaries[:, -1]

    drift = float(np.max(np.abs(norm_arr - 1.0)))
    if drift > norm_tol:
        raise IntegrityError(f"norm drift {drift:.3e} exceeds {norm_tol:.1e}")

    return Trajectory(times=times, energy=energy_arr, norm=norm_arr,
                      coeffs=coeffs, coeff_index=stored,
                      omega=cfg.omega, epsilon=cfg.epsilon,
                      steps_per_period=steps_per_period,
                      level_energies=np.asarray(basis.energies),
                      eta=np.asarray(basis.eta), levels=None)


def integrate_direct(cfg: CavityConfig, a0: np.ndarray, t0: float, t1: float,
                     rtol: float = 1e-10, atol: float = 1e-12) -> np.ndarray:
    """Plain adaptive integration of the coefficient system over [t0, t1].

    Supports t1 < t0 (time reversal); used for integrator cross-checks.
    """
    from .cavity import build_basis
    basis = build_basis(cfg.geometry, cfg.basis_size)
    f = coefficient_rhs(cfg, basis)
    _, y, _ = integrate_adaptive(f, t0, np.asarray(a0, dtype=complex), t1,
                                 rtol=rtol, atol=atol)
    return y


def rabi_span_estimate(cfg: CavityConfig, basis: Basis, n: int, N: int,
                       k: int = 1) -> float:
    """A-priori Rabi period pi/Gamma from the rotating-frame width formula."""
    from .rwa import ResonanceSpec, width
    omega_nk = basis.omega_nk(n, k)
    spec = ResonanceSpec(k=k, n=n, N=N, omega_nk=omega_nk,
                         delta_omega=N * cfg.omega - omega_nk)
    eta_nk = float(basis.eta[n - 1, k - 1])
    return np.pi / width(spec, cfg.epsilon, eta_nk)


def max_energy(traj: Trajectory, min_span: float | None = None) -> MaxEnergyResult:
    """Peak sampled energy; span_ok is False when the run is shorter than min_span."""
    span_ok = True if min_span is None else traj.t_end >= min_span
    return MaxEnergyResult(float(np.max(traj.energy)), span_ok)
