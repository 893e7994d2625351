"""Spin-1/2 in a uniformly rotating magnetic field: exact states and phases.

The field sweeps a cone of opening angle alpha at rate omega; on the
resonance omega = -omega1/cos(alpha) a spin prepared along the field flips
with unit probability, Rabi rate lambda = omega*sin(alpha).  Every quantity
here is closed form, which makes this model the exact oracle for the
trajectory-based phase machinery: the same Hamiltonian can also be
integrated numerically and fed through the generic phase engine.

The geometric phase comes with the same half-Rabi-period branch structure as
the cavity resonance; both evaluate through one shared window helper, the
spin case with the opposite overall sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evolve import Trajectory
from .integrate import integrate_adaptive
from .rwa import principal, window_shift


class BoundaryCaseError(ValueError):
    """sin(alpha) = 1/2 exactly: the per-cycle overlap vanishes."""


@dataclass(frozen=True)
class SpinConfig:
    """Cone angle alpha, rotation rate omega, Larmor frequency omega1.

    The default constructor enforces the full-flip resonance
    omega1 = -omega*cos(alpha).
    """

    alpha: float
    omega: float
    omega1: float

    def __post_init__(self):
        if not 0.0 < self.alpha < math.pi:
            raise ValueError("alpha must lie in (0, pi)")
        if abs(math.cos(self.alpha)) < 1e-12:
            raise ValueError("cos(alpha) = 0: resonance condition undefined")

    @property
    def lam(self) -> float:
        """Rabi rate lambda = omega * sin(alpha)."""
        return self.omega * math.sin(self.alpha)

    @property
    def tau(self) -> float:
        """Field rotation period."""
        return 2.0 * math.pi / self.omega

    @property
    def rabi_period(self) -> float:
        """Spin-flip period T = 2*pi/lambda."""
        return 2.0 * math.pi / self.lam


def resonant_config(alpha: float, omega: float) -> SpinConfig:
    """Configuration with omega1 fixed by the full-flip condition."""
    return SpinConfig(alpha=alpha, omega=omega, omega1=-omega * math.cos(alpha))


def hamiltonian(t: float, cfg: SpinConfig) -> np.ndarray:
    """2x2 field Hamiltonian -(omega1/2) (B_hat . sigma) at time t."""
    a, w = cfg.alpha, cfg.omega
    e = np.exp(1j * w * t)
    return -0.5 * cfg.omega1 * np.array(
        [[math.cos(a), math.sin(a) / e], [math.sin(a) * e, -math.cos(a)]])


def eigenspinor_up(t: float, cfg: SpinConfig) -> np.ndarray:
    """Instantaneous spinor along the field (energy -omega1/2)."""
    h = 0.5 * cfg.alpha
    return np.array([math.cos(h), np.exp(1j * cfg.omega * t) * math.sin(h)])


def eigenspinor_down(t: float, cfg: SpinConfig) -> np.ndarray:
    """Instantaneous spinor against the field (energy +omega1/2)."""
    h = 0.5 * cfg.alpha
    return np.array([math.sin(h), -np.exp(1j * cfg.omega * t) * math.cos(h)])


def spin_state(t: float, cfg: SpinConfig) -> np.ndarray:
    """Exact resonant state starting along the field at t = 0."""
    half = 0.5 * cfg.lam * t
    return np.exp(-0.5j * cfg.omega * t) * (
        math.cos(half) * eigenspinor_up(t, cfg)
        + 1j * math.sin(half) * eigenspinor_down(t, cfg))


def spin_energy(t, cfg: SpinConfig):
    """Energy expectation -(omega1/2) cos(lambda t) of the resonant state."""
    return -0.5 * cfg.omega1 * np.cos(cfg.lam * np.asarray(t, dtype=float))


def spin_theta(t, cfg: SpinConfig):
    """Dynamical phase -int E = (omega1 / 2 lambda) sin(lambda t)."""
    return (cfg.omega1 / (2.0 * cfg.lam)) * np.sin(cfg.lam * np.asarray(t, dtype=float))


def phase_accumulation(t, cfg: SpinConfig):
    """Smooth accumulation Omega(t) = (omega1/lambda) sin(lambda t) + omega t."""
    t = np.asarray(t, dtype=float)
    return (cfg.omega1 / cfg.lam) * np.sin(cfg.lam * t) + cfg.omega * t


def spin_beta0(q: int, cfg: SpinConfig) -> float:
    """Geometric phase beta(0, q*tau), principal branch.

    -Omega(q tau)/2 with the same pi window shift as the cavity resonance
    (T here is the spin-flip period); the shift switch at half-odd multiples
    of T is the pi-jump.
    """
    t = q * cfg.tau
    base = -0.5 * float(phase_accumulation(t, cfg))
    return principal(base + float(window_shift(t / cfg.rabi_period)))


def spin_beta0_exact(t, cfg: SpinConfig):
    """beta(0, t) at arbitrary t from the closed-form state and overlap."""
    t = np.asarray(t, dtype=float)
    h = 0.5 * cfg.alpha
    ch, sh = math.cos(h), math.sin(h)
    e = np.exp(1j * cfg.omega * t)
    half = 0.5 * cfg.lam * t
    overlap = np.exp(-0.5j * cfg.omega * t) * (
        np.cos(half) * (ch * ch + e * sh * sh)
        + 1j * np.sin(half) * ch * sh * (1.0 - e))
    return principal(np.angle(overlap * np.exp(-1j * spin_theta(t, cfg))))


def spin_beta1(t1: float, cfg: SpinConfig) -> float:
    """Per-cycle phase beta(t1, t1 + tau) for t1 on a rotation boundary.

    -[Omega(t1 + tau) - Omega(t1)]/2, plus pi when 1/2 < sin(alpha) < 1; the
    boundary sin(alpha) = 1/2 makes the cycle endpoints orthogonal and is
    rejected.
    """
    tau = cfg.tau
    q = t1 / tau
    if abs(q - round(q)) > 1e-9 * max(1.0, abs(q)):
        raise ValueError("t1 must be an integer multiple of the rotation period")
    s = math.sin(cfg.alpha)
    if s == 0.5:
        raise BoundaryCaseError("sin(alpha) = 1/2: per-cycle overlap vanishes")
    base = -0.5 * float(phase_accumulation(t1 + tau, cfg)
                        - phase_accumulation(t1, cfg))
    if 0.0 < s < 0.5:
        return principal(base)
    return principal(base + math.pi)


def spin_beta1_small_alpha(t1, cfg: SpinConfig):
    """Small-cone limit -2 pi sin^2(lambda (t1 + tau/2) / 2)."""
    t1 = np.asarray(t1, dtype=float)
    return -2.0 * math.pi * np.sin(0.5 * cfg.lam * (t1 + 0.5 * cfg.tau)) ** 2


def cyclic_phases(q: int) -> tuple[float, float]:
    """Closure-point values when q rotations complete one spin flip.

    With sin(alpha) = 1/q the flip closes at t = q*tau = T, where
    Omega(m*tau) reduces to 2*m*pi; the accumulated and per-cycle phases are
    then -(q-1)*pi and -pi.
    """
    if q < 1:
        raise ValueError("q must be a positive integer")
    return -(q - 1) * math.pi, -math.pi


def solid_angle(q: int, cfg: SpinConfig) -> float:
    """Solid angle swept against the geodesic through q rotations.

    The resonant state traces the spiral theta = phi*sin(alpha) on the unit
    sphere of its moving eigenbasis; the enclosed solid angle up to
    phi = 2*pi*q is 2*pi*q - sin(2*pi*q*sin(alpha))/sin(alpha).
    """
    if q < 1:
        raise ValueError("q must be a positive integer")
    s = math.sin(cfg.alpha)
    full = 2.0 * math.pi * q
    return full - math.sin(full * s) / s


def berry_limit(theta0: float) -> float:
    """Constant-latitude (adiabatic, cyclic) solid angle 2*pi*(1 - cos(theta0))."""
    if not 0.0 <= theta0 <= math.pi:
        raise ValueError("theta0 must lie in [0, pi]")
    return 2.0 * math.pi * (1.0 - math.cos(theta0))


def spin_trajectory_numeric(cfg: SpinConfig, cycles: int,
                            steps_per_cycle: int = 64,
                            rtol: float = 1e-12) -> Trajectory:
    """Integrate the rotating-field Schroedinger equation numerically.

    Independent oracle for the closed forms: the output is a standard
    trajectory (coefficients, energy, norm on a uniform grid aligned to the
    rotation period) ready for the generic phase engine.
    """
    w, w1, a = cfg.omega, cfg.omega1, cfg.alpha
    ca, sa = math.cos(a), math.sin(a)

    def f(t, psi):
        e = math.cos(w * t) + 1j * math.sin(w * t)
        h11 = -0.5 * w1 * ca
        h12 = -0.5 * w1 * sa / e
        # dpsi/dt = -i H psi with H = [[h11, h12], [conj(h12), -h11]]
        return -1j * np.array([psi[0] * h11 + psi[1] * h12,
                               psi[0] * np.conj(h12) - psi[1] * h11])

    n_samples = cycles * steps_per_cycle + 1
    dt = cfg.tau / steps_per_cycle
    times = np.arange(n_samples) * dt
    psi0 = eigenspinor_up(0.0, cfg).astype(complex)
    _, _, samples = integrate_adaptive(f, 0.0, psi0, float(times[-1]),
                                       rtol=rtol, atol=rtol * 1e-2,
                                       sample_times=list(times))
    coeffs = np.array(samples)
    energy = np.array([
        float(np.real(np.vdot(c, hamiltonian(float(t), cfg) @ c)))
        for t, c in zip(times, coeffs)])
    norm = np.sum(np.abs(coeffs) ** 2, axis=1)
    return Trajectory(times=times, energy=energy, norm=norm, coeffs=coeffs,
                      coeff_index=np.arange(n_samples), omega=cfg.omega,
                      epsilon=0.0, steps_per_period=steps_per_cycle,
                      level_energies=None, eta=None, levels=None)
