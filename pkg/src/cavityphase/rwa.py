"""Closed-form two-level theory of the driven cavity near its resonances.

Keeping only the slowest term of the wall-motion coupling turns the two-level
problem into a textbook Rabi model.  Resonances sit at omega = omega_nk / N
(subharmonic order N = 1, 2, 3); they share one universal Lorentzian line
shape and differ only through the half-width Gamma_N.

Conventions: hbar = mass = rest radius = 1; delta_omega = N*omega - omega_nk;
chi = sqrt(Gamma^2 + delta_omega^2 / 4); at exact resonance the population
oscillates as sin^2(Gamma t) with period T = pi / Gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ForbiddenTransitionError(ValueError):
    """The requested pair of levels has no wall-motion coupling."""


@dataclass(frozen=True)
class ResonanceSpec:
    """One subharmonic resonance k -> n of order N at detuning delta_omega."""

    k: int
    n: int
    N: int
    omega_nk: float
    delta_omega: float = 0.0

    def __post_init__(self):
        if not (self.n > self.k >= 1):
            raise ValueError("need n > k >= 1")
        if self.N not in (1, 2, 3):
            raise ValueError("subharmonic order N must be 1, 2, or 3")

    @property
    def drive_omega(self) -> float:
        """Drive frequency reproducing this detuning: (omega_nk + delta)/N."""
        return (self.omega_nk + self.delta_omega) / self.N

    @property
    def tau(self) -> float:
        return 2.0 * math.pi / self.drive_omega


@dataclass(frozen=True)
class RabiSolution:
    """Width, generalized Rabi rate, and inputs of the two-level solution."""

    Gamma: float
    chi: float
    eta_nk: float
    epsilon: float


def gamma_factor(spec: ResonanceSpec) -> float:
    """Order-dependent width factor gamma_N (dimension of a frequency)."""
    w, d = spec.omega_nk, spec.delta_omega
    if spec.N == 1:
        return w + d
    if spec.N == 2:
        return (3.0 * w - d) / 4.0
    return (17.0 * w * w - 17.0 * w * d + 2.0 * d * d) / (24.0 * (w + d))


def width(spec: ResonanceSpec, epsilon: float, eta_nk: float) -> float:
    """Resonance half-width Gamma_N = epsilon^N |eta_nk| gamma_N / 2.

    The Lorentzian FWHM in drive frequency is 4*Gamma/N.  The width scales
    as epsilon^N, so higher orders are far narrower and their Rabi periods
    T = pi/Gamma correspondingly longer.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if eta_nk == 0.0:
        raise ForbiddenTransitionError(f"eta for levels ({spec.n},{spec.k}) vanishes")
    return epsilon ** spec.N * abs(eta_nk) * gamma_factor(spec) / 2.0


def scaled_width(spec: ResonanceSpec) -> float:
    """Width divided by epsilon^N |eta_nk| (the tabulated form), gamma_N / 2."""
    return gamma_factor(spec) / 2.0


def make_rabi(spec: ResonanceSpec, epsilon: float, eta_nk: float) -> RabiSolution:
    g = width(spec, epsilon, eta_nk)
    chi = math.sqrt(g * g + 0.25 * spec.delta_omega ** 2)
    return RabiSolution(Gamma=g, chi=chi, eta_nk=eta_nk, epsilon=epsilon)


def rabi_amplitudes(t, sol: RabiSolution, delta_omega: float):
    """Two-level amplitudes (c_k, c_n) for c_k(0) = 1, c_n(0) = 0.

    c_k = e^{+i d t/2} [cos(chi t) - i d sin(chi t)/(2 chi)],
    c_n = Gamma e^{-i d t/2} sin(chi t)/chi;  |c_k|^2 + |c_n|^2 = 1 exactly.
    """
    t = np.asarray(t, dtype=float)
    chi, g, d = sol.chi, sol.Gamma, delta_omega
    ph = np.exp(0.5j * d * t)
    s, c = np.sin(chi * t), np.cos(chi * t)
    c_k = ph * (c - 1j * d * s / (2.0 * chi))
    c_n = g * np.conj(ph) * s / chi
    return c_k, c_n


def energy_shift(spec: ResonanceSpec, sol: RabiSolution, E_k: float, E_n: float) -> float:
    """Envelope offset A = [E_k d^2 + 4 E_n (Gamma^2 - chi^2)] / (4 chi^2)."""
    d = spec.delta_omega
    return (E_k * d * d + 4.0 * E_n * (sol.Gamma ** 2 - sol.chi ** 2)) / (4.0 * sol.chi ** 2)


def rwa_energy(t, spec: ResonanceSpec, sol: RabiSolution, E_k: float, E_n: float,
               cfg) -> np.ndarray:
    """Slow-envelope energy alpha^2 [E_k cos^2(chi t) + (A + E_n) sin^2(chi t)]."""
    from .cavity import alpha_at
    t = np.asarray(t, dtype=float)
    A = energy_shift(spec, sol, E_k, E_n)
    s2 = np.sin(sol.chi * t) ** 2
    return alpha_at(t, cfg) ** 2 * (E_k * (1.0 - s2) + (A + E_n) * s2)


def lorentzian(omega, spec: ResonanceSpec, Gamma: float):
    """Peak transfer probability 1/[1 + (d/2Gamma)^2] with d = N*omega - omega_nk.

    Equals the scaled peak energy ((1-eps)^2 E_max - E_k)/(E_n - E_k); one
    curve for every resonance order.
    """
    if Gamma <= 0.0:
        raise ValueError("Gamma must be positive")
    d = spec.N * np.asarray(omega, dtype=float) - spec.omega_nk
    return 1.0 / (1.0 + (d / (2.0 * Gamma)) ** 2)


def effective_omega_nk(spec: ResonanceSpec, sol: RabiSolution) -> float:
    """Per-cycle phase rate omega'_nk = omega_nk Gamma^2 / chi^2 (= omega_nk on peak)."""
    return spec.omega_nk * (sol.Gamma / sol.chi) ** 2


def effective_position(spec: ResonanceSpec, epsilon: float) -> float:
    """Resonance center including the mean-dilation shift.

    The transition phase accumulates at omega_nk times the time average of
    alpha^2, which over a drive period is (1 - eps^2)^(-3/2); the peak
    therefore sits at omega_nk (1 - eps^2)^(-3/2) / N rather than at
    omega_nk / N.  The shift is O(eps^2), negligible against the N = 1 width
    but comparable to the epsilon^N widths of higher orders.
    """
    return spec.omega_nk * (1.0 - epsilon ** 2) ** -1.5 / spec.N


def principal(value):
    """Wrap a phase (or array of phases) to the principal branch (-pi, pi]."""
    v = np.asarray(value, dtype=float)
    wrapped = np.mod(-v + np.pi, 2.0 * np.pi)
    out = -(wrapped - np.pi)
    return float(out) if np.isscalar(value) or out.ndim == 0 else out


def window_shift(t_over_T) -> np.ndarray:
    """Branch offset of the overlap phase: 0 or pi depending on t/T.

    The comparison state's weight changes sign each half Rabi period, which
    adds pi to the overlap phase on alternating windows
    (2m - 1/2, 2m + 1/2] -> 0,  (2m + 1/2, 2m + 3/2] -> pi.
    """
    x = np.asarray(t_over_T, dtype=float)
    k = np.ceil(x + 0.5) - 1.0
    return np.where(np.mod(k, 2.0) == 0.0, 0.0, np.pi)


def phase_accumulation(t, omega_nk: float, chi: float):
    """Smooth part Omega(t) = omega_nk t - (omega_nk / 2 chi) sin(2 chi t)."""
    t = np.asarray(t, dtype=float)
    return omega_nk * t - (omega_nk / (2.0 * chi)) * np.sin(2.0 * chi * t)


def rwa_beta0(q: int, tau: float, spec: ResonanceSpec, sol: RabiSolution) -> float:
    """Geometric phase beta(0, q*tau) at resonance, principal branch.

    Omega(q tau)/2 plus the pi window shift; the shift flips at
    t/T = (2m+1)/2, which is the sudden approximate pi-jump.
    """
    t = q * tau
    T = math.pi / sol.chi
    base = 0.5 * phase_accumulation(t, spec.omega_nk, sol.chi)
    return principal(base + float(window_shift(t / T)))


def rwa_beta1(t1, spec: ResonanceSpec, sol: RabiSolution) -> np.ndarray:
    """Per-cycle geometric phase omega'_nk tau sin^2[chi (t1 + tau/2)], unwrapped.

    At exact resonance this is 2*N*pi*sin^2[chi(t1 + N pi/omega_nk)]: amplitude
    2*N*pi and period T, independent of epsilon.
    """
    t1 = np.asarray(t1, dtype=float)
    tau = spec.tau
    return effective_omega_nk(spec, sol) * tau * np.sin(sol.chi * (t1 + 0.5 * tau)) ** 2


def w_expansion(t, spec: ResonanceSpec, epsilon: float, order: int = 3):
    """Rotating-frame drive coupling W(t), expanded through epsilon^order.

    W multiplies the coupling constant eta_nk in the two-level equations of
    motion; its lowest-frequency Fourier component at omega = omega_nk/N is
    what sets Gamma_N (all other components average away).
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2, or 3")
    t = np.asarray(t, dtype=float)
    w = spec.drive_omega
    wnk = spec.omega_nk
    wt = w * t
    total = w * np.cos(wt) + 0j
    if order >= 2:
        total = total + epsilon * (1j * wnk * (np.cos(2 * wt) + 1.0)
                                   - 0.5 * w * np.sin(2 * wt))
    if order >= 3:
        total = total + (epsilon ** 2 / (4.0 * w)) * (
            (w * w - 6.0 * wnk * wnk) * np.cos(wt)
            - (w * w + 2.0 * wnk * wnk) * np.cos(3 * wt)
            - 3.5j * wnk * w * (np.sin(wt) + np.sin(3 * wt)))
    return epsilon * np.exp(1j * wnk * t) * total


def resonance_positions(energies, k: int = 1, orders=(1, 2, 3),
                        n_max: int | None = None,
                        omega_min: float = 0.0, omega_max: float = np.inf):
    """All predicted peak positions omega = omega_nk / N inside a window.

    Returns a list of (n, N, omega) sorted by omega.
    """
    energies = np.asarray(energies)
    if n_max is None:
        n_max = len(energies)
    out = []
    for n in range(k + 1, n_max + 1):
        wnk = float(energies[n - 1] - energies[k - 1])
        for N in orders:
            pos = wnk / N
            if omega_min <= pos <= omega_max:
                out.append((n, N, pos))
    out.sort(key=lambda item: item[2])
    return out


def assign_resonance(omega: float, energies, k: int = 1, orders=(1, 2, 3),
                     n_max: int | None = None) -> ResonanceSpec:
    """Attribute a drive frequency to the (n, N) with the smallest detuning."""
    energies = np.asarray(energies)
    if n_max is None:
        n_max = len(energies)
    best = None
    for n in range(k + 1, n_max + 1):
        wnk = float(energies[n - 1] - energies[k - 1])
        for N in orders:
            d = N * omega - wnk
            if best is None or abs(d) < abs(best[2]):
                best = (n, N, d, wnk)
    n, N, d, wnk = best
    return ResonanceSpec(k=k, n=n, N=N, omega_nk=wnk, delta_omega=d)
