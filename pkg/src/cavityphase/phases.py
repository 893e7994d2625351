"""Dynamical-phase removal and Pancharatnam geometric phases from trajectories.

Works on any `Trajectory` (full cavity evolution, two-level product-form
evolution, or the integrated spin model): the dynamical phase is the
cumulative integral of -E(t), and the geometric phase between two sample
times is the principal argument of the overlap after that phase is removed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .evolve import Trajectory
from .rwa import principal


class OrthogonalStatesError(ValueError):
    """Overlap magnitude below tolerance; the relative phase is undefined."""


@dataclass
class PhaseJump:
    t: float
    t_over_T: float
    magnitude: float


@dataclass
class PhaseSeries:
    """Bundle of phase diagnostics extracted from one trajectory."""

    times: np.ndarray
    theta: np.ndarray
    beta0_times: np.ndarray
    beta0: np.ndarray
    beta1_times: np.ndarray
    beta1: np.ndarray
    jumps: list[PhaseJump] = field(default_factory=list)
    rabi_period: float | None = None


def cumulative_simpson(y: np.ndarray, dx: float) -> np.ndarray:
    """Cumulative integral of uniformly sampled y, Simpson-accurate.

    Even endpoints use composite Simpson pairs; odd endpoints add the
    integral of the quadratic through the three latest samples.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    out = np.zeros(n)
    if n < 2:
        return out
    if n == 2:
        out[1] = 0.5 * dx * (y[0] + y[1])
        return out
    # integral over each sample pair [2i, 2i+2] by Simpson
    pair = dx / 3.0 * (y[0:-2:2] + 4.0 * y[1:-1:2] + y[2::2])
    even_acc = np.concatenate(([0.0], np.cumsum(pair)))
    out[0::2][:len(even_acc)] = even_acc
    # odd endpoints: integrate the parabola through (i-1, i, i+1) over the
    # step [i-1, i]; the final point of an even-length array looks backward
    odd_idx = np.arange(1, n, 2)
    inc = np.empty(len(odd_idx))
    interior = odd_idx[odd_idx + 1 < n]
    inc[:len(interior)] = dx / 12.0 * (5.0 * y[interior - 1] + 8.0 * y[interior]
                                       - y[interior + 1])
    if odd_idx[-1] == n - 1:
        i = n - 1
        inc[-1] = dx / 12.0 * (-y[i - 2] + 8.0 * y[i - 1] + 5.0 * y[i])
    out[odd_idx] = out[odd_idx - 1] + inc
    return out


def dynamical_phase(traj: Trajectory) -> np.ndarray:
    """theta(t) = -integral of E from 0 to t on the sample grid; theta(0) = 0."""
    dt = np.diff(traj.times)
    if len(dt) == 0:
        return np.zeros(1)
    if np.any(dt <= 0.0) or np.max(np.abs(dt - dt[0])) > 1e-9 * dt[0]:
        raise ValueError("trajectory samples must be uniform and increasing")
    return -cumulative_simpson(traj.energy, float(dt[0]))


def pancharatnam_pair(a1: np.ndarray, a2: np.ndarray, theta1: float,
                      theta2: float, min_overlap: float = 1e-12) -> float:
    """Geometric phase between two stored states with their dynamical phases."""
    inner = np.vdot(a1, a2)
    if abs(inner) < min_overlap:
        raise OrthogonalStatesError("overlap magnitude below tolerance")
    return float(np.angle(inner * np.exp(1j * (theta1 - theta2))))


def _index_of_time(traj: Trajectory, t: float) -> int:
    dt = traj.times[1] - traj.times[0] if len(traj.times) > 1 else 1.0
    i = int(round(t / dt))
    if i < 0 or i >= len(traj.times) or abs(traj.times[i] - t) > 1e-6 * max(dt, 1.0):
        raise ValueError(f"t = {t} is not a sample time of this trajectory")
    return i


def pancharatnam(traj: Trajectory, t1: float, t: float,
                 theta: np.ndarray | None = None) -> float:
    """Geometric phase beta(t1, t) in (-pi, pi] between two sample times."""
    if theta is None:
        theta = dynamical_phase(traj)
    i1, i2 = _index_of_time(traj, t1), _index_of_time(traj, t)
    return pancharatnam_pair(traj.state_at_index(i1), traj.state_at_index(i2),
                             float(theta[i1]), float(theta[i2]))


def _boundary_indices(traj: Trajectory) -> np.ndarray:
    spp = traj.steps_per_period
    idx = np.arange(0, len(traj.times), spp)
    stored = np.isin(idx, traj.coeff_index)
    return idx[stored]


def beta0_series(traj: Trajectory, theta: np.ndarray | None = None):
    """beta(0, q*tau) for every stored period boundary; returns (times, values).

    Boundaries where the overlap with the initial state vanishes (phase
    undefined) are reported as NaN.
    """
    if theta is None:
        theta = dynamical_phase(traj)
    idx = _boundary_indices(traj)
    a0 = traj.state_at_index(0)
    th0 = float(theta[0])
    values = np.empty(len(idx))
    for pos, i in enumerate(idx):
        try:
            values[pos] = pancharatnam_pair(a0, traj.state_at_index(int(i)),
                                            th0, float(theta[i]))
        except OrthogonalStatesError:
            values[pos] = np.nan
    return traj.times[idx], values


def beta1_series(traj: Trajectory, theta: np.ndarray | None = None,
                 unwrap: bool = False):
    """Per-cycle phases beta(t1, t1 + tau) on stored period boundaries.

    With unwrap=True the principal values are lifted by continuity, which is
    the form whose oscillation amplitude reaches 2*N*pi on resonance.
    """
    if theta is None:
        theta = dynamical_phase(traj)
    idx = _boundary_indices(traj)
    spp = traj.steps_per_period
    t1_idx = idx[idx + spp <= idx[-1]]
    values = np.empty(len(t1_idx))
    for pos, i in enumerate(t1_idx):
        try:
            values[pos] = pancharatnam_pair(
                traj.state_at_index(int(i)), traj.state_at_index(int(i) + spp),
                float(theta[i]), float(theta[i + spp]))
        except OrthogonalStatesError:
            values[pos] = np.nan
    if unwrap:
        good = ~np.isnan(values)
        values[good] = np.unwrap(values[good])
    return traj.times[t1_idx], values


def beta0_fine_unwrapped(traj: Trajectory, theta: np.ndarray | None = None) -> np.ndarray:
    """beta(0, t) on the full coefficient grid, continuity-unwrapped.

    Needs densely stored coefficients (the per-sample phase advance must stay
    under pi for the unwrapping to be faithful).
    """
    if theta is None:
        theta = dynamical_phase(traj)
    if np.any(np.diff(traj.coeff_index) != 1):
        raise ValueError("fine unwrapping needs coefficients at every sample "
                         "(coeff_stride = 1)")
    a0 = traj.coeffs[0]
    inner = traj.coeffs @ np.conj(a0)  # row i: <a(0)|a(t_i)>
    raw = np.angle(inner * np.exp(1j * (theta[traj.coeff_index[0]]
                                        - theta[traj.coeff_index])))
    return np.unwrap(raw)


def _bridged_magnitude(times, diffs, i_jump, T, bridge=5, fit_lo=6, fit_hi=15):
    """Jump size with the smooth advance subtracted across the crossing.

    The overlap passes close to zero at the jump, so the flanking samples are
    ill-conditioned; the branch offset is measured over +-bridge cycles with
    the smooth per-cycle advance (a cos^2(pi t/T) template whose amplitude is
    fitted on clean samples farther out) removed.
    """
    n = len(diffs)
    t_jump = 0.5 * (times[i_jump] + times[i_jump + 1])
    u = np.arange(n)  # diff j spans times[j] -> times[j+1]
    t_mid = 0.5 * (times[:-1] + times[1:])
    template = np.cos(np.pi * t_mid / T) ** 2
    dist = np.abs(u - i_jump)
    fit_sel = (dist >= fit_lo) & (dist <= fit_hi)
    if np.count_nonzero(fit_sel) < 4:
        return float(diffs[i_jump])
    denom = float(np.sum(template[fit_sel] ** 2))
    if denom <= 0.0:
        return float(diffs[i_jump])
    amp = -float(np.sum(diffs[fit_sel] * template[fit_sel])) / denom
    span_sel = dist <= bridge
    total = float(np.sum(diffs[span_sel]))
    smooth = -amp * float(np.sum(template[span_sel]))
    return float(principal(total - smooth))


def detect_pi_jumps(times: np.ndarray, beta0: np.ndarray, T: float,
                    threshold: float = np.pi / 2) -> list[PhaseJump]:
    """Locate sudden ~pi discontinuities in a per-cycle beta(0, t) series.

    A consecutive-sample difference counts when its principal value exceeds
    the threshold.  Near-pi differences also arise where the smooth overlap
    phase sweeps fast (its rate rises to 2*N*pi per cycle mid-window); those
    appear as long runs of flagged pairs, whereas a branch jump is isolated,
    so only clusters of at most two flagged pairs are reported as jumps.
    The reported magnitude bridges the ill-conditioned samples around the
    crossing (see _bridged_magnitude).
    """
    beta0 = np.asarray(beta0)
    diffs = principal(np.diff(beta0))
    flagged = np.nonzero(np.abs(diffs) > threshold)[0]
    jumps: list[PhaseJump] = []
    if len(flagged) == 0:
        return jumps
    clusters = np.split(flagged, np.nonzero(np.diff(flagged) > 1)[0] + 1)
    for cluster in clusters:
        if len(cluster) > 2:
            continue  # smooth phase sweep, not a branch jump
        i = cluster[int(np.argmax(np.abs(diffs[cluster])))]
        t_mid = 0.5 * (times[i] + times[i + 1])
        mag = _bridged_magnitude(times, diffs, i, T)
        jumps.append(PhaseJump(t=float(t_mid), t_over_T=float(t_mid / T),
                               magnitude=mag))
    return jumps


def analyze(traj: Trajectory, T: float | None = None) -> PhaseSeries:
    """One-stop extraction: theta, beta0, beta1 (principal), and pi-jumps."""
    theta = dynamical_phase(traj)
    b0_t, b0 = beta0_series(traj, theta)
    b1_t, b1 = beta1_series(traj, theta)
    jumps = [] if T is None else detect_pi_jumps(b0_t, b0, T)
    return PhaseSeries(times=traj.times, theta=theta,
                       beta0_times=b0_t, beta0=b0,
                       beta1_times=b1_t, beta1=b1,
                       jumps=jumps, rabi_period=T)
