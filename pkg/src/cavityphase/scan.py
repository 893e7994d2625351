"""Frequency sweeps, Lorentzian width fits, and Rabi-period extraction.

Each scan point evolves the ground state at one drive frequency long enough
(from the predicted width at its assigned resonance) to reach the peak of the
slow population envelope, and records the maximum energy plus the universal
scaled value ((1-eps)^2 E_max - E_k)/(E_n - E_k).  Points are independent
work items; with workers > 1 they run in separate processes and are merged
in grid order, so output is deterministic either way.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cavity import Basis, CavityConfig, Geometry, build_basis, geometry_from_name
from .evolve import PeriodPropagator, _energy_block, ground_state
from .rwa import (ResonanceSpec, assign_resonance, effective_position,
                  make_rabi, resonance_positions, width)


class FitError(RuntimeError):
    """Damped Gauss-Newton did not converge; carries the residual trace."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or []


class InsufficientSpanError(RuntimeError):
    """Energy series too short to bracket two envelope minima."""


@dataclass(frozen=True)
class RunPolicy:
    """Per-point integration budget and sampling for scans and fits."""

    span_rabi: float = 1.5
    min_periods: int = 64
    hard_cap_periods: int = 8_000_000
    offsets_per_period: int = 4
    envelope_samples: int = 4096
    rtol: float = 1e-10
    atol: float = 1e-12
    n_max: int = 8
    workers: int = 1


@dataclass(frozen=True)
class ScanPoint:
    omega: float
    e_max: float
    scaled: float
    n: int
    N: int
    delta_omega: float
    periods: int
    ambiguous: bool
    capped: bool


@dataclass
class ScanResult:
    points: list[ScanPoint]
    geometry_kind: str
    epsilon: float
    basis_size: int
    policy: RunPolicy


@dataclass(frozen=True)
class LorentzianFit:
    center: float
    fwhm: float
    amplitude: float
    residual: float
    iterations: int


@dataclass(frozen=True)
class ResonanceRow:
    N: int
    n: int
    gamma_scaled_numerical: float
    gamma_scaled_rwa: float
    rabi_period: float
    t_gamma_over_pi: float
    fit_residual: float


def _candidate_detunings(omega: float, energies, k: int, n_max: int):
    out = []
    for n in range(k + 1, n_max + 1):
        wnk = float(energies[n - 1] - energies[k - 1])
        for N in (1, 2, 3):
            out.append((abs(N * omega - wnk), n, N))
    out.sort()
    return out


def _measure_point(geometry_kind: str, basis_size: int, epsilon: float,
                   omega: float, policy: RunPolicy, want_envelope: bool = False,
                   chi_override: float | None = None):
    """Evolve one scan point and extract peak-energy observables.

    Returns a dict so the worker payload stays picklable and versionable.
    chi_override replaces the predicted slow-envelope rate when the caller
    has better local knowledge (located peaks, measured widths).
    """
    geometry = geometry_from_name(geometry_kind)
    basis = build_basis(geometry, basis_size)
    cfg = CavityConfig(geometry, epsilon, omega, basis_size)
    spec = assign_resonance(omega, basis.energies, k=1,
                            n_max=min(policy.n_max, basis_size - 2))
    eta_nk = float(basis.eta[spec.n - 1, spec.k - 1])
    sol = make_rabi(spec, epsilon, eta_nk)
    # the run must span the slow envelope; its rate is set by the detuning
    # from the mean-dilation-shifted center, not the bare one
    if chi_override is not None:
        chi_eff = chi_override
    else:
        d_eff = spec.N * (omega - effective_position(spec, epsilon))
        chi_eff = math.sqrt(sol.Gamma ** 2 + 0.25 * d_eff ** 2)
    span_t = policy.span_rabi * math.pi / chi_eff
    periods = int(math.ceil(span_t / cfg.tau))
    capped = periods > policy.hard_cap_periods
    periods = int(min(max(periods, policy.min_periods), policy.hard_cap_periods))

    cand = _candidate_detunings(omega, basis.energies, 1,
                                min(policy.n_max, basis_size - 2))
    ambiguous = len(cand) > 1 and cand[0][0] > 0 and cand[1][0] < 3.0 * cand[0][0]

    prop = PeriodPropagator(cfg, basis, policy.offsets_per_period,
                            rtol=policy.rtol, atol=policy.atol)
    stride = max(1, periods // policy.envelope_samples)
    qs = np.arange(0, periods + 1, stride)
    if qs[-1] != periods:
        qs = np.append(qs, periods)
    bounds = prop.boundary_states(ground_state(basis_size), qs)

    from .cavity import alpha_at
    e_max = -np.inf
    env = None
    env_arg = None
    for j in range(policy.offsets_per_period):
        t_off = float(prop.offset_times[j])
        block = bounds if j == 0 else prop.U_offsets[j] @ bounds
        e_j = _energy_block(block, t_off, cfg, basis.energies, basis.eta)
        e_max = max(e_max, float(np.max(e_j)))
        scaled_j = e_j / float(alpha_at(t_off, cfg)) ** 2
        if env is None:
            env = scaled_j.copy()
            env_arg = np.zeros(len(qs), dtype=int)
        else:
            better = scaled_j > env
            env[better] = scaled_j[better]
            env_arg[better] = j
    E_k = float(basis.energies[spec.k - 1])
    E_n = float(basis.energies[spec.n - 1])
    scaled = ((1.0 - epsilon) ** 2 * e_max - E_k) / (E_n - E_k)
    out = {
        "omega": omega, "e_max": e_max, "scaled": scaled, "n": spec.n,
        "N": spec.N, "delta_omega": spec.delta_omega, "periods": periods,
        "ambiguous": bool(ambiguous), "capped": bool(capped),
    }
    if want_envelope:
        # timestamp each per-cycle maximum at its own in-cycle offset
        out["envelope_times"] = qs * cfg.tau + prop.offset_times[env_arg]
        out["envelope"] = env - E_k
    return out


def _scan_worker(payload):
    kind, size, eps, omega, policy = payload[:5]
    chi_override = payload[5] if len(payload) > 5 else None
    return _measure_point(kind, size, eps, omega, policy,
                          chi_override=chi_override)


def _measure_grid(geometry_kind, basis_size, epsilon, grid, policy,
                  chi_overrides=None):
    payloads = []
    for i, w in enumerate(grid):
        chi = None if chi_overrides is None else chi_overrides[i]
        payloads.append((geometry_kind, basis_size, epsilon, float(w), policy, chi))
    if policy.workers > 1:
        with ProcessPoolExecutor(max_workers=policy.workers) as pool:
            return list(pool.map(_scan_worker, payloads))
    return [_scan_worker(p) for p in payloads]


def scan(cfg: CavityConfig, omega_grid, policy: RunPolicy | None = None) -> ScanResult:
    """Measure E_max and the scaled Lorentzian value over a frequency grid."""
    policy = policy or RunPolicy()
    grid = sorted(float(w) for w in omega_grid)
    payloads = [(cfg.geometry.kind, cfg.basis_size, cfg.epsilon, w, policy)
                for w in grid]
    if policy.workers > 1:
        with ProcessPoolExecutor(max_workers=policy.workers) as pool:
            raw = list(pool.map(_scan_worker, payloads))
    else:
        raw = [_scan_worker(p) for p in payloads]
    points = [ScanPoint(omega=r["omega"], e_max=r["e_max"], scaled=r["scaled"],
                        n=r["n"], N=r["N"], delta_omega=r["delta_omega"],
                        periods=r["periods"], ambiguous=r["ambiguous"],
                        capped=r["capped"])
              for r in raw]
    return ScanResult(points=points, geometry_kind=cfg.geometry.kind,
                      epsilon=cfg.epsilon, basis_size=cfg.basis_size,
                      policy=policy)


def build_scan_grid(basis: Basis, epsilon: float, omega_min: float,
                    omega_max: float, base_step: float = 0.5,
                    points_per_fwhm: int = 12, span_fwhms: float = 2.0,
                    n_max: int = 8, k: int = 1) -> np.ndarray:
    """Base grid plus local refinement around every predicted resonance.

    Each predicted peak at omega_nk/N gets points_per_fwhm points per
    predicted FWHM (4*Gamma/N in drive frequency) across +-span_fwhms/2.
    """
    grid = list(np.arange(omega_min, omega_max + 0.5 * base_step, base_step))
    for n, N, pos in resonance_positions(basis.energies, k=k, n_max=n_max,
                                         omega_min=omega_min, omega_max=omega_max):
        spec = ResonanceSpec(k=k, n=n, N=N,
                             omega_nk=basis.omega_nk(n, k), delta_omega=0.0)
        eta_nk = float(basis.eta[n - 1, k - 1])
        if eta_nk == 0.0:
            continue
        fwhm = 4.0 * width(spec, epsilon, eta_nk) / N
        center = effective_position(spec, epsilon)
        count = max(7, int(round(points_per_fwhm * span_fwhms)) | 1)
        local = center + np.linspace(-0.5 * span_fwhms * fwhm,
                                     0.5 * span_fwhms * fwhm, count)
        grid.extend(local[(local >= omega_min) & (local <= omega_max)])
    return np.array(sorted(set(grid)))


def fit_lorentzian(omegas, values, center0: float, fwhm0: float,
                   amplitude0: float | None = None, max_iter: int = 200,
                   xtol: float = 1e-12) -> LorentzianFit:
    """Least-squares fit of A / [1 + ((w - w0)/hw)^2] by damped Gauss-Newton.

    hw is the half width at half maximum (fwhm = 2*hw).  Damping is adaptive
    (Levenberg style): successful steps relax it, failed steps raise it.
    """
    w = np.asarray(omegas, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(w) < 7:
        raise ValueError("need at least 7 points for a width fit")
    A = float(np.max(y)) if amplitude0 is None else float(amplitude0)
    p = np.array([A, center0, 0.5 * fwhm0])
    lam = 1e-3
    residual_trace = []

    def model_and_jac(params):
        a, w0, hw = params
        u = (w - w0) / hw
        den = 1.0 + u * u
        m = a / den
        dm_da = 1.0 / den
        dm_dw0 = a * 2.0 * u / (hw * den * den)
        dm_dhw = a * 2.0 * u * u / (hw * den * den)
        return m, np.column_stack([dm_da, dm_dw0, dm_dhw])

    m, J = model_and_jac(p)
    r = y - m
    cost = float(r @ r)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        JtJ = J.T @ J
        g = J.T @ r
        try:
            step = np.linalg.solve(JtJ + lam * np.diag(np.diag(JtJ)), g)
        except np.linalg.LinAlgError:
            raise FitError("normal equations singular", residual_trace)
        p_new = p + step
        p_new[2] = abs(p_new[2])
        m_new, J_new = model_and_jac(p_new)
        r_new = y - m_new
        cost_new = float(r_new @ r_new)
        residual_trace.append(math.sqrt(cost_new / len(y)))
        if cost_new <= cost:
            converged = np.max(np.abs(step) / np.maximum(np.abs(p_new), 1e-30)) < xtol
            p, m, J, r, cost = p_new, m_new, J_new, r_new, cost_new
            lam = max(lam * 0.3, 1e-12)
            if converged:
                break
        else:
            lam *= 10.0
            if lam > 1e12:
                raise FitError("damping exhausted without progress", residual_trace)
    else:
        raise FitError(f"no convergence after {max_iter} iterations", residual_trace)
    return LorentzianFit(center=float(p[1]), fwhm=float(2.0 * p[2]),
                         amplitude=float(p[0]),
                         residual=float(np.max(np.abs(r))),
                         iterations=iterations)


def _quadratic_vertex(x1, x2, x3, y1, y2, y3):
    """Abscissa of the extremum of a quadratic through three points."""
    d1 = (y2 - y1) / (x2 - x1)
    a = ((y3 - y2) / (x3 - x2) - d1) / (x3 - x1)
    if a == 0.0:
        return x2
    return 0.5 * (x1 + x2) - d1 / (2.0 * a)


def rabi_period_from_envelope(times, envelope) -> float:
    """Oscillation period from successive minima of a slow envelope.

    Minima must be prominent against the envelope swing (sampling jitter
    produces shallow spurious dips).  The leading minimum is recovered by
    extrapolating the quadratic through the first samples (runs start at the
    envelope floor); interior minima are refined by a local quadratic with
    the true, possibly non-uniform, sample times.
    """
    from scipy.signal import find_peaks
    t = np.asarray(times, dtype=float)
    s = np.asarray(envelope, dtype=float)
    if len(s) < 5:
        raise InsufficientSpanError("envelope too short")
    swing = float(np.max(s) - np.min(s))
    if swing <= 0.0:
        raise InsufficientSpanError("flat envelope")
    interior, _ = find_peaks(-s, prominence=0.25 * swing)
    minima = []
    if s[0] <= float(np.min(s)) + 0.1 * swing:
        # the run starts on the envelope floor; refine by a quadratic when
        # the first samples rise cleanly, otherwise floor jitter dominates
        # and the start time itself is the best estimate
        if s[0] < s[1] < s[2]:
            vertex = _quadratic_vertex(t[0], t[1], t[2], s[0], s[1], s[2])
            minima.append(float(np.clip(vertex, t[0] - 2.0 * (t[1] - t[0]), t[1])))
        else:
            minima.append(float(t[0]))
    for i in interior:
        vertex = _quadratic_vertex(t[i - 1], t[i], t[i + 1],
                                   s[i - 1], s[i], s[i + 1])
        minima.append(float(np.clip(vertex, t[i - 1], t[i + 1])))
    if len(minima) < 2:
        raise InsufficientSpanError(
            f"found {len(minima)} envelope minima; need at least 2")
    return float(np.mean(np.diff(minima)))


def rabi_period(traj, E_k: float) -> float:
    """Rabi period of a trajectory from per-cycle maxima of E/alpha^2 - E_k."""
    from .cavity import alpha_at

    class _CfgView:
        epsilon = traj.epsilon
        omega = traj.omega

    spp = traj.steps_per_period
    n_per = (len(traj.times) - 1) // spp
    a2 = np.asarray(alpha_at(traj.times, _CfgView)) ** 2
    scaled = (traj.energy / a2 - E_k)[:n_per * spp].reshape(n_per, spp)
    env = scaled.max(axis=1)
    arg = scaled.argmax(axis=1) + spp * np.arange(n_per)
    return rabi_period_from_envelope(traj.times[arg], env)


def _locate_peak(geometry_kind: str, basis_size: int, epsilon: float,
                 spec: ResonanceSpec, gamma_pred: float, policy: RunPolicy,
                 max_zooms: int = 4):
    """Bracket and localize one resonance peak by coarse argmax sweeps.

    Higher-order peaks carry transition-specific O(eps^2) shifts beyond the
    mean-dilation one, easily many predicted widths, so the initial bracket
    spans both scales; the window then zooms until the half-maximum
    crossings are resolved.  Returns (center, fwhm_estimate).
    """
    N = spec.N
    fwhm_pred = 4.0 * gamma_pred / N
    center = effective_position(spec, epsilon)
    span = max(10.0 * fwhm_pred, 0.35 * epsilon ** 2 * center)
    n_pts = 21
    for _ in range(max_zooms + 3):
        grid = np.linspace(center - 0.5 * span, center + 0.5 * span, n_pts)
        raw = _measure_grid(geometry_kind, basis_size, epsilon, grid, policy,
                            chi_overrides=[gamma_pred] * n_pts)
        vals = np.array([r["scaled"] for r in raw])
        i = int(np.argmax(vals))
        if i in (0, n_pts - 1):
            center = float(grid[i])
            continue  # peak at window edge: recenter and retry
        # half-maximum crossings, linearly interpolated
        half = 0.5 * (vals[i] + float(np.min(vals)))
        left = right = None
        for j in range(i, 0, -1):
            if vals[j - 1] < half <= vals[j]:
                f = (half - vals[j - 1]) / (vals[j] - vals[j - 1])
                left = grid[j - 1] + f * (grid[j] - grid[j - 1])
                break
        for j in range(i, n_pts - 1):
            if vals[j + 1] < half <= vals[j]:
                f = (vals[j] - half) / (vals[j] - vals[j + 1])
                right = grid[j] + f * (grid[j + 1] - grid[j])
                break
        spacing = float(grid[1] - grid[0])
        if left is not None and right is not None and right - left > 2.0 * spacing:
            denom = vals[i - 1] - 2.0 * vals[i] + vals[i + 1]
            shift = 0.0 if denom >= 0 else 0.5 * (vals[i - 1] - vals[i + 1]) / denom
            return float(grid[i] + np.clip(shift, -0.5, 0.5) * spacing), \
                float(right - left)
        center = float(grid[i])
        span = max(8.0 * spacing, 4.0 * fwhm_pred) if (left is None or right is None) \
            else 3.0 * float(right - left)
        span = min(span, 10.0 * fwhm_pred + 0.35 * epsilon ** 2 * center)
    raise FitError(f"could not localize the (n={spec.n}, N={N}) peak")


def fit_width(geometry: Geometry, epsilon: float, n: int, N: int,
              basis_size: int = 16, policy: RunPolicy | None = None,
              points: int = 13, span_fwhms: float = 3.0, k: int = 1,
              locate: bool | None = None):
    """Measure the scaled width of one resonance by a local grid and fit.

    Returns (gamma_scaled_numerical, LorentzianFit, rabi_period_T).  The
    scaled width is N*fwhm/4 divided by epsilon^N |eta_nk|, directly
    comparable to gamma_N/2.  For N >= 2 the peak is first localized by a
    bracket sweep (its shift can exceed many predicted widths).
    """
    policy = policy or RunPolicy()
    basis = build_basis(geometry, basis_size)
    spec = ResonanceSpec(k=k, n=n, N=N, omega_nk=basis.omega_nk(n, k))
    eta_nk = float(basis.eta[n - 1, k - 1])
    gamma_pred = width(spec, epsilon, eta_nk)
    if locate is None:
        locate = N >= 2
    if locate:
        center, fwhm_est = _locate_peak(geometry.kind, basis_size, epsilon,
                                        spec, gamma_pred, policy)
    else:
        center, fwhm_est = effective_position(spec, epsilon), 4.0 * gamma_pred / N
    gamma_est = N * fwhm_est / 4.0
    if points % 2 == 0:
        points += 1
    grid = center + np.linspace(-0.5 * span_fwhms * fwhm_est,
                                0.5 * span_fwhms * fwhm_est, points)
    chis = [math.sqrt(gamma_est ** 2 + 0.25 * (N * (w - center)) ** 2)
            for w in grid]
    raw = _measure_grid(geometry.kind, basis_size, epsilon, grid, policy,
                        chi_overrides=chis)
    values = np.array([r["scaled"] for r in raw])
    fit = fit_lorentzian(grid, values, center0=center, fwhm0=fwhm_est)
    # Rabi period measured at the fitted center
    peak = _measure_point(geometry.kind, basis_size, epsilon,
                          float(fit.center), policy, want_envelope=True,
                          chi_override=N * fit.fwhm / 4.0)
    T = rabi_period_from_envelope(peak["envelope_times"], peak["envelope"])
    gamma_num = (N * fit.fwhm / 4.0) / (epsilon ** N * abs(eta_nk))
    return gamma_num, fit, T


def table_rows(geometry: Geometry, epsilon: float, rows,
               basis_size: int = 16, policy: RunPolicy | None = None
               ) -> list[ResonanceRow]:
    """Width table for the requested (N, n) pairs (initial level k = 1).

    Each row carries the fitted scaled width, its closed-form counterpart
    gamma_N/2, the measured Rabi period, and T*Gamma/pi.
    """
    from .rwa import scaled_width
    policy = policy or RunPolicy()
    basis = build_basis(geometry, basis_size)
    out = []
    for N, n in rows:
        spec = ResonanceSpec(k=1, n=n, N=N, omega_nk=basis.omega_nk(n, 1))
        eta_nk = float(basis.eta[n - 1, 0])
        gamma_num, fit, T = fit_width(geometry, epsilon, n, N,
                                      basis_size=basis_size, policy=policy)
        gamma_abs = gamma_num * epsilon ** N * abs(eta_nk)
        out.append(ResonanceRow(
            N=N, n=n,
            gamma_scaled_numerical=gamma_num,
            gamma_scaled_rwa=scaled_width(spec),
            rabi_period=T,
            t_gamma_over_pi=T * gamma_abs / math.pi,
            fit_residual=fit.residual))
    return out


def fit_peaks(result: ScanResult, span_fwhms: float = 2.0):
    """Lorentzian peak centers for every resonance the scan grid refines.

    Groups scan points by their assigned (n, N), fits the groups with at
    least 7 points inside the fit window, and returns
    {(n, N): LorentzianFit}.
    """
    basis = build_basis(geometry_from_name(result.geometry_kind),
                        result.basis_size)
    omegas = np.array([p.omega for p in result.points])
    scaled = np.array([p.scaled for p in result.points])
    fits = {}
    for n, N, pos in resonance_positions(
            basis.energies, k=1, n_max=min(result.policy.n_max, result.basis_size - 2),
            omega_min=float(omegas.min()), omega_max=float(omegas.max())):
        spec = ResonanceSpec(k=1, n=n, N=N, omega_nk=basis.omega_nk(n, 1))
        eta_nk = float(basis.eta[n - 1, 0])
        if eta_nk == 0.0:
            continue
        fwhm = 4.0 * width(spec, result.epsilon, eta_nk) / N
        center = effective_position(spec, result.epsilon)
        sel = np.abs(omegas - center) <= 0.5 * span_fwhms * fwhm
        if np.count_nonzero(sel) < 7:
            continue
        try:
            fits[(n, N)] = fit_lorentzian(omegas[sel], scaled[sel],
                                          center0=center, fwhm0=fwhm)
        except FitError:
            continue
    return fits
