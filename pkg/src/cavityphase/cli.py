"""Command-line entry point: config parsing, experiment orchestration, CSV/JSON output.

Usage: cavityphase <command> --config <path> [--out <dir>] [--workers N]

Commands: evolve, scan, table1, phases, spin, crosscheck.  The config file is
a flat `key = value` document ('#' starts a comment); every key has a
documented default and unknown keys are rejected.  Runs are deterministic:
identical inputs produce byte-identical outputs, and each output file names
the sha256 of the run manifest.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cavity import CavityConfig, build_basis, geometry_from_name
from .io_utils import write_csv, write_json, write_manifest

COMMANDS = ("evolve", "scan", "table1", "phases", "spin", "crosscheck")


class ConfigError(ValueError):
    pass


def _positive(x):
    return x > 0


def _fraction(x):
    return 0.0 <= x < 1.0


# key: (type, default, validator or None, description)
CONFIG_SCHEMA = {
    "command": (str, "", lambda v: v in COMMANDS or v == "", "run command"),
    "geometry": (str, "cylindrical",
                 lambda v: v in ("cylindrical", "spherical"), "cavity kind"),
    "epsilon": (float, 0.01, _fraction, "drive amplitude, 0 <= eps < 1"),
    "omega": (float, 12.344, _positive, "drive frequency (dimensionless)"),
    "basis_size": (int, 16, lambda v: v >= 2, "eigenbasis truncation"),
    "steps_per_period": (int, 200, lambda v: v >= 64, "samples per drive period"),
    "coeff_stride": (int, 1, _positive, "coefficient storage stride"),
    "rtol": (float, 1e-10, _positive, "integrator relative tolerance"),
    "atol": (float, 1e-12, _positive, "integrator absolute tolerance"),
    "span_rabi": (float, 1.5, _positive, "run length in predicted Rabi periods"),
    "t_end_periods": (int, 0, lambda v: v >= 0, "run length override in drive periods"),
    "k": (int, 1, _positive, "initial level"),
    "n": (int, 2, lambda v: v >= 2, "target level"),
    "N": (int, 1, lambda v: v in (1, 2, 3), "subharmonic order"),
    "omega_min": (float, 10.0, _positive, "scan window lower edge"),
    "omega_max": (float, 70.0, _positive, "scan window upper edge"),
    "omega_step": (float, 0.5, _positive, "scan base grid step"),
    "points_per_fwhm": (int, 12, _positive, "refinement density near peaks"),
    "span_fwhms": (float, 2.0, _positive, "refinement window in predicted FWHMs"),
    "n_max": (int, 8, lambda v: v >= 2, "highest level considered in scans"),
    "min_periods": (int, 64, _positive, "minimum drive periods per scan point"),
    "hard_cap_periods": (int, 8_000_000, _positive, "hard cap on drive periods"),
    "offsets_per_period": (int, 4, _positive, "energy samples per period in scans"),
    "envelope_samples": (int, 4096, _positive, "envelope samples per scan point"),
    "rows": (str, "1:2,1:3,1:4", None, "table rows as N:n pairs"),
    "alpha": (float, 0.01, lambda v: 0.0 < v < math.pi, "spin cone angle"),
    "spin_omega": (float, 60.0, _positive, "field rotation rate"),
    "cycles": (int, 0, lambda v: v >= 0, "spin rotation cycles (0 = auto)"),
    "samples_per_cycle": (int, 8, _positive, "fine samples per rotation cycle"),
    "workers": (int, 1, _positive, "concurrent scan workers"),
}


def parse_config(text: str) -> dict:
    """Parse a flat key = value document against the schema.

    Returns the fully resolved configuration (defaults applied).  Unknown
    keys, type mismatches, and invariant violations name the key and line.
    """
    resolved = {key: spec[1] for key, spec in CONFIG_SCHEMA.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        typ, _, check, _ = CONFIG_SCHEMA[key]
        try:
            parsed = typ(value)
        except ValueError:
            raise ConfigError(
                f"line {lineno}: key {key!r} expects {typ.__name__}, got {value!r}")
        if check is not None and not check(parsed):
            raise ConfigError(f"line {lineno}: key {key!r} = {parsed!r} violates its invariant")
        resolved[key] = parsed
    return resolved


def config_to_text(resolved: dict) -> str:
    """Render a resolved configuration back to the key = value format."""
    lines = [f"{key} = {resolved[key]}" for key in sorted(resolved)]
    return "\n".join(lines) + "\n"


def _cavity_config(cfg: dict) -> CavityConfig:
    return CavityConfig(geometry_from_name(cfg["geometry"]), cfg["epsilon"],
                        cfg["omega"], cfg["basis_size"])


def _policy(cfg: dict):
    from .scan import RunPolicy
    return RunPolicy(span_rabi=cfg["span_rabi"], min_periods=cfg["min_periods"],
                     hard_cap_periods=cfg["hard_cap_periods"],
                     offsets_per_period=cfg["offsets_per_period"],
                     envelope_samples=cfg["envelope_samples"],
                     rtol=cfg["rtol"], atol=cfg["atol"], n_max=cfg["n_max"],
                     workers=cfg["workers"])


def _auto_t_end(cfg: dict, cavity: CavityConfig) -> float:
    from .rwa import ResonanceSpec, width
    basis = build_basis(cavity.geometry, cavity.basis_size)
    if cfg["t_end_periods"] > 0:
        return cfg["t_end_periods"] * cavity.tau
    spec = ResonanceSpec(k=cfg["k"], n=cfg["n"], N=cfg["N"],
                         omega_nk=basis.omega_nk(cfg["n"], cfg["k"]))
    eta_nk = float(basis.eta[cfg["n"] - 1, cfg["k"] - 1])
    return cfg["span_rabi"] * math.pi / width(spec, cavity.epsilon, eta_nk)


def _run_evolve(cfg: dict, out: Path, manifest_hash: str) -> None:
    from .evolve import evolve, ground_state
    cavity = _cavity_config(cfg)
    traj = evolve(cavity, ground_state(cavity.basis_size), _auto_t_end(cfg, cavity),
                  steps_per_period=cfg["steps_per_period"], rtol=cfg["rtol"],
                  atol=cfg["atol"], coeff_stride=cfg["coeff_stride"])
    m = traj.coeffs.shape[1]
    header = (["t"] + [f"re_a{i+1}" for i in range(m)]
              + [f"im_a{i+1}" for i in range(m)] + ["E", "norm"])
    rows = []
    for pos, i in enumerate(traj.coeff_index):
        c = traj.coeffs[pos]
        rows.append([traj.times[i], *c.real, *c.imag,
                     traj.energy[i], traj.norm[i]])
    write_csv(out / "trajectory.csv", header, rows, manifest_hash)


def _run_phases(cfg: dict, out: Path, manifest_hash: str) -> None:
    from .evolve import evolve, ground_state
    from .phases import analyze
    from .scan import rabi_period
    cavity = _cavity_config(cfg)
    basis = build_basis(cavity.geometry, cavity.basis_size)
    # per-cycle phases only need coefficients at period boundaries
    traj = evolve(cavity, ground_state(cavity.basis_size), _auto_t_end(cfg, cavity),
                  steps_per_period=cfg["steps_per_period"], rtol=cfg["rtol"],
                  atol=cfg["atol"], coeff_stride=cfg["steps_per_period"])
    T = rabi_period(traj, float(basis.energies[cfg["k"] - 1]))
    series = analyze(traj, T=T)
    b1 = dict(zip(np.round(series.beta1_times / traj.tau).astype(int), series.beta1))
    rows = []
    for t, b0 in zip(series.beta0_times, series.beta0):
        q = int(round(t / traj.tau))
        idx = q * traj.steps_per_period
        rows.append([t / traj.tau, series.theta[idx], b0, b1.get(q, math.nan)])
    write_csv(out / "phases.csv", ["t_over_tau", "theta", "beta0", "beta1"],
              rows, manifest_hash)
    write_json(out / "jumps.json", {
        "rabi_period": T,
        "jumps": [{"t": j.t, "t_over_T": j.t_over_T, "magnitude": j.magnitude}
                  for j in series.jumps],
    }, manifest_hash)


def _run_scan(cfg: dict, out: Path, manifest_hash: str) -> None:
    from .scan import build_scan_grid, fit_peaks, scan
    cavity = _cavity_config(cfg)
    basis = build_basis(cavity.geometry, cavity.basis_size)
    grid = build_scan_grid(basis, cavity.epsilon, cfg["omega_min"], cfg["omega_max"],
                           base_step=cfg["omega_step"],
                           points_per_fwhm=cfg["points_per_fwhm"],
                           span_fwhms=cfg["span_fwhms"], n_max=cfg["n_max"])
    result = scan(cavity, grid, _policy(cfg))
    rows = [[p.omega, p.e_max, p.scaled, str(p.n), str(p.N), p.delta_omega,
             str(int(p.ambiguous)), str(int(p.capped))] for p in result.points]
    write_csv(out / "scan.csv",
              ["omega", "e_max", "scaled", "n", "N", "delta_omega",
               "ambiguous", "capped"], rows, manifest_hash)
    peaks = fit_peaks(result)
    write_json(out / "peaks.json", {
        "peaks": [{"n": n, "N": N, "center": f.center, "fwhm": f.fwhm,
                   "amplitude": f.amplitude, "residual": f.residual}
                  for (n, N), f in sorted(peaks.items())],
    }, manifest_hash)


def _run_table1(cfg: dict, out: Path, manifest_hash: str) -> None:
    from .scan import table_rows
    geometry = geometry_from_name(cfg["geometry"])
    try:
        rows_spec = [tuple(int(x) for x in pair.split(":"))
                     for pair in cfg["rows"].split(",") if pair.strip()]
        if not all(len(r) == 2 for r in rows_spec):
            raise ValueError
    except ValueError:
        raise ConfigError(f"key 'rows': expected 'N:n,N:n,...', got {cfg['rows']!r}")
    table = table_rows(geometry, cfg["epsilon"], rows_spec,
                       basis_size=cfg["basis_size"], policy=_policy(cfg))
    rows = [[str(r.N), str(r.n), r.gamma_scaled_numerical, r.gamma_scaled_rwa,
             r.rabi_period, r.t_gamma_over_pi, r.fit_residual] for r in table]
    write_csv(out / "table1.csv",
              ["N", "n", "gamma_scaled_numerical", "gamma_scaled_rwa",
               "rabi_period", "t_gamma_over_pi", "fit_residual"],
              rows, manifest_hash)


def _run_spin(cfg: dict, out: Path, manifest_hash: str) -> None:
    from .spin import (resonant_config, spin_beta0, spin_beta0_exact, spin_beta1)
    sc = resonant_config(cfg["alpha"], cfg["spin_omega"])
    cycles = cfg["cycles"]
    if cycles == 0:
        cycles = int(math.ceil(1.25 * sc.rabi_period / sc.tau))
    T = sc.rabi_period
    rows = []
    for q in range(cycles + 1):
        b0 = spin_beta0(q, sc)
        b1 = spin_beta1(q * sc.tau, sc) if q < cycles else math.nan
        rows.append([q * sc.tau / T, b0, b1])
    write_csv(out / "spin.csv", ["t_over_T", "beta0", "beta1"], rows, manifest_hash)
    fine = np.arange(cycles * cfg["samples_per_cycle"] + 1) \
        * (sc.tau / cfg["samples_per_cycle"])
    rows_fine = [[t / T, float(spin_beta0_exact(t, sc))] for t in fine]
    write_csv(out / "spin_fine.csv", ["t_over_T", "beta0"], rows_fine, manifest_hash)


def _run_crosscheck(cfg: dict, out: Path, manifest_hash: str) -> None:
    from .evolve import evolve, ground_state
    from .rwa import ResonanceSpec, make_rabi, rabi_amplitudes
    from .su2 import su2_trajectory
    geometry = geometry_from_name(cfg["geometry"])
    basis = build_basis(geometry, cfg["basis_size"])
    k, n, N = cfg["k"], cfg["n"], cfg["N"]
    spec = ResonanceSpec(k=k, n=n, N=N, omega_nk=basis.omega_nk(n, k))
    cavity = CavityConfig(geometry, cfg["epsilon"], spec.omega_nk / N,
                          cfg["basis_size"])
    eta_nk = float(basis.eta[n - 1, k - 1])
    sol = make_rabi(spec, cfg["epsilon"], eta_nk)
    t_end = cfg["span_rabi"] * math.pi / sol.Gamma
    traj_full = evolve(cavity, ground_state(cfg["basis_size"]), t_end,
                       steps_per_period=cfg["steps_per_period"],
                       rtol=cfg["rtol"], atol=cfg["atol"],
                       coeff_stride=cfg["steps_per_period"])
    traj_su2 = su2_trajectory(k, n, cavity, basis, t_end,
                              steps_per_period=cfg["steps_per_period"],
                              tol=cfg["rtol"])
    spp = cfg["steps_per_period"]
    qs = np.arange(0, (len(traj_full.times) - 1) // spp + 1)
    times = qs * cavity.tau
    p_full = np.abs(traj_full.coeffs[:len(qs), n - 1]) ** 2
    su2_idx = qs * spp
    p_su2 = np.abs(traj_su2.coeffs[su2_idx, 1]) ** 2
    p_rwa = np.abs(rabi_amplitudes(times, sol, spec.delta_omega)[1]) ** 2
    rows = [[t, a, b, c] for t, a, b, c in zip(times, p_full, p_su2, p_rwa)]
    write_csv(out / "crosscheck.csv",
              ["t", "pn_full", "pn_su2", "pn_rwa"], rows, manifest_hash)
    write_json(out / "crosscheck_summary.json", {
        "max_dev_full_su2": float(np.max(np.abs(p_full - p_su2))),
        "max_dev_full_rwa": float(np.max(np.abs(p_full - p_rwa))),
        "max_dev_su2_rwa": float(np.max(np.abs(p_su2 - p_rwa))),
    }, manifest_hash)


_RUNNERS = {
    "evolve": _run_evolve,
    "phases": _run_phases,
    "scan": _run_scan,
    "table1": _run_table1,
    "spin": _run_spin,
    "crosscheck": _run_crosscheck,
}


def run(command: str, cfg: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    import scipy
    manifest = {
        "tool": "cavityphase",
        "version": __version__,
        "command": command,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "seeds": None,  # fully deterministic; nothing stochastic anywhere
        "library_versions": {"numpy": np.__version__, "scipy": scipy.__version__},
    }
    manifest_hash = write_manifest(out_dir / "manifest.json", manifest)
    _RUNNERS[command](cfg, out_dir, manifest_hash)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cavityphase", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, default=None,
                        help="flat key = value configuration document")
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--workers", type=int, default=None,
                        help="overrides config and CAVITYPHASE_WORKERS")
    args = parser.parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text)
        if cfg["command"] and cfg["command"] != args.command:
            raise ConfigError(
                f"config file says command = {cfg['command']!r}, "
                f"CLI says {args.command!r}")
        cfg["command"] = args.command
        env_workers = os.environ.get("CAVITYPHASE_WORKERS")
        if env_workers is not None:
            try:
                cfg["workers"] = int(env_workers)
            except ValueError:
                raise ConfigError("CAVITYPHASE_WORKERS must be an integer")
        if args.workers is not None:
            cfg["workers"] = args.workers
        if cfg["workers"] < 1:
            raise ConfigError("workers must be >= 1")
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}))
        return 2
    try:
        run(args.command, cfg, args.out)
    except Exception as exc:  # all failures map to the numerical exit code
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
