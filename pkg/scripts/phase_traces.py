#!/usr/bin/env python3
"""Per-cycle geometric phase traces at the first three resonance orders.

Writes one phases.csv + jumps.json per resonance: the N = 1 target level 4
trace at eps = 0.01, and the N = 2, 3 traces at a larger drive so the Rabi
period stays affordable (the per-cycle amplitude 2*N*pi does not depend on
the drive amplitude).  Higher-order peaks are localized first: their widths
shrink as eps^N while the resonance-center shift stays O(eps^2), so driving
at the bare transition frequency would miss them.
"""

import argparse
from pathlib import Path

from cavityphase.cavity import build_basis, geometry_from_name
from cavityphase.cli import parse_config, run
from cavityphase.rwa import ResonanceSpec, effective_position
from cavityphase.scan import RunPolicy, fit_width


CASES = [
    # (label, n, N, epsilon)
    ("n4_N1", 4, 1, 0.01),
    ("n3_N2", 3, 2, 0.05),
    ("n4_N3", 4, 3, 0.05),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/phase_traces"))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    geometry = geometry_from_name("cylindrical")
    basis = build_basis(geometry, 16)
    policy = RunPolicy(workers=args.workers)
    for label, n, N, eps in CASES:
        spec = ResonanceSpec(k=1, n=n, N=N, omega_nk=basis.omega_nk(n, 1))
        if N == 1:
            omega = effective_position(spec, eps)
        else:
            _, fit, _ = fit_width(geometry, eps, n=n, N=N, policy=policy)
            omega = fit.center
        cfg = parse_config(f"""
epsilon = {eps}
omega = {omega!r}
n = {n}
N = {N}
span_rabi = 1.3
workers = {args.workers}
""")
        cfg["command"] = "phases"
        out = args.out / label
        run("phases", cfg, out)
        print(f"wrote {out}/phases.csv (omega = {omega:.6f})")


if __name__ == "__main__":
    main()
