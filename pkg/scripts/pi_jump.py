#!/usr/bin/env python3
"""Accumulated geometric phase across the lowest resonance and its pi-jump.

Runs the cylindrical cavity at the n = 2 transition frequency (eps = 0.01)
for 1.3 Rabi periods and writes phases.csv plus the jump report; the jump
sits at t/T = 1/2.
"""

import argparse
from pathlib import Path

from cavityphase.cavity import build_basis, geometry_from_name
from cavityphase.cli import parse_config, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/pi_jump"))
    args = ap.parse_args()
    basis = build_basis(geometry_from_name("cylindrical"), 16)
    cfg = parse_config(f"""
epsilon = 0.01
omega = {basis.omega_nk(2, 1)!r}
n = 2
N = 1
span_rabi = 1.3
""")
    cfg["command"] = "phases"
    run("phases", cfg, args.out)
    print(f"wrote {args.out}/phases.csv and {args.out}/jumps.json")


if __name__ == "__main__":
    main()
