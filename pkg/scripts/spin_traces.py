#!/usr/bin/env python3
"""Spin-1/2 geometric phase traces for three cone angles.

alpha = 1/100 shows the pi-jump riding a two-rotation oscillation,
alpha = 1/101 a single-rotation oscillation without the jump, and
alpha = 5/501 neither pattern; spin_fine.csv resolves the sub-cycle
structure (t not a multiple of the rotation period).
"""

import argparse
from pathlib import Path

from cavityphase.cli import parse_config, run

CASES = [
    ("alpha_1_100", 1.0 / 100.0, 60.0),
    ("alpha_1_101", 1.0 / 101.0, 61.0),
    ("alpha_5_501", 5.0 / 501.0, 90.0),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/spin_traces"))
    args = ap.parse_args()
    for label, alpha, omega in CASES:
        cfg = parse_config(f"""
alpha = {alpha!r}
spin_omega = {omega!r}
samples_per_cycle = 16
""")
        cfg["command"] = "spin"
        out = args.out / label
        run("spin", cfg, out)
        print(f"wrote {out}/spin.csv and {out}/spin_fine.csv")


if __name__ == "__main__":
    main()
