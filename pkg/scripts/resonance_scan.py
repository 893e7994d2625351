#!/usr/bin/env python3
"""Sweep the drive frequency and record the resonance curve (scan.csv, peaks.json).

The defaults reproduce the cylindrical eps = 0.01 sweep over omega in [10, 70];
pass --geometry spherical --epsilon 0.02 for the companion curve.
"""

import argparse
from pathlib import Path

from cavityphase.cli import parse_config, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/scan"))
    ap.add_argument("--geometry", default="cylindrical")
    ap.add_argument("--epsilon", type=float, default=0.01)
    ap.add_argument("--omega-min", type=float, default=10.0)
    ap.add_argument("--omega-max", type=float, default=70.0)
    ap.add_argument("--step", type=float, default=0.5)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    cfg = parse_config(f"""
geometry = {args.geometry}
epsilon = {args.epsilon}
omega_min = {args.omega_min}
omega_max = {args.omega_max}
omega_step = {args.step}
workers = {args.workers}
""")
    cfg["command"] = "scan"
    run("scan", cfg, args.out)
    print(f"wrote {args.out}/scan.csv and {args.out}/peaks.json")


if __name__ == "__main__":
    main()
