"""Deterministic CSV/JSON emission for runs and regression tests.

Reals are printed with 17 significant digits (lossless float round-trip) so
identical inputs give byte-identical files.  Every data file opens with a
comment line carrying the sha256 of the run manifest it belongs to.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def format_real(x: float) -> str:
    return format(float(x), ".17e")


def write_manifest(path: Path, payload: dict) -> str:
    """Write the run manifest (sorted keys) and return its content hash."""
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    path.write_text(text, encoding="utf-8")
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_csv(path: Path, header: list[str], rows, manifest_hash: str) -> None:
    """Write rows of floats (or str for preformatted cells) as CSV."""
    lines = [f"# manifest_sha256={manifest_hash}", ",".join(header)]
    for row in rows:
        lines.append(",".join(
            cell if isinstance(cell, str) else format_real(cell)
            for cell in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(path: Path, payload: dict, manifest_hash: str) -> None:
    payload = dict(payload)
    payload["manifest_sha256"] = manifest_hash
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
