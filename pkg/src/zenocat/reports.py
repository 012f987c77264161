"""CSV and manifest emission.

All numeric CSV output is rendered with shortest round-trip precision
(``repr``), so re-parsing a file reproduces the exact binary values and
re-running a manifest reproduces outputs bitwise on the same platform.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

from . import __version__
from ._backend import backend_name


def render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (int, str)):
        return str(value)
    return repr(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([render(v) for v in row])


def write_manifest(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def manifest_payload(subcommand: str, resolved_config: dict, outputs: list[str],
                     timing_s: float, extras: dict | None = None) -> dict:
    payload = {
        "subcommand": subcommand,
        "config": {k: resolved_config[k] for k in sorted(resolved_config)},
        "version": __version__,
        "backend": backend_name(),
        "outputs": sorted(outputs),
        "timing_s": timing_s,
    }
    if extras:
        payload["extras"] = extras
    return payload


def default_output_dir(explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get("ZENOCAT_OUTPUT_DIR")
    return Path(env) if env else Path("zenocat-output")
