"""Delimited output tables with a commented provenance header."""
from __future__ import annotations

import math
import os

import yaml

from . import __version__


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def header_lines(config: dict, extra: dict | None = None) -> list:
    """Comment block recording artifact version, seed and resolved configuration."""
    meta = {"artifact": "sysrisk", "version": __version__}
    if extra:
        meta.update(extra)
    body = "".join(yaml.safe_dump({k: v}, sort_keys=True, default_flow_style=False)
                   for k, v in (("run", meta), ("config", config)))
    return ["# " + ln if ln else "#" for ln in body.rstrip("\n").split("\n")]


def write_table(path, columns, rows, config: dict | None = None, extra: dict | None = None):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if config is not None:
            for ln in header_lines(config, extra):
                fh.write(ln + "\n")
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(fmt(v) for v in r) + "\n")


def read_table(path):
    """Read a table written by :func:`write_table` -> (columns, rows of strings)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    cols = lines[0].split(",")
    return cols, [ln.split(",") for ln in lines[1:]]
