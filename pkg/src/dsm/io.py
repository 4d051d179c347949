"""CSV loading and writing for the command-line interface.

Files are plain comma-separated text with a header row and '.' decimal
marker.  Floats are written with repr, which round-trips exactly and
makes repeated runs byte-identical.  Every command also writes a flat
key=value metadata sidecar next to its main output.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import NonpositiveWeight, ParseError, SchemaMismatch
from .scores import SampleA, SampleB

__all__ = ["RunConfig", "load_samples", "write_csv", "write_meta"]


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation needs."""

    sample_a: str | None = None
    sample_b: str | None = None
    outcome: str = "y"
    weight: str = "d"
    covariates: tuple = ()
    m: int = 3
    j: int | None = None
    n_boot: int | None = None
    alpha: float = 0.05
    seed: int = 0
    debias: bool = True
    out: str = "out.csv"
    table: str | None = None
    reps: int | None = None
    scale: str = "desk"
    threads: int | None = None


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise ParseError(f"{path}: {err.strerror or err}") from None
    if not rows:
        raise SchemaMismatch(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    width = len(header)
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ParseError(f"{path}:{ln}: expected {width} fields, got {len(row)}")
    return header, rows[1:]


def _columns(path, header, rows, names):
    missing = [n for n in names if n not in header]
    if missing:
        raise SchemaMismatch(f"{path}: missing required columns {missing}")
    idx = [header.index(n) for n in names]
    out = np.empty((len(rows), len(names)))
    for r, row in enumerate(rows):
        for c, j in enumerate(idx):
            text = row[j].strip()
            if not text:
                raise ParseError(f"{path}:{r + 2}: column {names[c]!r} is empty")
            try:
                value = float(text)
            except ValueError:
                raise ParseError(
                    f"{path}:{r + 2}: column {names[c]!r} is not a number: {text!r}"
                ) from None
            if not math.isfinite(value):
                raise ParseError(f"{path}:{r + 2}: column {names[c]!r} is not finite")
            out[r, c] = value
    return out


def load_samples(path_a, path_b, config: RunConfig):
    """Read both sample files and map columns to their roles.

    Sample A needs the covariates plus the outcome column; sample B the
    covariates plus the weight column.  Covariate order follows the
    config, not the files, so the two matrices always line up.
    """
    cov = list(config.covariates)
    if not cov:
        raise SchemaMismatch("no covariate columns configured")

    header_a, rows_a = _read_rows(path_a)
    header_b, rows_b = _read_rows(path_b)
    block_a = _columns(path_a, header_a, rows_a, cov + [config.outcome])
    block_b = _columns(path_b, header_b, rows_b, cov + [config.weight])

    d = block_b[:, -1]
    if np.any(d <= 0):
        bad = int(np.argmax(d <= 0))
        raise NonpositiveWeight(
            f"{path_b}:{bad + 2}: weight column {config.weight!r} is {float(d[bad])!r}"
        )
    return SampleA(block_a[:, :-1], block_a[:, -1]), SampleB(block_b[:, :-1], d)


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header, rows):
    """Write a rectangular table; floats via repr (exact round-trip)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_meta(path, mapping):
    """Flat key=value sidecar, one entry per line, insertion order."""
    with open(path, "w") as fh:
        for key, value in mapping.items():
            fh.write(f"{key}={_fmt(value)}\n")
