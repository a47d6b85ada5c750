"""CSV emission. Every float is written with 17 significant digits."""
from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import GridSpec

ENV_OUT = "LOGITMFG_OUT"


def resolve_out_dir(out_dir) -> Path:
    """Output directory, overridden by the ``LOGITMFG_OUT`` environment variable."""
    return Path(os.environ.get(ENV_OUT) or out_dir)


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def auto_stride(grid: GridSpec) -> int:
    """One snapshot per unit of time."""
    return max(1, int(round(1.0 / grid.dt)))


def _field_rows(times, x, values):
    for t, row in zip(times, values):
        for xl, v in zip(x, row):
            yield t, xl, v


def write_field(path, grid: GridSpec, times, values, column: str) -> Path:
    """Long-format ``t, x, <column>`` rows for one type's ``(n_snapshots, n_x)`` array."""
    return write_csv(path, ("t", "x", column), _field_rows(times, grid.centers, values))


def emit_density(out_dir, grid: GridSpec, masses, stride: int, times=None) -> list:
    """``density_<i>.csv`` for a mass field ``(I, n_snapshots, n_x)``.

    Without ``times`` the snapshots are taken to be every time step and the
    ``stride`` thins them; the final step is always included.
    """
    masses = np.asarray(masses)
    if times is None:
        idx = _strided(masses.shape[1], stride)
        times = np.asarray(idx) * grid.dt
        masses = masses[:, idx]
    return [write_field(Path(out_dir) / f"density_{i + 1}.csv", grid, times, masses[i] / grid.dx, "p")
            for i in range(masses.shape[0])]


def emit_value(out_dir, grid: GridSpec, values, stride: int) -> list:
    values = np.asarray(values)
    idx = _strided(values.shape[1], stride)
    times = np.asarray(idx) * grid.dt
    return [write_field(Path(out_dir) / f"value_{i + 1}.csv", grid, times, values[i, idx], "phi")
            for i in range(values.shape[0])]


def _strided(n_snap: int, stride: int):
    idx = list(range(0, n_snap, max(1, stride)))
    if idx[-1] != n_snap - 1:
        idx.append(n_snap - 1)
    return idx


def emit_stationary(out_dir, grid: GridSpec, density, name: str = "stationary.csv") -> Path:
    """``x, p_1, ..., p_I`` for a density slice ``(I, n_x)``."""
    density = np.asarray(density)
    header = ["x"] + [f"p_{i + 1}" for i in range(density.shape[0])]
    rows = ([x] + list(col) for x, col in zip(grid.centers, density.T))
    return write_csv(Path(out_dir) / name, header, rows)


def emit_report(out_dir, name: str, header, rows) -> Path:
    return write_csv(Path(out_dir) / f"report_{name}.csv", header, rows)


def read_csv(path) -> tuple:
    """Header and float rows of a file written by this module."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(v) if _num(v) else v for v in row] for row in r]
    return header, rows


def _num(v: str) -> bool:
    try:
        float(v)
    except ValueError:
        return False
    return True
