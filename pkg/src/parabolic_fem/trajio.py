"""Plain-text dumps of trajectories.

Layout::

    trajectory 1
    box <lo> <hi>
    <mesh block as written by format_mesh>
    times <N+1>
    <one time per line>
    values <N+1> <n_free>
    <one snapshot per line>

Numbers use 17 significant digits, so a dump reads back exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import format_mesh, parse_mesh
from .norms import Trajectory

__all__ = ["format_trajectory", "parse_trajectory", "dump_trajectory", "load_trajectory"]

_MAGIC = "trajectory 1"


def _row(values) -> str:
    return " ".join(f"{v:.17g}" for v in values)


def format_trajectory(traj: Trajectory) -> str:
    m = traj.mesh
    lo, hi = m.box
    parts = [_MAGIC, f"box {lo:.17g} {hi:.17g}", format_mesh(m).rstrip("\n"),
             f"times {traj.times.size}"]
    parts += [f"{t:.17g}" for t in traj.times]
    parts.append(f"values {traj.values.shape[0]} {traj.values.shape[1]}")
    parts += [_row(v) for v in traj.values]
    return "\n".join(parts) + "\n"


def parse_trajectory(text: str) -> Trajectory:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _MAGIC:
        raise ValueError("not a trajectory dump (missing header line)")
    tag, lo, hi = lines[1].split()
    if tag != "box":
        raise ValueError("expected the box line after the header")
    dim, nv, nc = (int(tok) for tok in lines[2].split())
    end_mesh = 3 + nv + nc
    m = parse_mesh(lines[2:end_mesh], box=(float(lo), float(hi)))
    tag, count = lines[end_mesh].split()
    if tag != "times":
        raise ValueError("expected the times block after the mesh")
    n_times = int(count)
    times = np.array([float(t) for t in lines[end_mesh + 1:end_mesh + 1 + n_times]])
    pos = end_mesh + 1 + n_times
    tag, rows, cols = lines[pos].split()
    if tag != "values" or int(rows) != n_times or int(cols) != m.n_free:
        raise ValueError("values block does not match the mesh and time grid")
    body = lines[pos + 1:pos + 1 + n_times]
    if len(body) != n_times:
        raise ValueError("truncated values block")
    values = np.array([[float(v) for v in ln.split()] for ln in body]).reshape(n_times, m.n_free)
    return Trajectory(m, times, values)


def dump_trajectory(traj: Trajectory, path) -> None:
    Path(path).write_text(format_trajectory(traj))


def load_trajectory(path) -> Trajectory:
    return parse_trajectory(Path(path).read_text())
