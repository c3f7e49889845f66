"""Tiny CSV helpers: headered, fixed column order, full-precision floats.

Values are written with ``repr(float(v))`` so identical numbers produce
identical bytes, which the determinism guarantees rely on.
"""

from __future__ import annotations

import numpy as np


def format_value(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_rows(path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def append_row(path, header: list[str], row) -> None:
    """Append one row, writing the header first if the file does not exist."""
    try:
        needs_header = False
        with open(path) as fh:
            needs_header = fh.readline().strip() == ""
    except FileNotFoundError:
        needs_header = True
    with open(path, "a") as fh:
        if needs_header:
            fh.write(",".join(header) + "\n")
        fh.write(",".join(format_value(v) for v in row) + "\n")


def write_matrix(path, x: np.ndarray, prefix: str = "x_") -> None:
    """Sample matrix as CSV with columns x_0..x_{d-1}."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected a (n, d) matrix")
    header = [f"{prefix}{j}" for j in range(x.shape[1])]
    write_rows(path, header, x)


def read_matrix(path) -> np.ndarray:
    """Read a headered numeric CSV back into an array (possibly 0 rows)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        return np.empty((0, len(header)))
    return data


def write_trajectories(path, times: np.ndarray, blocks: np.ndarray) -> None:
    """Trajectory dump: columns t, x_0..x_{d-1}; one block of rows per
    trajectory, blocks separated by t restarting at its initial value."""
    blocks = np.asarray(blocks, dtype=float)  # (n_traj, n_points, d)
    header = ["t"] + [f"x_{j}" for j in range(blocks.shape[2])]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for traj in blocks:
            for t, row in zip(times, traj):
                fh.write(",".join([format_value(t)] + [format_value(v) for v in row]) + "\n")
