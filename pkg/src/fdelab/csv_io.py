"""CSV serialisation.  Every file has a header row; floats use 17 significant digits."""

import csv
import math
from pathlib import Path

import numpy as np

from .state_space import HistorySegment, default_nodes


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.17g" % x
    return str(x)


def write_rows(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def _grid_rows(times, values):
    _, m, n = values.shape
    for i, t in enumerate(times):
        for c in range(m):
            for j in range(n):
                yield (float(t), c, j, float(values[i, c, j]))


def write_segment(path, seg):
    return write_rows(path, ["theta", "component", "node", "value"], _grid_rows(seg.theta, seg.values))


def read_segment(path, nodes=None):
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["theta", "component", "node", "value"]:
            raise ValueError(f"unexpected segment header {reader.fieldnames}")
        rows = [(float(r["theta"]), int(r["component"]), int(r["node"]), float(r["value"])) for r in reader]
    thetas = sorted({r[0] for r in rows})
    m = max(r[1] for r in rows) + 1
    n = max(r[2] for r in rows) + 1
    index = {th: i for i, th in enumerate(thetas)}
    vals = np.zeros((len(thetas), m, n))
    for th, c, j, v in rows:
        vals[index[th], c, j] = v
    tau = -thetas[0]
    return HistorySegment(tau, vals, default_nodes(n) if nodes is None else nodes)


def write_trajectory(path, traj):
    return write_rows(path, ["t", "component", "node", "value"], _grid_rows(traj.t_nodes, traj.values))


def write_convergence(path, table):
    return write_rows(path, ["h", "error", "observed_order"],
                      ((row.h, row.error, row.observed_order) for row in table.rows))


def write_history(path, history):
    return write_rows(path, ["iter", "residual"], enumerate(history))
