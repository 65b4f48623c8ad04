"""
Readers and writers of every file the toolkit produces.

Delimited files are tab separated, start with `# key: value` metadata lines followed by one
column header line, and print floats with `%.17g` so that reading a file back gives the
exact values that were written. Empty PMF bins are written as `nan`.
YAML is used for the manifest, window definitions and reports.
"""
import io
import logging
import os
from typing import Dict, List, Sequence, Tuple

import numpy as np
import yaml

from .analysis import GridAxis, HistogramGrid, Pmf, WeightedSamples
from .exceptions import ConfigError
from .integrator import Trajectory
from .tempering import ItsSchedule
from .utils import beta, temperature

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
FLOAT_FORMAT = "%.17g"


def plain(value):
    """
    `value` with numpy scalars and arrays turned into the Python types YAML can represent.
    """
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [plain(item) for item in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _format_value(value):
    text = yaml.safe_dump(plain(value), default_flow_style=True, sort_keys=True, width=float("inf"))
    return text.replace("\n...\n", "").strip()


def write_table(path, metadata: Dict, columns: Sequence[str], rows: np.ndarray):
    """
    Write `rows` under `# key: value` metadata lines and a column header.
    """
    rows = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    buffer = io.StringIO()
    for key, value in metadata.items():
        buffer.write(f"# {key}: {_format_value(value)}\n")
    buffer.write("\t".join(columns) + "\n")
    if len(rows):
        np.savetxt(buffer, rows, fmt=FLOAT_FORMAT, delimiter="\t")
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(buffer.getvalue())


def read_table(path) -> Tuple[Dict, List[str], np.ndarray]:
    """
    The metadata, the column names and the rows of a delimited file.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise ConfigError(os.fspath(path), f"cannot read file: {exc.strerror}") from exc
    metadata = {}
    position = 0
    while position < len(lines) and lines[position].startswith("#"):
        key, _, value = lines[position][1:].partition(":")
        metadata[key.strip()] = yaml.safe_load(value.strip()) if value.strip() else None
        position += 1
    if position >= len(lines):
        raise ConfigError(os.fspath(path), "missing column header")
    columns = lines[position].split("\t")
    body = "\n".join(line for line in lines[position + 1:] if line.strip())
    if body:
        rows = np.loadtxt(io.StringIO(body), delimiter="\t", ndmin=2)
    else:
        rows = np.zeros((0, len(columns)))
    if rows.shape[1] != len(columns):
        raise ConfigError(os.fspath(path), f"expected {len(columns)} columns, got {rows.shape[1]}")
    return metadata, columns, rows


def write_trajectory(path, trajectory: Trajectory, metadata=None):
    """
    Columns: time, replica, the coordinates, U, the collective variables, window id.
    """
    columns = (
        ["time", "replica"]
        + [f"coord:{name}" for name in trajectory.coord_names]
        + ["U"]
        + [f"cv:{name}" for name in trajectory.cv_names]
        + ["window_id"]
    )
    rows = np.column_stack(
        [
            trajectory.time,
            trajectory.replica,
            trajectory.coords.reshape(len(trajectory), -1),
            trajectory.energy,
            trajectory.cvs.reshape(len(trajectory), -1),
            np.full(len(trajectory), trajectory.window_id),
        ]
    )
    header = {"format": f"itsus-trajectory {FORMAT_VERSION}", "window_id": trajectory.window_id}
    header.update(metadata or {})
    write_table(path, header, columns, rows)


def read_trajectory(path) -> Trajectory:
    metadata, columns, rows = read_table(path)
    coord_names = tuple(c.split(":", 1)[1] for c in columns if c.startswith("coord:"))
    cv_names = tuple(c.split(":", 1)[1] for c in columns if c.startswith("cv:"))
    expected = 4 + len(coord_names) + len(cv_names)
    if len(columns) != expected or columns[:2] != ["time", "replica"]:
        raise ConfigError(os.fspath(path), "not a trajectory file")
    n_coords = len(coord_names)
    return Trajectory(
        window_id=int(metadata.get("window_id", rows[0, -1] if len(rows) else 0)),
        coord_names=coord_names,
        cv_names=cv_names,
        time=rows[:, 0].copy(),
        replica=rows[:, 1].astype(int),
        coords=rows[:, 2:2 + n_coords].copy(),
        energy=rows[:, 2 + n_coords].copy(),
        cvs=rows[:, 3 + n_coords:3 + n_coords + len(cv_names)].copy(),
    )


def write_schedule(path, schedule: ItsSchedule, metadata=None):
    """
    One row per ladder temperature: T_k, β_k, ln n_k.
    """
    header = {
        "format": f"itsus-schedule {FORMAT_VERSION}",
        "production_temperature": float(temperature(schedule.beta0)),
    }
    header.update(metadata or {})
    rows = np.column_stack([schedule.temperatures, schedule.beta_array, schedule.log_n_array])
    write_table(path, header, ["temperature", "beta", "log_n"], rows)


def read_schedule(path) -> ItsSchedule:
    metadata, columns, rows = read_table(path)
    if columns != ["temperature", "beta", "log_n"]:
        raise ConfigError(os.fspath(path), "not an ITS schedule file")
    if "production_temperature" not in metadata:
        raise ConfigError(f"{os.fspath(path)}.production_temperature", "missing")
    return ItsSchedule(
        betas=tuple(rows[:, 1]),
        log_n=tuple(rows[:, 2]),
        beta0=beta(float(metadata["production_temperature"])),
    )


def _grid_metadata(grid: HistogramGrid):
    return [axis.to_config() for axis in grid.axes]


def write_pmf(path, result: Pmf, metadata=None):
    """
    One row per bin: the bin centre on every axis, A, its uncertainty and the sample count.
    """
    grid = result.grid
    centers = np.meshgrid(*[axis.centers for axis in grid.axes], indexing="ij")
    rows = np.column_stack(
        [c.ravel() for c in centers]
        + [result.values.ravel(), result.errors.ravel(), result.counts.ravel()]
    )
    header = {
        "format": f"itsus-pmf {FORMAT_VERSION}",
        "origin": result.origin,
        "temperature": float(result.temperature),
        "gauge": "min=0",
        "grid": _grid_metadata(grid),
    }
    header.update(result.metadata)
    header.update(metadata or {})
    write_table(path, header, list(grid.names) + ["A", "error", "count"], rows)


def read_pmf(path) -> Pmf:
    metadata, columns, rows = read_table(path)
    if "grid" not in metadata or columns[-3:] != ["A", "error", "count"]:
        raise ConfigError(os.fspath(path), "not a PMF file")
    grid = HistogramGrid(tuple(GridAxis(**axis) for axis in metadata.pop("grid")))
    if len(rows) != grid.size:
        raise ConfigError(os.fspath(path), f"expected {grid.size} bins, got {len(rows)}")
    origin = metadata.pop("origin", "wham")
    temperature_value = float(metadata.pop("temperature"))
    for key in ("format", "gauge"):
        metadata.pop(key, None)
    return Pmf(
        grid=grid,
        values=rows[:, -3].reshape(grid.shape),
        errors=rows[:, -2].reshape(grid.shape),
        counts=rows[:, -1].astype(int).reshape(grid.shape),
        beta0=beta(temperature_value),
        origin=origin,
        metadata=metadata,
    )


def write_free_energies(path, window_ids, f, metadata=None):
    header = {"format": f"itsus-free-energies {FORMAT_VERSION}", "gauge": "f_first=0"}
    header.update(metadata or {})
    write_table(path, header, ["window_id", "f"], np.column_stack([window_ids, f]))


def read_free_energies(path):
    metadata, _, rows = read_table(path)
    return metadata, rows[:, 0].astype(int), rows[:, 1].copy()


def write_weights(path, samples, log_weights, metadata=None):
    """
    The pooled samples with their unbiased log weights, the input of the `pmf` command.
    """
    names = list(samples.cvs)
    columns = ["window_id", "replica", "time", "U"] + [f"cv:{n}" for n in names] + ["log_weight"]
    rows = np.column_stack(
        [samples.window_id, samples.replica, samples.time, samples.energy]
        + [samples.cvs[n] for n in names]
        + [log_weights]
    )
    header = {"format": f"itsus-weights {FORMAT_VERSION}"}
    header.update(metadata or {})
    write_table(path, header, columns, rows)


def read_weights(path):
    """
    The metadata and the weighted samples of a weights file.
    """
    metadata, columns, rows = read_table(path)
    if columns[:4] != ["window_id", "replica", "time", "U"] or columns[-1] != "log_weight":
        raise ConfigError(os.fspath(path), "not a weights file")
    cv_columns = columns[4:-1]
    log_weights = rows[:, -1]
    weights = np.exp(log_weights - log_weights.max()) if len(rows) else log_weights
    return metadata, WeightedSamples(
        cvs={c.split(":", 1)[1]: rows[:, 4 + i].copy() for i, c in enumerate(cv_columns)},
        weights=weights / weights.sum() if len(rows) else weights,
        energy=rows[:, 3].copy(),
        window_id=rows[:, 0].astype(int),
        replica=rows[:, 1].astype(int),
        time=rows[:, 2].copy(),
    )


def write_yaml(path, data):
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(plain(data), handle, sort_keys=False, default_flow_style=False)


def read_yaml(path):
    try:
        with open(path, encoding="utf-8") as handle:
            return yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError(os.fspath(path), f"cannot read file: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(os.fspath(path), f"invalid YAML: {exc}") from exc
