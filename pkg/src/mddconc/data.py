"""Concurrent functional datasets: container, CSV I/O and preprocessing.

Two on-disk layouts are supported.

Long
    One UTF-8 file with header ``curve_id,variable,time,value``, one row per
    observed cell. Absent rows are missing cells.
Wide
    A directory holding one ``<variable>.csv`` per variable. The header row is
    ``curve_id`` followed by the time values; each further row is one curve.
    Empty cells are missing.

Written files use LF line endings, 17 significant digits, and rows ordered by
curve id, then time.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ExtrapolationError, InputError, MissingDataError, ParseError

__all__ = [
    "ConcurrentDataset",
    "check_grid",
    "load_long_csv",
    "save_long_csv",
    "load_wide_csv",
    "save_wide_csv",
    "load_dataset",
    "spline_fill",
    "center_variables",
    "resolve_subset",
]

LONG_HEADER = ["curve_id", "variable", "time", "value"]


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def check_grid(grid) -> np.ndarray:
    """Validate a time grid: finite, strictly increasing, at least 2 points."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise InputError(f"time grid needs at least 2 instants, got shape {grid.shape}")
    if not np.all(np.isfinite(grid)):
        raise InputError("time grid contains non-finite values")
    steps = np.diff(grid)
    if np.any(steps <= 0):
        u = int(np.flatnonzero(steps <= 0)[0])
        raise InputError(f"time grid is not strictly increasing at index {u + 1}")
    return grid


@dataclass(frozen=True, eq=False)
class ConcurrentDataset:
    """Response and covariate curves observed on a shared time grid.

    Parameters
    ----------
    grid : (T,) ndarray
        Strictly increasing observation instants.
    response : (n, T) ndarray
        ``response[i, u]`` is ``Y_i(t_u)``. Missing cells hold NaN.
    covariates : (p, n, T) ndarray
        ``covariates[j, i, u]`` is ``X_ij(t_u)``.
    covariate_names, curve_ids : tuple of str
    response_name : str
    missing : (p + 1, n, T) bool ndarray or None
        Missing-cell mask; layer 0 is the response. ``None`` means complete.
    provenance : dict
        Free-form metadata (generator settings, preprocessing applied).
    """

    grid: np.ndarray
    response: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple = ()
    curve_ids: tuple = ()
    response_name: str = "Y"
    missing: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = check_grid(self.grid).copy()
        response = np.array(self.response, dtype=float)
        covariates = np.array(self.covariates, dtype=float)
        if covariates.ndim == 2:
            covariates = covariates[None]
        if response.ndim != 2 or response.shape[1] != grid.size:
            raise InputError(
                f"response must have shape (n, {grid.size}), got {response.shape}")
        if covariates.ndim != 3 or covariates.shape[1:] != response.shape:
            raise InputError(
                f"covariates must have shape (p, {response.shape[0]}, {grid.size}), "
                f"got {covariates.shape}")
        p, n, _ = covariates.shape
        if p < 1:
            raise InputError("at least one covariate is required")
        names = tuple(self.covariate_names) or tuple(f"X{j + 1}" for j in range(p))
        ids = tuple(self.curve_ids) or tuple(str(i + 1) for i in range(n))
        if len(names) != p or len(set(names)) != p:
            raise InputError(f"need {p} distinct covariate names, got {names}")
        if len(ids) != n or len(set(ids)) != n:
            raise InputError(f"need {n} distinct curve ids")
        if self.response_name in names:
            raise InputError(f"response name {self.response_name!r} clashes with a covariate")
        missing = self.missing
        if missing is not None:
            missing = np.array(missing, dtype=bool)
            if missing.shape != (p + 1, n, grid.size):
                raise InputError(f"missing mask must have shape {(p + 1, n, grid.size)}")
            if not missing.any():
                missing = None
        values = np.concatenate([response[None], covariates])
        unmarked = ~np.isfinite(values) if missing is None else ~np.isfinite(values) & ~missing
        if unmarked.any():
            k, i, u = np.argwhere(unmarked)[0]
            raise InputError(f"non-finite value at variable {k}, curve {ids[i]!r}, instant {u}")
        for name, value in [("grid", grid), ("response", response), ("covariates", covariates),
                            ("covariate_names", names), ("curve_ids", ids), ("missing", missing)]:
            object.__setattr__(self, name, value)
        for arr in (grid, response, covariates, missing):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.response.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[0]

    @property
    def T(self) -> int:
        return self.grid.size

    @property
    def variable_names(self) -> tuple:
        return (self.response_name,) + self.covariate_names

    @property
    def is_complete(self) -> bool:
        return self.missing is None

    def require_complete(self) -> None:
        if self.missing is not None:
            k, i, u = np.argwhere(self.missing)[0]
            raise MissingDataError(
                f"{int(self.missing.sum())} missing cells (first: variable "
                f"{self.variable_names[k]!r}, curve {self.curve_ids[i]!r}, "
                f"t={self.grid[u]!r}); fill them with spline_fill first")

    def values(self) -> np.ndarray:
        """Stacked ``(p + 1, n, T)`` array, response first."""
        return np.concatenate([self.response[None], self.covariates])


def _from_stack(stack, missing, grid, names, ids, response_name, provenance=None):
    return ConcurrentDataset(
        grid=grid, response=stack[0], covariates=stack[1:], covariate_names=tuple(names),
        curve_ids=tuple(ids), response_name=response_name, missing=missing,
        provenance=dict(provenance or {}))


def _parse_float(text, what, where):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{where}: {what} {text!r} is not numeric") from None
    if not np.isfinite(value):
        raise ParseError(f"{where}: {what} {text!r} is not finite")
    return value


def load_long_csv(path, response_name: str = "Y", min_curves: int = 4) -> ConcurrentDataset:
    """Read a long-format CSV into a dataset.

    The grid is the sorted union of observed times. Curves and covariates
    are ordered lexicographically. Any (curve, variable, time) without a
    row is marked missing.

    Raises
    ------
    ParseError
        Bad header, non-numeric field, duplicate record, no response
        variable, or fewer than ``min_curves`` curves.
    """
    path = Path(path)
    records = {}
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != LONG_HEADER:
            raise ParseError(f"{path}: header must be {','.join(LONG_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            where = f"{path}:{lineno}"
            if len(row) != 4:
                raise ParseError(f"{where}: expected 4 fields, got {len(row)}")
            curve, variable = row[0].strip(), row[1].strip()
            time = _parse_float(row[2], "time", where)
            value = _parse_float(row[3], "value", where)
            key = (curve, variable, time)
            if key in records:
                raise ParseError(
                    f"{where}: duplicate record for curve {curve!r}, variable "
                    f"{variable!r}, time {row[2].strip()} (first seen on line {records[key][1]})")
            records[key] = (value, lineno)

    variables = sorted({k[1] for k in records})
    if response_name not in variables:
        raise ParseError(f"{path}: no response variable {response_name!r} (found {variables})")
    covariate_names = [v for v in variables if v != response_name]
    if not covariate_names:
        raise ParseError(f"{path}: no covariate variables besides {response_name!r}")
    curves = sorted({k[0] for k in records})
    if len(curves) < min_curves:
        raise ParseError(f"{path}: need at least {min_curves} curves, found {len(curves)}")
    times = sorted({k[2] for k in records})

    order = [response_name] + covariate_names
    var_index = {v: k for k, v in enumerate(order)}
    curve_index = {c: i for i, c in enumerate(curves)}
    time_index = {t: u for u, t in enumerate(times)}
    stack = np.full((len(order), len(curves), len(times)), np.nan)
    for (curve, variable, time), (value, _) in records.items():
        stack[var_index[variable], curve_index[curve], time_index[time]] = value
    return _from_stack(stack, np.isnan(stack), np.array(times), covariate_names, curves,
                       response_name, {"source": str(path), "format": "long"})


def save_long_csv(dataset: ConcurrentDataset, path) -> None:
    """Write a dataset in long format; missing cells are omitted."""
    path = Path(path)
    stack = dataset.values()
    missing = dataset.missing
    order = sorted(range(dataset.n), key=lambda i: dataset.curve_ids[i])
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LONG_HEADER)
        for i in order:
            for u, t in enumerate(dataset.grid):
                for k, name in enumerate(dataset.variable_names):
                    if missing is not None and missing[k, i, u]:
                        continue
                    writer.writerow([dataset.curve_ids[i], name, _fmt(t), _fmt(stack[k, i, u])])


def _read_wide_file(path):
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = rows[0]
    if header[0].strip() != "curve_id":
        raise ParseError(f"{path}: first header cell must be 'curve_id', got {header[0]!r}")
    times = [_parse_float(h, "time", f"{path}:1") for h in header[1:]]
    if len(set(times)) != len(times):
        raise ParseError(f"{path}:1: repeated time in header")
    curves = {}
    for lineno, row in enumerate(rows[1:], start=2):
        where = f"{path}:{lineno}"
        if len(row) != len(header):
            raise ParseError(f"{where}: expected {len(header)} fields, got {len(row)}")
        curve = row[0].strip()
        if curve in curves:
            raise ParseError(f"{where}: duplicate curve {curve!r}")
        curves[curve] = [np.nan if not cell.strip() else _parse_float(cell, "value", where)
                         for cell in row[1:]]
    return times, curves


def load_wide_csv(directory, response_name: str = "Y", min_curves: int = 4) -> ConcurrentDataset:
    """Read a directory of per-variable wide CSV files.

    Raises
    ------
    ParseError
        Malformed file, grids that differ between files (the differing
        times are listed), or curve sets that differ between files.
    """
    directory = Path(directory)
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise ParseError(f"{directory}: no .csv files found")
    tables = {f.stem: _read_wide_file(f) for f in files}
    if response_name not in tables:
        raise ParseError(f"{directory}: no {response_name}.csv (found {sorted(tables)})")
    covariate_names = sorted(v for v in tables if v != response_name)
    if not covariate_names:
        raise ParseError(f"{directory}: no covariate files besides {response_name}.csv")

    ref_times, ref_curves = tables[response_name]
    for name in covariate_names:
        times, curves = tables[name]
        if set(times) != set(ref_times):
            diff = sorted(set(times) ^ set(ref_times))
            raise ParseError(
                f"{directory}: time grid of {name}.csv differs from {response_name}.csv "
                f"at times {[_fmt(t) for t in diff]}")
        if set(curves) != set(ref_curves):
            diff = sorted(set(curves) ^ set(ref_curves))
            raise ParseError(
                f"{directory}: curve set of {name}.csv differs from {response_name}.csv: {diff}")
    curve_ids = sorted(ref_curves)
    if len(curve_ids) < min_curves:
        raise ParseError(f"{directory}: need at least {min_curves} curves, found {len(curve_ids)}")
    grid = np.array(sorted(ref_times))

    order = [response_name] + covariate_names
    stack = np.empty((len(order), len(curve_ids), grid.size))
    for k, name in enumerate(order):
        times, curves = tables[name]
        perm = np.argsort(times)
        for i, curve in enumerate(curve_ids):
            stack[k, i] = np.asarray(curves[curve])[perm]
    return _from_stack(stack, np.isnan(stack), grid, covariate_names, curve_ids,
                       response_name, {"source": str(directory), "format": "wide"})


def save_wide_csv(dataset: ConcurrentDataset, directory) -> list:
    """Write one ``<variable>.csv`` per variable into ``directory``.

    Returns the list of written paths.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stack = dataset.values()
    order = sorted(range(dataset.n), key=lambda i: dataset.curve_ids[i])
    written = []
    for k, name in enumerate(dataset.variable_names):
        path = directory / f"{name}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["curve_id"] + [_fmt(t) for t in dataset.grid])
            for i in order:
                cells = ["" if dataset.missing is not None and dataset.missing[k, i, u]
                         else _fmt(stack[k, i, u]) for u in range(dataset.T)]
                writer.writerow([dataset.curve_ids[i]] + cells)
        written.append(path)
    return written


def load_dataset(path, response_name: str = "Y", min_curves: int = 4) -> ConcurrentDataset:
    """Load a wide-format directory or a long-format file, chosen by path type."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file or directory: {path}")
    if path.is_dir():
        return load_wide_csv(path, response_name, min_curves)
    return load_long_csv(path, response_name, min_curves)


def _fill_curve(grid, values, observed, extrapolate, label):
    """Fill one curve in place; return the number of extrapolated cells."""
    t_obs = grid[observed]
    if t_obs.size < 2:
        raise InputError(f"{label} has {t_obs.size} observation(s); at least 2 are needed")
    spline = CubicSpline(t_obs, values[observed], bc_type="natural", extrapolate=False)
    holes = np.flatnonzero(~observed)
    t_holes = grid[holes]
    outside = (t_holes < t_obs[0]) | (t_holes > t_obs[-1])
    if outside.any() and not extrapolate:
        raise ExtrapolationError(
            f"{label}: filling t={t_holes[outside][0]!r} needs extrapolation outside "
            f"[{t_obs[0]!r}, {t_obs[-1]!r}]; enable extrapolate to allow it")
    inside = holes[~outside]
    values[inside] = spline(grid[inside])
    if outside.any():
        slope = spline.derivative()
        lo, hi = t_obs[0], t_obs[-1]
        for u in holes[outside]:
            end = lo if grid[u] < lo else hi
            values[u] = spline(end) + slope(end) * (grid[u] - end)
    return int(outside.sum())


def spline_fill(dataset: ConcurrentDataset, extrapolate: bool = False) -> ConcurrentDataset:
    """Recover missing cells curve by curve with a natural cubic spline.

    Each curve of each variable is interpolated through its own observed
    (time, value) pairs. Observed cells are copied untouched. With
    ``extrapolate=True`` cells outside a curve's observed span are filled
    by linear continuation from the nearest end, and a warning is issued.

    Raises
    ------
    InputError
        A curve with missing cells has fewer than 2 observations.
    ExtrapolationError
        A missing cell lies outside its curve's observed span and
        ``extrapolate`` is false.
    """
    if dataset.missing is None:
        return dataset
    stack = dataset.values().copy()
    missing = dataset.missing
    filled = 0
    extrapolated = 0
    for k, name in enumerate(dataset.variable_names):
        for i, curve in enumerate(dataset.curve_ids):
            holes = missing[k, i]
            if not holes.any():
                continue
            label = f"curve {curve!r} of variable {name!r}"
            extrapolated += _fill_curve(dataset.grid, stack[k, i], ~holes, extrapolate, label)
            filled += int(holes.sum())
    if extrapolated:
        warnings.warn(f"spline_fill extrapolated {extrapolated} cell(s) linearly", stacklevel=2)
    provenance = dict(dataset.provenance)
    provenance.update(spline_end_condition="natural", filled_cells=filled,
                      extrapolated_cells=extrapolated)
    return _from_stack(stack, None, dataset.grid, dataset.covariate_names, dataset.curve_ids,
                       dataset.response_name, provenance)


def center_variables(dataset: ConcurrentDataset) -> ConcurrentDataset:
    """Subtract the cross-curve mean at every instant from every variable."""
    dataset.require_complete()
    stack = dataset.values()
    stack = stack - stack.mean(axis=1, keepdims=True)
    provenance = dict(dataset.provenance, centered=True)
    return replace(dataset, response=stack[0], covariates=stack[1:], provenance=provenance)


def resolve_subset(dataset: ConcurrentDataset, subset=None) -> tuple:
    """Normalize a covariate subset to a sorted tuple of 0-based indices.

    ``subset`` may be ``None`` or ``"all"`` (every covariate), or an iterable
    mixing integer indices and covariate names.
    """
    if subset is None or (isinstance(subset, str) and subset == "all"):
        return tuple(range(dataset.p))
    if isinstance(subset, (str, int, np.integer)):
        subset = [subset]
    names = {name: j for j, name in enumerate(dataset.covariate_names)}
    indices = []
    for item in subset:
        if isinstance(item, str):
            if item not in names:
                raise InputError(f"unknown covariate {item!r}; available: {list(names)}")
            j = names[item]
        elif isinstance(item, (int, np.integer)) and not isinstance(item, bool):
            j = int(item)
            if not 0 <= j < dataset.p:
                raise InputError(f"covariate index {j} out of range for p={dataset.p}")
        else:
            raise InputError(f"invalid covariate selector {item!r}")
        if j in indices:
            raise InputError(f"covariate {dataset.covariate_names[j]!r} listed twice")
        indices.append(j)
    if not indices:
        raise InputError("covariate subset is empty")
    return tuple(sorted(indices))
