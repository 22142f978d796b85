"""Configuration files, path CSV files and JSON reports."""

from __future__ import annotations

import configparser
import csv
import json
from pathlib import Path

import numpy as np

from .errors import DataFormatError, InvalidArgument
from .grid_core import Grid


def read_config(path: str | Path) -> dict[str, str]:
    """Read an INI-style file into a flat ``{"section.key": value}`` dict."""
    path = Path(path)
    if not path.is_file():
        raise InvalidArgument(f"config file {path} not found")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise InvalidArgument(f"cannot parse {path}: {exc}") from exc
    flat = {}
    for section in parser.sections():
        for key, value in parser[section].items():
            flat[f"{section}.{key}"] = value.strip()
    return flat


def parse_list(text: str, kind=float) -> list:
    """Comma-separated values, e.g. ``"1,0.1,0.01"``."""
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidArgument(f"cannot parse list {text!r}") from exc


def write_paths_csv(path: str | Path, grid: Grid, values: np.ndarray) -> None:
    """Header row of grid points, then one row per path, floats written with ``repr``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([repr(float(t)) for t in grid.points])
        for row in np.atleast_2d(values):
            w.writerow([repr(float(v)) for v in row])


def read_paths_csv(path: str | Path, weights: np.ndarray | None = None) -> tuple[Grid, np.ndarray]:
    """Read a path file written by ``write_paths_csv``.

    Without ``weights`` the grid must be evenly spaced and every point gets
    the spacing as its weight (midpoint rule).
    """
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"{path}: file not found")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DataFormatError(f"{path}: need a header row and at least one path")
    try:
        points = np.array([float(v) for v in rows[0]])
    except ValueError as exc:
        raise DataFormatError(f"{path}: row 1 (grid header) is not numeric") from exc
    p = points.size
    data = np.empty((len(rows) - 1, p))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != p:
            raise DataFormatError(f"{path}: row {i} has {len(row)} columns, header has {p}")
        for j, v in enumerate(row):
            try:
                data[i - 2, j] = float(v)
            except ValueError as exc:
                raise DataFormatError(f"{path}: row {i}, column {j + 1} is not a number: {v!r}") from exc
    if weights is None:
        if p < 2:
            raise DataFormatError(f"{path}: cannot infer quadrature weights from one point")
        h = np.diff(points)
        if np.any(h <= 0) or np.ptp(h) > 1e-9 * h.mean():
            raise DataFormatError(f"{path}: grid header is not evenly spaced; pass weights via the manifest")
        weights = np.full(p, h.mean())
    weights = np.asarray(weights, dtype=float)
    if weights.shape != points.shape:
        raise DataFormatError(f"{path}: {weights.size} weights for {p} grid points")
    try:
        return Grid(points, weights), data
    except InvalidArgument as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def write_json(path: str | Path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, indent=2))
        fh.write("\n")
