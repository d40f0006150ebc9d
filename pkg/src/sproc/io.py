"""File formats: ESRI ASCII grids, point CSV files and window JSON."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np

from .spatial import Grid, PointPattern, Raster, Window

NODATA = -9999.0


class InputError(ValueError):
    """Malformed or inconsistent input file."""


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# ESRI ASCII grid

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "xllcenter", "yllcenter",
                "cellsize", "dx", "dy", "nodata_value")


def read_ascii_grid(path) -> Raster:
    """Read an ESRI ASCII grid. The first data row is the northernmost."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = {}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        key = parts[0].lower()
        if key not in _HEADER_KEYS:
            break
        if len(parts) != 2:
            raise InputError(f"{path}: malformed header line {lines[i]!r}")
        header[key] = float(parts[1])
        i += 1
    try:
        ncol, nrow = int(header["ncols"]), int(header["nrows"])
    except KeyError as exc:
        raise InputError(f"{path}: missing header field {exc.args[0]}") from None
    if "cellsize" in header:
        dx = dy = header["cellsize"]
    elif "dx" in header and "dy" in header:
        dx, dy = header["dx"], header["dy"]
    else:
        raise InputError(f"{path}: missing cellsize")
    if "xllcorner" in header:
        x0, y0 = header["xllcorner"], header["yllcorner"]
    elif "xllcenter" in header:
        x0, y0 = header["xllcenter"] - dx / 2, header["yllcenter"] - dy / 2
    else:
        raise InputError(f"{path}: missing lower-left corner")
    try:
        data = np.array(" ".join(lines[i:]).split(), dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric grid value") from exc
    if data.size != nrow * ncol:
        raise InputError(f"{path}: expected {nrow * ncol} values, found {data.size}")
    vals = data.reshape(nrow, ncol)[::-1]
    nodata = header.get("nodata_value")
    if nodata is not None:
        vals = np.where(vals == nodata, np.nan, vals)
    try:
        grid = Grid(x0, y0, dx, dy, nrow, ncol)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    return Raster(grid, vals)


def format_ascii_grid(r: Raster, nodata: float = NODATA) -> str:
    g = r.grid
    lines = [f"ncols {g.ncol}", f"nrows {g.nrow}", f"xllcorner {g.x0!r}", f"yllcorner {g.y0!r}"]
    if g.dx == g.dy:
        lines.append(f"cellsize {g.dx!r}")
    else:
        lines += [f"dx {g.dx!r}", f"dy {g.dy!r}"]
    lines.append(f"NODATA_value {nodata:g}")
    vals = np.where(np.isfinite(r.values), r.values, nodata)[::-1]
    for row in vals:
        lines.append(" ".join(f"{v:.12g}" for v in row))
    return "\n".join(lines) + "\n"


def write_ascii_grid(path, r: Raster, nodata: float = NODATA) -> None:
    atomic_write(path, format_ascii_grid(r, nodata))


# --------------------------------------------------------------------------
# points


def read_points_csv(path, window: Window, weight_column: Optional[str] = "weight",
                    mark_column: Optional[str] = "mark") -> PointPattern:
    """Read a CSV with header ``x,y[,mark][,weight]``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip().lower() for f in (reader.fieldnames or [])]
        if "x" not in fields or "y" not in fields:
            raise InputError(f"{path}: header must contain x and y")
        rows = [{k.strip().lower(): v for k, v in row.items()} for row in reader]
    try:
        x = np.array([float(row["x"]) for row in rows])
        y = np.array([float(row["y"]) for row in rows])
        marks = None
        if mark_column and mark_column in fields:
            marks = np.array([int(float(row[mark_column])) for row in rows])
        weights = None
        if weight_column and weight_column in fields:
            weights = np.array([float(row[weight_column]) for row in rows])
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: bad numeric value ({exc})") from exc
    try:
        return PointPattern(x, y, window, marks, weights)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def format_points_csv(pp: PointPattern) -> str:
    buf = []
    cols = ["x", "y"]
    if pp.marks is not None:
        cols.append("mark")
    if pp.weights is not None:
        cols.append("weight")
    buf.append(",".join(cols))
    for i in range(pp.n):
        row = [f"{pp.x[i]:.12g}", f"{pp.y[i]:.12g}"]
        if pp.marks is not None:
            row.append(str(int(pp.marks[i])))
        if pp.weights is not None:
            row.append(f"{pp.weights[i]:.12g}")
        buf.append(",".join(row))
    return "\n".join(buf) + "\n"


def write_points_csv(path, pp: PointPattern) -> None:
    atomic_write(path, format_points_csv(pp))


# --------------------------------------------------------------------------
# windows


def read_window_json(path) -> Window:
    """Read ``{xmin, xmax, ymin, ymax[, mask_path]}``; mask paths are relative to the file."""
    path = Path(path)
    try:
        d = json.loads(path.read_text())
        mask = None
        if d.get("mask_path"):
            mp = Path(d["mask_path"])
            mask = read_ascii_grid(mp if mp.is_absolute() else path.parent / mp)
        return Window(float(d["xmin"]), float(d["xmax"]), float(d["ymin"]), float(d["ymax"]), mask)
    except (KeyError, TypeError, json.JSONDecodeError, ValueError) as exc:
        raise InputError(f"{path}: invalid window ({exc})") from exc


def window_to_dict(W: Window, mask_path: Optional[str] = None) -> dict:
    d = {"xmin": W.xmin, "xmax": W.xmax, "ymin": W.ymin, "ymax": W.ymax}
    if mask_path is not None:
        d["mask_path"] = mask_path
    return d
