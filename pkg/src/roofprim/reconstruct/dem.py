"""Elevation grids in ESRI ASCII format and base-height lookup."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import InputError, OutOfExtentError, ParseError

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "xllcenter", "yllcenter", "cellsize", "nodata_value")


@dataclass(frozen=True)
class DEM:
    """Regular height grid.

    ``origin`` is the lower-left corner of the lower-left cell. ``heights``
    is row-major with row 0 along the top (north) edge, as in the file
    format; samples sit at cell centres. Cells equal to ``nodata`` are
    treated as missing.
    """

    origin: tuple
    cell_size: float
    heights: np.ndarray
    nodata: Optional[float] = None

    def __post_init__(self):
        h = np.array(self.heights, dtype=float)
        if h.ndim != 2 or min(h.shape) < 1:
            raise InputError("DEM heights must be a non-empty 2D grid")
        if not self.cell_size > 0:
            raise InputError("DEM cell size must be positive")
        valid = h if self.nodata is None else h[h != self.nodata]
        if not np.all(np.isfinite(valid)):
            raise InputError("DEM heights must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def rows(self) -> int:
        return self.heights.shape[0]

    @property
    def cols(self) -> int:
        return self.heights.shape[1]

    def contains(self, x: float, y: float) -> bool:
        x0, y0 = self.origin
        return x0 <= x <= x0 + self.cols * self.cell_size and y0 <= y <= y0 + self.rows * self.cell_size

    def sample(self, x: float, y: float) -> float:
        """Bilinear interpolation between the four nearest cell centres.

        Inside the outer half cell the nearest edge samples are used, so the
        whole raster extent is covered.
        """
        if not self.contains(x, y):
            raise OutOfExtentError(f"({x:.3f}, {y:.3f}) lies outside the DEM extent")
        x0, y0 = self.origin
        # continuous column / row-from-bottom index of cell centres
        u = (x - x0) / self.cell_size - 0.5
        v = (y - y0) / self.cell_size - 0.5
        u = min(max(u, 0.0), self.cols - 1.0)
        v = min(max(v, 0.0), self.rows - 1.0)
        c0 = min(int(math.floor(u)), max(self.cols - 2, 0))
        r0 = min(int(math.floor(v)), max(self.rows - 2, 0))
        c1 = min(c0 + 1, self.cols - 1)
        r1 = min(r0 + 1, self.rows - 1)
        fu, fv = u - c0, v - r0
        grid = self.heights[::-1]  # row 0 at the bottom
        corners = np.array([grid[r0, c0], grid[r0, c1], grid[r1, c0], grid[r1, c1]])
        if self.nodata is not None and np.any(corners == self.nodata):
            raise OutOfExtentError(f"({x:.3f}, {y:.3f}) touches NODATA cells")
        bottom = corners[0] * (1 - fu) + corners[1] * fu
        top = corners[2] * (1 - fu) + corners[3] * fu
        return float(bottom * (1 - fv) + top * fv)


def read_dem(path) -> DEM:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read DEM {path}: {exc}") from exc
    header = {}
    body_start = 0
    for lineno, line in enumerate(lines, 1):
        parts = line.split()
        if not parts:
            continue
        key = parts[0].lower()
        if key not in _HEADER_KEYS:
            body_start = lineno - 1
            break
        if len(parts) != 2:
            raise ParseError(f"malformed header entry {line!r}", lineno, path)
        try:
            header[key] = float(parts[1])
        except ValueError:
            raise ParseError(f"non-numeric header value {parts[1]!r}", lineno, path) from None
    for key in ("ncols", "nrows", "cellsize"):
        if key not in header:
            raise ParseError(f"missing header key {key}", None, path)
    cols, rows, size = int(header["ncols"]), int(header["nrows"]), header["cellsize"]
    if "xllcorner" in header and "yllcorner" in header:
        origin = (header["xllcorner"], header["yllcorner"])
    elif "xllcenter" in header and "yllcenter" in header:
        origin = (header["xllcenter"] - size / 2, header["yllcenter"] - size / 2)
    else:
        raise ParseError("missing xllcorner/yllcorner", None, path)
    values = []
    for lineno, line in enumerate(lines[body_start:], body_start + 1):
        for token in line.split():
            try:
                values.append(float(token))
            except ValueError:
                raise ParseError(f"non-numeric height {token!r}", lineno, path) from None
    if len(values) != rows * cols:
        raise ParseError(f"expected {rows * cols} heights, found {len(values)}", None, path)
    return DEM(origin, size, np.array(values).reshape(rows, cols), header.get("nodata_value"))


def write_dem(dem: DEM, path):
    from .._io import write_text

    lines = [f"ncols {dem.cols}", f"nrows {dem.rows}", f"xllcorner {dem.origin[0]!r}",
             f"yllcorner {dem.origin[1]!r}", f"cellsize {dem.cell_size!r}"]
    if dem.nodata is not None:
        lines.append(f"NODATA_value {dem.nodata!r}")
    lines += [" ".join(repr(float(v)) for v in row) for row in dem.heights]
    write_text(path, "\n".join(lines) + "\n")


def ground_elevation(dem: Optional[DEM], footprint, fallback: Optional[float] = None) -> float:
    """Lowest DEM height under the footprint vertices, or ``fallback`` without a DEM."""
    pts = np.asarray(footprint, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise InputError("footprint is empty")
    if dem is None:
        if fallback is None:
            raise InputError("no DEM and no fallback base elevation")
        return float(fallback)
    heights = []
    for i, (x, y) in enumerate(pts):
        try:
            heights.append(dem.sample(x, y))
        except OutOfExtentError as exc:
            raise OutOfExtentError(f"footprint vertex {i}: {exc}") from None
    return float(min(heights))


def terrain_curve(dem: DEM, footprint) -> np.ndarray:
    """Closed footprint polyline with DEM heights at its vertices."""
    pts = np.asarray(footprint, dtype=float).reshape(-1, 2)
    ring = np.column_stack([pts, [dem.sample(x, y) for x, y in pts]])
    return np.vstack([ring, ring[:1]])
