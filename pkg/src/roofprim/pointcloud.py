"""Per-building point clouds: parsing, centering and 2D statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from ._io import atomic_open
from .errors import EmptyInputError, InputError, InsufficientDataError, ParseError

WORLD = "world"
LOCAL = "local"


@dataclass(frozen=True)
class GlobalTranslation:
    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.tx, self.ty, self.tz], dtype=float)

    @classmethod
    def from_array(cls, xyz) -> "GlobalTranslation":
        x, y, z = (float(v) for v in xyz)
        return cls(x, y, z)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An ordered (N, 3) array of points plus frame bookkeeping.

    The coordinate array is copied and frozen on construction, so clouds can
    be shared freely between threads and workers.
    """

    points: np.ndarray
    frame: str = WORLD
    srs_name: Optional[str] = None
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            bad = int(np.argwhere(~np.isfinite(pts))[0, 0])
            raise ParseError(f"non-finite coordinate in point {bad}")
        if self.frame not in (WORLD, LOCAL):
            raise ValueError(f"unknown frame tag {self.frame!r}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def with_points(self, points, frame=None) -> "PointCloud":
        return PointCloud(points, frame or self.frame, self.srs_name, self.source)


def _require_points(cloud: PointCloud, minimum: int = 1):
    if len(cloud) == 0:
        raise EmptyInputError("point cloud is empty")
    if len(cloud) < minimum:
        raise InsufficientDataError(f"need at least {minimum} points, got {len(cloud)}")


def _parse_xyz_line(text, lineno, path):
    parts = text.split()
    if len(parts) < 3:
        raise ParseError("expected three coordinates", line=lineno, path=path)
    try:
        xyz = [float(p) for p in parts[:3]]
    except ValueError:
        raise ParseError(f"not a number in {text.strip()!r}", line=lineno, path=path) from None
    if not all(np.isfinite(xyz)):
        raise ParseError(f"non-finite coordinate in {text.strip()!r}", line=lineno, path=path)
    return xyz


def _read_xyz(path: Path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            stripped = text.strip()
            if not stripped or stripped.startswith("#"):
                continue
            rows.append(_parse_xyz_line(stripped, lineno, path))
    return rows


def _read_ply(path: Path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", line=1, path=path)
    elements = []  # (name, count, [property names])
    body_start = None
    for i, text in enumerate(lines[1:], start=2):
        words = text.split()
        if not words or words[0] in ("comment", "obj_info"):
            continue
        key = words[0]
        if key == "format":
            if len(words) < 2 or words[1] != "ascii":
                raise ParseError("only ASCII PLY is supported", line=i, path=path)
        elif key == "element":
            if len(words) != 3:
                raise ParseError("malformed element line", line=i, path=path)
            try:
                count = int(words[2])
            except ValueError:
                raise ParseError("element count is not an integer", line=i, path=path) from None
            elements.append((words[1], count, []))
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", line=i, path=path)
            if len(words) >= 2 and words[1] == "list":
                elements[-1][2].append(None)
            elif len(words) == 3:
                elements[-1][2].append(words[2])
            else:
                raise ParseError("malformed property line", line=i, path=path)
        elif key == "end_header":
            body_start = i
            break
        else:
            raise ParseError(f"unexpected header keyword {key!r}", line=i, path=path)
    if body_start is None:
        raise ParseError("missing end_header", path=path)

    rows = []
    cursor = body_start  # 0-based index of the first body line
    for name, count, props in elements:
        if name != "vertex":
            cursor += count
            continue
        try:
            ix, iy, iz = (props.index(axis) for axis in ("x", "y", "z"))
        except ValueError:
            raise ParseError("vertex element lacks x/y/z properties", path=path) from None
        if None in props[: max(ix, iy, iz) + 1]:
            raise ParseError("list properties before x/y/z are not supported", path=path)
        for k in range(count):
            lineno = cursor + k + 1
            if cursor + k >= len(lines):
                raise ParseError("file ends inside vertex data", line=lineno, path=path)
            words = lines[cursor + k].split()
            if len(words) < len(props):
                raise ParseError("too few vertex properties", line=lineno, path=path)
            xyz = _parse_xyz_line(f"{words[ix]} {words[iy]} {words[iz]}", lineno, path)
            rows.append(xyz)
        cursor += count
    return rows


FORMATS = {"xyz-ascii": _read_xyz, "ply-ascii": _read_ply}


def guess_format(path) -> str:
    return "ply-ascii" if Path(path).suffix.lower() == ".ply" else "xyz-ascii"


def load_cloud(path, format: Optional[str] = None, srs_name: Optional[str] = None) -> PointCloud:
    """Read a world-frame cloud from an XYZ or ASCII PLY file.

    ``format`` is ``"xyz-ascii"`` or ``"ply-ascii"``; when omitted it is
    inferred from the file suffix. Point order follows the file.
    """
    path = Path(path)
    fmt = format or guess_format(path)
    if fmt not in FORMATS:
        raise ParseError(f"unknown format {fmt!r}", path=path)
    try:
        rows = FORMATS[fmt](path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except UnicodeDecodeError as exc:
        raise ParseError(f"not a text file ({exc.reason})", path=path) from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    if not rows:
        raise EmptyInputError(f"{path}: no points")
    return PointCloud(np.asarray(rows, dtype=float), WORLD, srs_name, source=str(path))


def write_xyz(cloud: PointCloud, path, precision: int = 6):
    fmt = f"%.{precision}f"
    with atomic_open(path, "w", encoding="utf-8", newline="\n") as fh:
        np.savetxt(fh, cloud.points, fmt=fmt, delimiter=" ")


def centroid(cloud: PointCloud) -> np.ndarray:
    _require_points(cloud)
    return cloud.points.mean(axis=0)


def to_local(cloud: PointCloud) -> tuple[PointCloud, GlobalTranslation]:
    """Shift a world-frame cloud so its centroid sits at the origin.

    Returns the local cloud and the subtracted centroid; adding the centroid
    back recovers the input coordinates.
    """
    if cloud.frame != WORLD:
        raise ValueError("to_local expects a world-frame cloud")
    c = centroid(cloud)
    return cloud.with_points(cloud.points - c, LOCAL), GlobalTranslation.from_array(c)


def to_world(cloud: PointCloud, t_global: GlobalTranslation) -> PointCloud:
    return cloud.with_points(cloud.points + t_global.as_array(), WORLD)


def project_xy(cloud: PointCloud) -> np.ndarray:
    _require_points(cloud)
    return np.array(cloud.points[:, :2])


def mean_spacing(cloud: PointCloud) -> float:
    """Mean 2D nearest-neighbour distance of the projected points."""
    _require_points(cloud, 2)
    xy = cloud.points[:, :2]
    dist, _ = cKDTree(xy).query(xy, k=2)
    return float(dist[:, 1].mean())
