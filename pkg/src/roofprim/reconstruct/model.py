"""World-frame vertices and watertight roof/wall/ground assembly."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .. import primitives as prims
from ..errors import InvalidBaseError

DEFAULT_WALL_HEIGHT = 3.0
MERGE_TOLERANCE = 1e-9


class SurfaceLabel(str, Enum):
    ROOF = "RoofSurface"
    WALL = "WallSurface"
    GROUND = "GroundSurface"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SemanticSurface:
    """A closed planar ring (first vertex repeated last), counter-clockwise
    seen from outside the solid."""

    label: SurfaceLabel
    ring: np.ndarray

    def __post_init__(self):
        ring = np.asarray(self.ring, dtype=float).reshape(-1, 3)
        if len(ring) < 4 or not np.array_equal(ring[0], ring[-1]):
            raise ValueError("surface ring must be closed and have at least 3 distinct vertices")
        ring.setflags(write=False)
        object.__setattr__(self, "label", SurfaceLabel(self.label))
        object.__setattr__(self, "ring", ring)


@dataclass
class BuildingModel:
    surfaces: list
    envelope: tuple
    measured_height: float
    srs_name: str = ""
    terrain_curve: Optional[np.ndarray] = None
    id: str = "building"
    kind: Optional[str] = None
    base_z: float = 0.0

    def count(self, label) -> int:
        label = SurfaceLabel(label)
        return sum(1 for s in self.surfaces if s.label == label)


def world_vertices(prim: prims.RoofPrimitive) -> np.ndarray:
    """Roof vertices rotated by kappa, then shifted by the local and global translations."""
    local = prims.roof_vertices(prim.kind, prim.shape)
    return prims.apply_pose(local, prim.pose) + prim.t_global.as_array()


def eave_z(prim: prims.RoofPrimitive) -> float:
    return prim.t_global.tz + prim.pose.t[2]


def footprint_xy(prim: prims.RoofPrimitive) -> np.ndarray:
    """World-frame eave corners in assembly order (clockwise from above)."""
    defn = prims.definition(prim.kind)
    return world_vertices(prim)[list(defn.corners), :2]


class _VertexPool:
    """Shares coordinates between rings so coincident vertices compare equal."""

    def __init__(self, scale: float):
        self.coords = []
        self.tol = MERGE_TOLERANCE * max(scale, 1.0)

    def add(self, p) -> int:
        p = np.asarray(p, dtype=float)
        for i, q in enumerate(self.coords):
            if np.max(np.abs(q - p)) <= self.tol:
                return i
        self.coords.append(p)
        return len(self.coords) - 1


def _clean_ring(ids):
    out = []
    for i in ids:
        if not out or out[-1] != i:
            out.append(i)
    while len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


def assemble(prim: prims.RoofPrimitive, base_z: float, *, srs_name: str = "",
             building_id: str = "building", terrain_curve=None) -> BuildingModel:
    """Close the roof with vertical walls down to ``base_z`` and a flat ground face.

    Walls follow the roof outline between consecutive eave corners, so a
    gable end becomes a pentagon through the ridge vertex. Vertices that
    coincide (a hip with ``rho = 0``) are merged and any face left with
    fewer than three distinct vertices is dropped.
    """
    z_eave = eave_z(prim)
    if not base_z < z_eave:
        raise InvalidBaseError(f"base elevation {base_z} is not below the eave at {z_eave}")
    defn = prims.definition(prim.kind)
    verts = world_vertices(prim)
    ground = {i: np.array([verts[i, 0], verts[i, 1], base_z]) for i in defn.corners}

    pool = _VertexPool(float(np.max(np.abs(verts))))
    roof_id = [pool.add(v) for v in verts]
    ground_id = {i: pool.add(g) for i, g in ground.items()}

    rings = []
    for face in defn.faces:
        rings.append((SurfaceLabel.ROOF, [roof_id[i] for i in face]))

    outline = list(defn.outline)
    starts = [outline.index(c) for c in defn.corners]
    for k, start in enumerate(starts):
        stop = starts[(k + 1) % len(starts)]
        run = outline[start:stop + 1] if stop > start else outline[start:] + outline[:stop + 1]
        ids = [roof_id[i] for i in run] + [ground_id[run[-1]], ground_id[run[0]]]
        rings.append((SurfaceLabel.WALL, ids))

    rings.append((SurfaceLabel.GROUND, [ground_id[i] for i in defn.corners]))

    surfaces = []
    for label, ids in rings:
        ids = _clean_ring(ids)
        if len(set(ids)) < 3:
            continue
        ring = np.array([pool.coords[i] for i in ids + ids[:1]])
        surfaces.append(SemanticSurface(label, ring))

    allv = np.vstack([s.ring for s in surfaces])
    envelope = (allv.min(axis=0), allv.max(axis=0))
    height = float(verts[:, 2].max() - base_z)
    curve = None if terrain_curve is None else np.asarray(terrain_curve, dtype=float)
    return BuildingModel(surfaces, envelope, height, srs_name, curve, building_id, prim.kind.value, float(base_z))


def edge_multiplicity(model: BuildingModel) -> Counter:
    counts = Counter()
    for s in model.surfaces:
        pts = [tuple(p) for p in s.ring]
        for a, b in zip(pts[:-1], pts[1:]):
            counts[frozenset((a, b))] += 1
    return counts


def is_watertight(model: BuildingModel) -> bool:
    counts = edge_multiplicity(model)
    return bool(counts) and all(c == 2 for c in counts.values())


def signed_volume(model: BuildingModel) -> float:
    """Divergence-theorem volume; positive when rings face outward."""
    origin = model.envelope[0]
    total = 0.0
    for s in model.surfaces:
        r = s.ring[:-1] - origin
        for i in range(1, len(r) - 1):
            total += float(np.dot(r[0], np.cross(r[i], r[i + 1])))
    return total / 6.0
