"""Quality measures of a fitted roof against its cloud and a reference footprint."""

from __future__ import annotations

import numpy as np

from .. import primitives as prims
from ..geometry import Polygon2D, face_planes, iou_2d, min_plane_distances
from ..pointcloud import PointCloud


def point_surface_distances(cloud: PointCloud, prim: prims.RoofPrimitive) -> np.ndarray:
    """Per-point distance to the nearest roof plane of a world-frame primitive.

    Both sides are shifted by the primitive's global translation first so
    that projected coordinates do not cost precision.
    """
    origin = prim.t_global.as_array()
    verts = prims.apply_pose(prims.roof_vertices(prim.kind, prim.shape), prim.pose)
    planes = face_planes(verts, prims.definition(prim.kind).faces)
    return min_plane_distances(np.asarray(cloud.points) - origin, planes)


def eval_psd(cloud: PointCloud, prim: prims.RoofPrimitive) -> tuple[float, float]:
    """Mean and population standard deviation of point-to-surface distance."""
    d = point_surface_distances(cloud, prim)
    if d.size == 0:
        raise ValueError("cloud is empty")
    return float(d.mean()), float(d.std())


def world_footprint(prim: prims.RoofPrimitive) -> np.ndarray:
    return prims.footprint_corners(prim) + prim.t_global.as_array()[:2]


def eval_iou(prim: prims.RoofPrimitive, truth_footprint) -> float:
    """IoU of the primitive's footprint and a world-frame reference polygon."""
    ring = truth_footprint.ring if isinstance(truth_footprint, Polygon2D) else np.asarray(truth_footprint, float)
    shift = prim.t_global.as_array()[:2]
    own = Polygon2D(prims.footprint_corners(prim), check=False)
    return iou_2d(own, Polygon2D(ring - shift, check=False))
