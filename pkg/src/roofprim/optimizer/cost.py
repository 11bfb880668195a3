"""The fitting objective: mean point-to-plane distance plus weighted 1 - IoU."""

from __future__ import annotations

import math

import numpy as np

from .. import primitives as prims
from ..geometry import Polygon2D
from ..pointcloud import LOCAL, PointCloud
from . import _kernels
from .config import CostBreakdown, OptimizerConfig


class CostModel:
    """Objective for one cloud, one roof kind and one precomputed boundary.

    Calling the model with a packed parameter vector returns ``J``; the roof
    planes are rebuilt from the posed face vertices on every call.
    """

    def __init__(self, points, kind, boundary: Polygon2D, beta: float):
        self.points = np.ascontiguousarray(points, dtype=float)
        self.kind = prims.PrimitiveKind(kind)
        self.defn = prims.definition(self.kind)
        self.boundary = np.ascontiguousarray(boundary.ring)
        self.boundary_area = boundary.area
        self.beta = float(beta)
        self._n_shape = len(self.defn.shape_names)
        width = max(len(f) for f in self.defn.faces)
        self._faces = np.zeros((len(self.defn.faces), width), dtype=np.int64)
        self._sizes = np.array([len(f) for f in self.defn.faces], dtype=np.int64)
        for j, ring in enumerate(self.defn.faces):
            self._faces[j, :len(ring)] = ring

    def terms(self, x, with_footprint=True):
        x = np.asarray(x, dtype=float)
        n = self._n_shape
        l, w, h = x[0], x[1], x[2]
        rho = x[3] if n == 4 else None
        kappa = x[n]
        t = x[n + 1:n + 4]
        shape = prims.ShapeParams(l, w, h, rho)
        c, s = math.cos(kappa), math.sin(kappa)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        verts = self.defn.vertices(shape) @ rot.T + t
        planes = _kernels.planes_from_faces(verts, self._faces, self._sizes)
        j1 = _kernels.mean_min_distance(self.points, planes)
        if not with_footprint:
            return j1, 0.0
        rect = np.array([(-l / 2, -w / 2), (l / 2, -w / 2), (l / 2, w / 2), (-l / 2, w / 2)])
        rect = rect @ rot[:2, :2].T + t[:2]
        inter = _kernels.rect_intersection_area(rect, self.boundary)
        union = l * w + self.boundary_area - inter
        j2 = 1.0 - (min(max(inter / union, 0.0), 1.0) if union > 0 else 0.0)
        return j1, j2

    def __call__(self, x) -> float:
        j1, j2 = self.terms(x, self.beta != 0.0)
        return j1 + self.beta * j2

    def breakdown(self, x) -> CostBreakdown:
        j1, j2 = self.terms(x)
        return CostBreakdown.combine(j1, j2, self.beta)


def cost(cloud: PointCloud, prim: prims.RoofPrimitive, boundary: Polygon2D,
         config: OptimizerConfig = OptimizerConfig()) -> CostBreakdown:
    """Cost terms of a primitive against a local-frame cloud."""
    if cloud.frame != LOCAL:
        raise ValueError("cost expects a local-frame cloud")
    model = CostModel(cloud.points, prim.kind, boundary, config.beta)
    return model.breakdown(prims.pack(prim))
