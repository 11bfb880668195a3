"""Parametric roof primitives.

Every primitive lives in its own frame: the eave plane is z = 0, the
rectangular footprint is centred on the origin and the ridge (when there is
one) runs along local x. Vertex numbering for the gable follows the usual
six-vertex labelling: ``v1, v2`` on the +y eave, ``v3, v4`` on the ridge and
``v5, v6`` on the -y eave. Indices stored here are 0-based.

New kinds are added by registering a :class:`PrimitiveDef`; nothing in the
optimizer is kind-specific.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParameterError, ShapeError
from .pointcloud import GlobalTranslation


class PrimitiveKind(str, Enum):
    PYRAMID = "pyramid"
    GABLE = "gable"
    HIP = "hip"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ShapeParams:
    l: float
    w: float
    h: float
    rho: Optional[float] = None


@dataclass(frozen=True)
class Pose:
    kappa: float = 0.0
    t: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "t", tuple(float(v) for v in self.t))

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.kappa), math.sin(self.kappa)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def inverse(self) -> "Pose":
        r = self.rotation()
        t_inv = -(r.T @ np.asarray(self.t))
        return Pose(-self.kappa, tuple(t_inv))


@dataclass(frozen=True)
class RoofPrimitive:
    kind: PrimitiveKind
    shape: ShapeParams
    pose: Pose = field(default_factory=Pose)
    t_global: GlobalTranslation = field(default_factory=GlobalTranslation)

    def __post_init__(self):
        object.__setattr__(self, "kind", definition(self.kind).kind)
        validate_shape(self.kind, self.shape)
        if not math.isfinite(self.pose.kappa) or not all(map(math.isfinite, self.pose.t)):
            raise InvalidParameterError("pose", "must be finite")

    def canonical(self) -> "RoofPrimitive":
        """Same geometry with kappa folded into [-pi/2, pi/2).

        A pyramid with w > l is also relabelled (sides swapped, quarter
        turn added) so that l >= w, as for the other kinds.
        """
        kappa, shape = self.pose.kappa, self.shape
        if self.kind == PrimitiveKind.PYRAMID and shape.w > shape.l:
            shape = replace(shape, l=shape.w, w=shape.l)
            kappa += math.pi / 2
        return replace(self, shape=shape, pose=Pose(canonical_kappa(kappa), self.pose.t))


@dataclass(frozen=True)
class FaceTopology:
    faces: tuple
    vertex_count: int


@dataclass(frozen=True)
class PrimitiveDef:
    """Table entry describing one roof kind.

    ``outline`` is the closed boundary of the roof surface, walked clockwise
    when seen from above; ``corners`` are the eave corners on it, which get
    ground copies during assembly.
    """

    kind: PrimitiveKind
    shape_names: tuple
    vertices: Callable[[ShapeParams], np.ndarray]
    faces: tuple
    outline: tuple
    corners: tuple


def _eave_corners(l, w):
    # v1, v2 (+y eave) and v5, v6 (-y eave) in gable numbering
    return (-l / 2, w / 2), (l / 2, w / 2), (-l / 2, -w / 2), (l / 2, -w / 2)


def _gable_vertices(s: ShapeParams) -> np.ndarray:
    c1, c2, c5, c6 = _eave_corners(s.l, s.w)
    return np.array([
        (*c1, 0.0), (*c2, 0.0),
        (s.l / 2, 0.0, s.h), (-s.l / 2, 0.0, s.h),
        (*c5, 0.0), (*c6, 0.0),
    ])


def _hip_vertices(s: ShapeParams) -> np.ndarray:
    c1, c2, c5, c6 = _eave_corners(s.l, s.w)
    half_ridge = s.rho * s.l / 2
    return np.array([
        (*c1, 0.0), (*c2, 0.0),
        (half_ridge, 0.0, s.h), (-half_ridge, 0.0, s.h),
        (*c5, 0.0), (*c6, 0.0),
    ])


def _pyramid_vertices(s: ShapeParams) -> np.ndarray:
    x, y = s.l / 2, s.w / 2
    return np.array([(-x, y, 0.0), (x, y, 0.0), (x, -y, 0.0), (-x, -y, 0.0), (0.0, 0.0, s.h)])


REGISTRY: dict = {}


def register(defn: PrimitiveDef):
    REGISTRY[defn.kind] = defn


register(PrimitiveDef(
    PrimitiveKind.PYRAMID, ("l", "w", "h"), _pyramid_vertices,
    faces=((4, 1, 0), (4, 2, 1), (4, 3, 2), (4, 0, 3)),
    outline=(0, 1, 2, 3), corners=(0, 1, 2, 3),
))
register(PrimitiveDef(
    PrimitiveKind.GABLE, ("l", "w", "h"), _gable_vertices,
    faces=((3, 2, 1, 0), (2, 3, 4, 5)),
    outline=(0, 1, 2, 5, 4, 3), corners=(0, 1, 5, 4),
))
register(PrimitiveDef(
    PrimitiveKind.HIP, ("l", "w", "h", "rho"), _hip_vertices,
    faces=((3, 2, 1, 0), (2, 3, 4, 5), (1, 2, 5), (4, 3, 0)),
    outline=(0, 1, 5, 4), corners=(0, 1, 5, 4),
))


def definition(kind) -> PrimitiveDef:
    try:
        return REGISTRY[PrimitiveKind(kind)]
    except (KeyError, ValueError):
        raise InvalidParameterError("kind", f"unknown primitive kind {kind!r}") from None


def validate_shape(kind, shape: ShapeParams):
    defn = definition(kind)
    for name in ("l", "w", "h"):
        value = getattr(shape, name)
        if not (math.isfinite(value) and value > 0):
            raise InvalidParameterError(name, f"must be positive and finite, got {value}")
    if "rho" in defn.shape_names:
        if shape.rho is None or not (0.0 <= shape.rho <= 1.0):
            raise InvalidParameterError("rho", f"must lie in [0, 1], got {shape.rho}")
    elif shape.rho is not None:
        raise InvalidParameterError("rho", f"not a parameter of {defn.kind.value}")


def roof_vertices(kind, shape: ShapeParams) -> np.ndarray:
    """Vertices of the roof in the primitive frame, before posing."""
    validate_shape(kind, shape)
    return definition(kind).vertices(shape)


def roof_faces(kind) -> FaceTopology:
    defn = definition(kind)
    n = len(defn.vertices(ShapeParams(2.0, 1.0, 1.0, 0.5 if "rho" in defn.shape_names else None)))
    return FaceTopology(defn.faces, n)


def apply_pose(vertices, pose: Pose) -> np.ndarray:
    v = np.asarray(vertices, dtype=float).reshape(-1, 3)
    return v @ pose.rotation().T + np.asarray(pose.t)


def canonical_kappa(kappa: float) -> float:
    """Fold an angle into [-pi/2, pi/2).

    All shipped roofs are symmetric under a half turn, so folding by pi
    never changes the geometry.
    """
    folded = (kappa + math.pi / 2) % math.pi - math.pi / 2
    return folded if folded < math.pi / 2 else -math.pi / 2


def footprint_corners(prim: RoofPrimitive) -> np.ndarray:
    """Counter-clockwise footprint rectangle in the building-local frame."""
    l, w = prim.shape.l, prim.shape.w
    rect = np.array([(-l / 2, -w / 2), (l / 2, -w / 2), (l / 2, w / 2), (-l / 2, w / 2)])
    c, s = math.cos(prim.pose.kappa), math.sin(prim.pose.kappa)
    rot = np.array([[c, -s], [s, c]])
    return rect @ rot.T + np.asarray(prim.pose.t[:2])


def footprint_polygon(prim: RoofPrimitive):
    from .geometry import Polygon2D

    return Polygon2D(footprint_corners(prim), check=False)


# -- optimizer vector layout -------------------------------------------------

SHAPE_BOUNDS = {"l": (0.5, 200.0), "w": (0.5, 200.0), "h": (0.5, 200.0), "rho": (0.0, 1.0)}
KAPPA_BOUNDS = (-math.pi / 2, math.pi / 2)
TRANSLATION_BOUNDS = (-50.0, 50.0)


def vector_names(kind) -> tuple:
    return definition(kind).shape_names + ("kappa", "tx", "ty", "tz")


def vector_bounds(kind) -> tuple[np.ndarray, np.ndarray]:
    pairs = [SHAPE_BOUNDS[n] for n in definition(kind).shape_names]
    pairs += [KAPPA_BOUNDS] + [TRANSLATION_BOUNDS] * 3
    lo, hi = zip(*pairs)
    return np.array(lo), np.array(hi)


def pack(prim: RoofPrimitive) -> np.ndarray:
    names = definition(prim.kind).shape_names
    shape = [getattr(prim.shape, n) for n in names]
    return np.array(shape + [prim.pose.kappa, *prim.pose.t], dtype=float)


def unpack(kind, vector, t_global: GlobalTranslation = GlobalTranslation(), check_bounds=True) -> RoofPrimitive:
    names = vector_names(kind)
    x = np.asarray(vector, dtype=float)
    if x.shape != (len(names),):
        raise ShapeError(f"{PrimitiveKind(kind).value} expects a vector of length {len(names)}, got {x.shape}")
    if check_bounds:
        lo, hi = vector_bounds(kind)
        for name, v, a, b in zip(names, x, lo, hi):
            if not (a <= v <= b):
                raise InvalidParameterError(name, f"{v} outside [{a}, {b}]")
    n_shape = len(definition(kind).shape_names)
    values = dict(zip(names, x.tolist()))
    shape = ShapeParams(values["l"], values["w"], values["h"], values.get("rho"))
    pose = Pose(values["kappa"], tuple(x[n_shape + 1:]))
    return RoofPrimitive(PrimitiveKind(kind), shape, pose, t_global)
