"""Initial guesses, single-kind fits and fit-all roof classification."""

from __future__ import annotations

import logging
import math
from dataclasses import replace
from typing import Optional

import numpy as np

from .. import primitives as prims
from ..errors import ClassificationError, RoofPrimError
from ..geometry import Polygon2D, alpha_shape_boundary, min_area_rect, plan_face_distances
from ..pointcloud import LOCAL, GlobalTranslation, PointCloud, to_local
from .config import FitResult, OptimizerConfig
from .cost import CostModel
from .gradient import default_steps, fd_gradient
from .lbfgsb import lbfgsb_minimize

log = logging.getLogger(__name__)

# Finite radii pull the footprint inside the true eave line by about one
# point spacing and bias l and w low; the convex-hull limit does not.
DEFAULT_ALPHA_RADIUS = math.inf
PARSIMONY_MARGIN = 0.01


def default_alpha_radius(cloud: PointCloud) -> float:
    return DEFAULT_ALPHA_RADIUS


def boundary_of(cloud: PointCloud, alpha_radius: Optional[float] = None) -> Polygon2D:
    radius = alpha_radius if alpha_radius is not None else default_alpha_radius(cloud)
    return alpha_shape_boundary(cloud.points[:, :2], radius)


def _as_local(cloud: PointCloud, t_global: Optional[GlobalTranslation]):
    if cloud.frame == LOCAL:
        return cloud, t_global or GlobalTranslation()
    local, tg = to_local(cloud)
    return local, tg


def initial_guess(cloud: PointCloud, kind) -> prims.RoofPrimitive:
    """Start values from the minimum-area rectangle and z percentiles."""
    kind = prims.PrimitiveKind(kind)
    pts = cloud.points
    center, l, w, theta = min_area_rect(pts[:, :2])
    z_eave, z_top = np.percentile(pts[:, 2], [5.0, 95.0])
    lo, hi = prims.vector_bounds(kind)
    l = float(np.clip(l, lo[0], hi[0]))
    w = float(np.clip(w, lo[1], hi[1]))
    h = float(np.clip(max(z_top - z_eave, 0.5), lo[2], hi[2]))
    rho = 0.5 if "rho" in prims.definition(kind).shape_names else None
    t = np.clip([center[0], center[1], z_eave], prims.TRANSLATION_BOUNDS[0], prims.TRANSLATION_BOUNDS[1])
    pose = prims.Pose(prims.canonical_kappa(theta), tuple(t))
    return prims.RoofPrimitive(kind, prims.ShapeParams(l, w, h, rho), pose)


def fit(cloud: PointCloud, kind, config: OptimizerConfig = OptimizerConfig(), *,
        boundary: Optional[Polygon2D] = None, alpha_radius: Optional[float] = None,
        t_global: Optional[GlobalTranslation] = None, start: Optional[prims.RoofPrimitive] = None) -> FitResult:
    """Fit one roof kind to a cloud.

    A world-frame cloud is centred first and its centroid becomes the
    primitive's global translation. ``boundary`` overrides the alpha-shape
    footprint used by the IoU term (it must be in the same frame as the
    cloud after centring).
    """
    kind = prims.PrimitiveKind(kind)
    local, tg = _as_local(cloud, t_global)
    if boundary is None:
        boundary = boundary_of(local, alpha_radius)
    model = CostModel(local.points, kind, boundary, config.beta)
    guess = start if start is not None else initial_guess(local, kind)
    lower, upper = prims.vector_bounds(kind)
    x0 = np.clip(prims.pack(guess), lower, upper)

    calls = [0]

    def objective(x):
        calls[0] += 1
        return model(x)

    x = x0
    history, iterations = [], 0
    steps = [config.coarse_fd_step, config.fd_step] if config.coarse_fd_step else [config.fd_step]
    for rel in steps:
        def gradient(x, rel=rel):
            return fd_gradient(objective, x, default_steps(x, rel), lower, upper, kinks=True)

        x, _, trace = lbfgsb_minimize(
            objective, gradient, x, lower, upper,
            memory_pairs=config.memory_pairs,
            max_iterations=config.max_iterations,
            gradient_tolerance=config.gradient_tolerance,
            relative_decrease=config.relative_decrease,
            record_iterates=False,
        )
        history.extend((iterations + k, f) for k, f in trace.history[1 if history else 0:])
        iterations += trace.iterations
    prim = prims.unpack(kind, x, tg).canonical()
    if not trace.converged:
        log.debug("%s fit stopped early: %s", kind.value, trace.message)
    return FitResult(
        primitive=prim,
        cost=model.breakdown(x),
        iterations=iterations,
        converged=trace.converged,
        history=history,
        message=trace.message,
        evaluations=calls[0],
    )


def _parameter_count(kind) -> int:
    return len(prims.vector_names(kind))


def selection_score(points, result: FitResult, beta: float) -> float:
    """Fitted cost with each point charged to the face under it in plan.

    The fitting term measures distance to unbounded planes, under which a
    pyramid or hip reproduces any gable's two planes exactly and gets extra
    planes for free; charging points to their own face removes that.
    """
    prim = result.primitive
    verts = prims.apply_pose(prims.roof_vertices(prim.kind, prim.shape), prim.pose)
    d = plan_face_distances(points, verts, prims.definition(prim.kind).faces)
    return float(d.mean() + beta * result.cost.j2)


def _rank_value(res: FitResult) -> float:
    return res.score if math.isfinite(res.score) else res.cost.j


def select_best(results) -> prims.PrimitiveKind:
    """Lowest score wins, unless a kind with fewer parameters is within the margin."""
    ranked = sorted(results, key=lambda kr: _rank_value(kr[1]))
    best_kind = ranked[0][0]
    for kind, res in ranked[1:]:
        if (_parameter_count(kind) < _parameter_count(best_kind)
                and _rank_value(res) - _rank_value(ranked[0][1]) < PARSIMONY_MARGIN):
            best_kind = kind
            break
    return best_kind


def classify(cloud: PointCloud, config: OptimizerConfig = OptimizerConfig(), *, kinds=None,
             boundary: Optional[Polygon2D] = None, alpha_radius: Optional[float] = None,
             t_global: Optional[GlobalTranslation] = None):
    """Fit every registered kind and pick one.

    Each result carries its :func:`selection_score`, which decides the
    winner. Returns ``(kind, [(kind, FitResult), ...])`` with the list
    sorted by final cost.
    """
    local, tg = _as_local(cloud, t_global)
    if boundary is None:
        boundary = boundary_of(local, alpha_radius)
    kinds = list(kinds) if kinds is not None else list(prims.REGISTRY)
    results, causes = [], {}
    for kind in kinds:
        try:
            res = fit(local, kind, config, boundary=boundary, t_global=tg)
            res = replace(res, score=selection_score(local.points, res, config.beta))
            results.append((prims.PrimitiveKind(kind), res))
        except RoofPrimError as exc:
            causes[str(kind)] = exc
    if not results:
        raise ClassificationError(causes)
    results.sort(key=lambda kr: kr[1].cost.j)
    return select_best(results), results
