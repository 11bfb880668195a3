"""Synthetic roof clouds and the banded vertical noise model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .. import primitives as prims
from ..errors import InvalidParameterError
from ..pointcloud import WORLD, PointCloud

BANDS = 3


@dataclass(frozen=True)
class NoiseModel:
    """Vertical noise with a fixed RMSE and band occupancy.

    ``band_probs[k]`` is the share of points whose error magnitude lies in
    ``[k, k+1) * rmse``. ``rmse == 0`` disables noise.
    """

    rmse: float = 0.12
    band_probs: tuple = (0.90, 0.09, 0.01)
    direction: str = "vertical"
    seed: int = 0

    def __post_init__(self):
        probs = tuple(float(p) for p in self.band_probs)
        object.__setattr__(self, "band_probs", probs)
        if len(probs) != BANDS or any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise InvalidParameterError("band_probs", "need three non-negative probabilities summing to 1")
        if not (math.isfinite(self.rmse) and self.rmse >= 0):
            raise InvalidParameterError("rmse", "must be finite and non-negative")
        if self.direction != "vertical":
            raise InvalidParameterError("direction", f"unsupported noise direction {self.direction!r}")


def _band_moment(k: int, lam: float) -> float:
    # E[u^2] for density proportional to exp(lam * u^2) on [k, k+1)
    shift = lam * (k + 1) ** 2 if lam > 0 else lam * k ** 2
    num = quad(lambda u: u * u * math.exp(lam * u * u - shift), k, k + 1)[0]
    den = quad(lambda u: math.exp(lam * u * u - shift), k, k + 1)[0]
    return num / den


@lru_cache(maxsize=32)
def _tilt(band_probs: tuple) -> float:
    """Exponent ``lam`` making the banded density have unit second moment.

    Within each band the magnitude density is proportional to
    ``exp(lam * u^2)``, the maximum-entropy shape once band masses and the
    second moment are both pinned.
    """
    def excess(lam):
        return sum(p * _band_moment(k, lam) for k, p in enumerate(band_probs) if p > 0) - 1.0

    lo, hi = -50.0, 50.0
    if excess(lo) > 0 or excess(hi) < 0:
        raise InvalidParameterError("band_probs", "cannot reach the requested RMSE with these bands")
    return brentq(excess, lo, hi, xtol=1e-12)


@lru_cache(maxsize=32)
def _inverse_cdf_tables(band_probs: tuple, resolution: int = 4097):
    lam = _tilt(band_probs)
    tables = []
    for k in range(BANDS):
        u = np.linspace(k, k + 1, resolution)
        dens = np.exp(lam * (u * u - (k + 1) ** 2 if lam > 0 else u * u - k * k))
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(u))])
        tables.append((cdf / cdf[-1], u))
    return tables


def draw_magnitudes(n: int, model: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Noise magnitudes in metres, rescaled to hit ``model.rmse`` exactly."""
    if n == 0 or model.rmse == 0:
        return np.zeros(n)
    tables = _inverse_cdf_tables(model.band_probs)
    # one uniform per stratum of [0, 1), shuffled: each draw keeps the exact
    # marginal law, while band counts and the second moment barely fluctuate,
    # so the final rescale moves almost nothing across a band edge
    q = (rng.permutation(n) + rng.random(n)) / n
    edges = np.concatenate([[0.0], np.cumsum(model.band_probs)])
    band = np.clip(np.searchsorted(edges, q, side="right") - 1, 0, BANDS - 1)
    mag = np.empty(n)
    for k, (cdf, u) in enumerate(tables):
        sel = band == k
        if np.any(sel):
            local = np.clip((q[sel] - edges[k]) / model.band_probs[k], 0.0, 1.0)
            mag[sel] = np.interp(local, cdf, u)
    mag *= model.rmse
    realized = math.sqrt(float(np.mean(mag * mag)))
    if realized > 0:
        mag *= model.rmse / realized
    return mag


def add_noise(cloud: PointCloud, model: NoiseModel, rng=None) -> PointCloud:
    """Perturb every point up or down by a banded random magnitude."""
    rng = np.random.default_rng(model.seed) if rng is None else rng
    n = len(cloud)
    mag = draw_magnitudes(n, model, rng)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    pts = np.array(cloud.points)
    pts[:, 2] += sign * mag
    return cloud.with_points(pts)


def _posed_triangles(prim: prims.RoofPrimitive) -> np.ndarray:
    verts = prims.apply_pose(prims.roof_vertices(prim.kind, prim.shape), prim.pose)
    verts = verts + prim.t_global.as_array()
    tris = []
    for ring in prims.definition(prim.kind).faces:
        for k in range(1, len(ring) - 1):
            tris.append(verts[[ring[0], ring[k], ring[k + 1]]])
    return np.array(tris)


def roof_area(prim: prims.RoofPrimitive) -> float:
    tris = _posed_triangles(prim)
    return float(0.5 * np.linalg.norm(np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1).sum())


def sample_surface(prim: prims.RoofPrimitive, density: float, seed=0, srs_name=None) -> PointCloud:
    """Poisson sample of the roof faces at ``density`` points per square metre.

    Points land uniformly by area on the slanted roof faces, in the world
    frame (the primitive's global translation is applied).
    """
    if not density > 0:
        raise InvalidParameterError("density", "must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tris = _posed_triangles(prim)
    areas = 0.5 * np.linalg.norm(np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1)
    keep = areas > 0
    tris, areas = tris[keep], areas[keep]
    n = int(rng.poisson(density * areas.sum()))
    which = rng.choice(len(tris), size=n, p=areas / areas.sum())
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    t = tris[which]
    pts = (t[:, 0] * (1 - r1)[:, None] + t[:, 1] * (r1 * (1 - r2))[:, None]
           + t[:, 2] * (r1 * r2)[:, None])
    return PointCloud(pts, WORLD, srs_name)
