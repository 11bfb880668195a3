"""Computational-geometry kernel: planes, 2D polygons, alpha shapes, IoU."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay

from .errors import AlphaTooSmallError, DegenerateGeometryError

_EPS = 1e-12


# -- planes ------------------------------------------------------------------

@dataclass(frozen=True)
class Plane:
    a: float
    b: float
    c: float
    d: float

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d])


def _orient_normal(n: np.ndarray) -> np.ndarray:
    # c >= 0, ties broken on b then a; rounding guards sign flips on tiny components
    for k in (2, 1, 0):
        if abs(n[k]) > 1e-12:
            return n if n[k] > 0 else -n
    return n


def fit_plane_svd(vertices) -> Plane:
    """Least-squares plane through 3D vertices.

    The vertices are centred on their centroid and arranged as a 3 x n
    matrix; the left singular vector of the smallest singular value is the
    unit normal and the offset follows from the centroid.
    """
    v = np.asarray(vertices, dtype=float).reshape(-1, 3)
    if v.shape[0] < 3:
        raise DegenerateGeometryError(f"plane fit needs at least 3 vertices, got {v.shape[0]}")
    centre = v.mean(axis=0)
    centred = (v - centre).T
    u, sigma, _ = np.linalg.svd(centred, full_matrices=True)
    scale = max(sigma[0], 1.0)
    if sigma[1] <= 1e-12 * scale:
        raise DegenerateGeometryError("vertices are collinear or coincident")
    normal = _orient_normal(u[:, 2])
    return Plane(*normal.tolist(), float(-normal @ centre))


def face_planes(vertices: np.ndarray, faces) -> np.ndarray:
    """Plane coefficients (m, 4) for each face ring of a vertex array.

    Same construction as :func:`fit_plane_svd` but batched per ring size and
    without the degeneracy check, for use inside the objective.
    """
    out = np.empty((len(faces), 4))
    by_size = {}
    for j, ring in enumerate(faces):
        by_size.setdefault(len(ring), []).append(j)
    for size, idx in by_size.items():
        rings = np.array([faces[j] for j in idx])
        pts = vertices[rings]  # (k, size, 3)
        centre = pts.mean(axis=1)
        centred = np.transpose(pts - centre[:, None, :], (0, 2, 1))  # (k, 3, size)
        u = np.linalg.svd(centred, full_matrices=True)[0]
        normal = u[:, :, 2]
        flip = np.where(normal[:, 2] < 0, -1.0, 1.0)
        normal = normal * flip[:, None]
        out[idx, :3] = normal
        out[idx, 3] = -np.einsum("ij,ij->i", normal, centre)
    return out


def point_plane_distance(p, plane: Plane):
    p = np.asarray(p, dtype=float)
    return np.abs(p @ plane.normal + plane.d)


def min_plane_distances(points: np.ndarray, planes: np.ndarray) -> np.ndarray:
    """Per-point distance to the nearest of several planes."""
    return np.abs(points @ planes[:, :3].T + planes[:, 3]).min(axis=1)


def plan_face_distances(points: np.ndarray, vertices: np.ndarray, faces) -> np.ndarray:
    """Per-point distance to the plane of the face lying above or below it in plan.

    Faces must be convex. Points outside every face's plan polygon fall
    back to the nearest plane.
    """
    pts = np.asarray(points, dtype=float)
    planes = face_planes(vertices, faces)
    dist = np.abs(pts @ planes[:, :3].T + planes[:, 3])
    inside = np.zeros(dist.shape, dtype=bool)
    x, y = pts[:, 0], pts[:, 1]
    for j, ring in enumerate(faces):
        poly = vertices[list(ring), :2]
        if abs(signed_area(poly)) <= 1e-12:
            continue
        sides = []
        for k in range(len(poly)):
            a, b = poly[k], poly[(k + 1) % len(poly)]
            sides.append((b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]))
        sides = np.array(sides)
        inside[:, j] = np.all(sides >= 0, axis=0) | np.all(sides <= 0, axis=0)
    assigned = np.where(inside, dist, np.inf).min(axis=1)
    loose = ~np.isfinite(assigned)
    assigned[loose] = dist[loose].min(axis=1)
    return assigned


# -- polygons -----------------------------------------------------------------

def signed_area(ring) -> float:
    r = np.asarray(ring, dtype=float)
    x, y = r[:, 0], r[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(ring) -> bool:
    """True when two non-adjacent edges of a closed ring intersect."""
    p = np.asarray(ring)
    q = np.roll(p, -1, axis=0)
    n = len(p)
    if n < 4:
        return False

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])

    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    a, b, c, d = p[i], q[i], p[j], q[j]
    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    proper = (o1 * o2 < 0) & (o3 * o4 < 0)
    return bool(proper.any())


class Polygon2D:
    """Simple polygon stored as a counter-clockwise (n, 2) vertex ring.

    Clockwise input is reversed. With ``check=True`` the constructor rejects
    rings that self-intersect, repeat consecutive vertices or have fewer than
    three vertices.
    """

    __slots__ = ("ring",)

    def __init__(self, ring, check: bool = True):
        r = np.array(ring, dtype=float).reshape(-1, 2)
        if len(r) > 1 and np.array_equal(r[0], r[-1]):
            r = r[:-1]
        if check:
            if len(r) < 3:
                raise DegenerateGeometryError("polygon needs at least 3 vertices")
            if np.any(np.all(r == np.roll(r, -1, axis=0), axis=1)):
                raise DegenerateGeometryError("polygon repeats a consecutive vertex")
            if _segments_cross(r):
                raise DegenerateGeometryError("polygon is self-intersecting")
        if signed_area(r) < 0:
            r = r[::-1]
        r.setflags(write=False)
        self.ring = r

    def __len__(self):
        return len(self.ring)

    def __repr__(self):
        return f"Polygon2D({len(self.ring)} vertices, area={self.area:.4g})"

    @property
    def area(self) -> float:
        return polygon_area(self)

    def translated(self, dx, dy) -> "Polygon2D":
        return Polygon2D(self.ring + np.array([dx, dy]), check=False)

    def is_convex(self) -> bool:
        return is_convex(self.ring)


def polygon_area(poly) -> float:
    ring = poly.ring if isinstance(poly, Polygon2D) else poly
    return abs(signed_area(ring))


def is_convex(ring) -> bool:
    r = np.asarray(ring)
    e = np.roll(r, -1, axis=0) - r
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    return bool(np.all(cross >= -1e-12) or np.all(cross <= 1e-12))


def _clip_halfplane(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # one Sutherland-Hodgman pass: keep the part left of the directed line a->b
    s = (b[0] - a[0]) * (p[:, 1] - a[1]) - (b[1] - a[1]) * (p[:, 0] - a[0])
    inside = s >= 0.0
    if inside.all():
        return p
    if not inside.any():
        return p[:0]
    prev = np.roll(p, 1, axis=0)
    s_prev = np.roll(s, 1)
    crossing = inside != np.roll(inside, 1)
    denom = np.where(crossing, s_prev - s, 1.0)
    t = s_prev / denom
    hit = prev + t[:, None] * (p - prev)
    candidates = np.stack([hit, p], axis=1)
    mask = np.stack([crossing, inside], axis=1)
    return candidates[mask]


def clip_to_convex(subject, window) -> np.ndarray:
    """Clip any simple ring against a convex counter-clockwise window.

    Returns a single ring; when the true intersection has several pieces they
    are joined by zero-width bridges along the window edges, which leaves the
    shoelace area equal to the summed piece areas.
    """
    out = np.asarray(subject, dtype=float)
    w = np.asarray(window, dtype=float)
    for k in range(len(w)):
        out = _clip_halfplane(out, w[k], w[(k + 1) % len(w)])
        if len(out) == 0:
            break
    return out


def _ear_triangles(ring: np.ndarray):
    """Ear-clipping triangulation of a CCW simple ring (O(n^2))."""
    idx = list(range(len(ring)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3 and guard < 10 * len(ring) ** 2:
        guard += 1
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = ring[i0], ring[i1], ring[i2]
            if cross(a, b, c) <= 0:
                continue
            contains = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = ring[j]
                if cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0:
                    contains = True
                    break
            if not contains:
                tris.append((i0, i1, i2))
                del idx[k]
                break
        else:
            break
    if len(idx) == 3:
        tris.append(tuple(idx))
    return [ring[list(t)] for t in tris]


def intersection_area(a: Polygon2D, b: Polygon2D) -> float:
    if a.is_convex():
        return abs(signed_area(clip_to_convex(b.ring, a.ring)))
    if b.is_convex():
        return abs(signed_area(clip_to_convex(a.ring, b.ring)))
    total = 0.0
    for tri in _ear_triangles(a.ring):
        piece = clip_to_convex(b.ring, tri)
        if len(piece) >= 3:
            total += abs(signed_area(piece))
    return total


def iou_2d(a: Polygon2D, b: Polygon2D) -> float:
    """Intersection over union of two simple polygons."""
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def rect_iou(rect: np.ndarray, rect_area: float, other: np.ndarray, other_area: float) -> float:
    """IoU fast path for a convex CCW window against a precomputed ring."""
    piece = clip_to_convex(other, rect)
    inter = abs(signed_area(piece)) if len(piece) >= 3 else 0.0
    union = rect_area + other_area - inter
    return min(max(inter / union, 0.0), 1.0) if union > 0 else 0.0


# -- hulls and rectangles ------------------------------------------------------

def convex_hull(points2d) -> np.ndarray:
    """Monotone-chain convex hull, CCW, collinear points dropped."""
    pts = np.unique(np.asarray(points2d, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        return pts

    def half(seq):
        chain = []
        for p in seq:
            while len(chain) >= 2:
                o, a = chain[-2], chain[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def _check_not_collinear(pts: np.ndarray):
    if len(pts) < 3:
        raise DegenerateGeometryError(f"need at least 3 points, got {len(pts)}")
    centred = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centred, compute_uv=False)
    if sv[-1] <= 1e-9 * max(sv[0], 1e-300):
        raise DegenerateGeometryError("points are collinear")


def min_area_rect(points2d):
    """Minimum-area oriented bounding rectangle.

    Every convex-hull edge direction is a candidate orientation (the
    rotating-calipers argument); all of them are evaluated at once.

    Returns:
        ``(center, l, w, theta)`` with ``l >= w`` and ``theta`` in
        ``[-pi/2, pi/2)`` giving the direction of the long side.
    """
    pts = np.asarray(points2d, dtype=float).reshape(-1, 2)
    _check_not_collinear(pts)
    hull = convex_hull(pts)
    edges = np.roll(hull, -1, axis=0) - hull
    phi = np.unique(np.mod(np.arctan2(edges[:, 1], edges[:, 0]), math.pi / 2))
    u = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    v = np.stack([-np.sin(phi), np.cos(phi)], axis=1)
    pu = hull @ u.T
    pv = hull @ v.T
    ext_u = pu.max(axis=0) - pu.min(axis=0)
    ext_v = pv.max(axis=0) - pv.min(axis=0)
    k = int(np.argmin(ext_u * ext_v))
    mid_u = 0.5 * (pu[:, k].max() + pu[:, k].min())
    mid_v = 0.5 * (pv[:, k].max() + pv[:, k].min())
    center = mid_u * u[k] + mid_v * v[k]
    if ext_u[k] >= ext_v[k]:
        l, w, theta = ext_u[k], ext_v[k], phi[k]
    else:
        l, w, theta = ext_v[k], ext_u[k], phi[k] + math.pi / 2
    theta = (theta + math.pi / 2) % math.pi - math.pi / 2
    return center, float(l), float(w), float(theta)


# -- alpha shapes ----------------------------------------------------------------

def _walk_loops(heads: np.ndarray, tails: np.ndarray, pts: np.ndarray):
    """Chain directed boundary edges into closed loops.

    At a vertex with several outgoing edges, the next edge is the first one
    met when turning clockwise from the reversed incoming edge, which splits
    pinched boundaries into separate simple loops.
    """
    outgoing = {}
    for e, h in enumerate(heads):
        outgoing.setdefault(int(h), []).append(e)
    used = np.zeros(len(heads), dtype=bool)
    loops = []
    for start in range(len(heads)):
        if used[start]:
            continue
        loop = []
        e = start
        while not used[e]:
            used[e] = True
            loop.append(int(heads[e]))
            v = int(tails[e])
            cands = [c for c in outgoing.get(v, []) if not used[c]]
            if not cands:
                break
            if len(cands) == 1:
                e = cands[0]
                continue
            back = pts[int(heads[e])] - pts[v]
            ref = math.atan2(back[1], back[0])
            best, best_turn = None, None
            for c in cands:
                d = pts[int(tails[c])] - pts[v]
                turn = (ref - math.atan2(d[1], d[0])) % (2 * math.pi)
                if turn <= 0:
                    turn += 2 * math.pi
                if best_turn is None or turn < best_turn:
                    best, best_turn = c, turn
            e = best
        if len(loop) >= 3:
            loops.append(loop)
    return loops


def alpha_shape_boundary(points2d, alpha_radius: float) -> Polygon2D:
    """Outer boundary of the 2D alpha shape with disk radius ``alpha_radius``.

    Delaunay triangles whose circumradius does not exceed the radius form the
    alpha complex. Of its edge-connected components the one with the largest
    area is kept and its outer ring returned; holes are dropped.
    """
    if not alpha_radius > 0:
        raise ValueError("alpha_radius must be positive")
    pts = np.asarray(points2d, dtype=float).reshape(-1, 2)
    _check_not_collinear(pts)
    tri = Delaunay(pts)
    simp = tri.simplices.copy()
    a, b, c = pts[simp[:, 0]], pts[simp[:, 1]], pts[simp[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    cw = cross < 0
    simp[cw] = simp[cw][:, [0, 2, 1]]
    neigh = tri.neighbors.copy()
    neigh[cw] = neigh[cw][:, [0, 2, 1]]  # neighbour k sits opposite vertex k
    area2 = np.abs(cross)
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(c - a, axis=1)
    lc = np.linalg.norm(a - b, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        radius = np.where(area2 > 0, la * lb * lc / (2.0 * area2), np.inf)
    keep = radius <= alpha_radius
    if not keep.any():
        raise AlphaTooSmallError(f"alpha radius {alpha_radius} leaves no triangles")

    kept = np.flatnonzero(keep)
    pos = -np.ones(len(simp), dtype=int)
    pos[kept] = np.arange(len(kept))
    nb = neigh[kept]
    rows, cols = np.nonzero((nb >= 0) & keep[np.maximum(nb, 0)])
    graph = coo_matrix((np.ones(len(rows)), (rows, pos[nb[rows, cols]])), shape=(len(kept), len(kept)))
    n_comp, labels = connected_components(graph, directed=False)
    comp_area = np.bincount(labels, weights=area2[kept] / 2.0, minlength=n_comp)
    best = int(np.argmax(comp_area))
    members = kept[labels == best]

    in_comp = np.zeros(len(simp), dtype=bool)
    in_comp[members] = True
    heads, tails = [], []
    for k in range(3):
        nk = neigh[members, k]
        boundary = (nk < 0) | ~in_comp[np.maximum(nk, 0)]
        # edge opposite vertex k runs from vertex k+1 to vertex k+2 (CCW)
        heads.append(simp[members[boundary], (k + 1) % 3])
        tails.append(simp[members[boundary], (k + 2) % 3])
    heads = np.concatenate(heads)
    tails = np.concatenate(tails)
    loops = _walk_loops(heads, tails, pts)
    if not loops:
        raise AlphaTooSmallError("alpha complex has no closed boundary")
    areas = [signed_area(pts[loop]) for loop in loops]
    outer = loops[int(np.argmax(areas))]
    return Polygon2D(pts[outer], check=False)
