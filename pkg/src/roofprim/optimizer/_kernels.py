"""Compiled inner loops of the objective.

These mirror ``geometry.face_planes``, ``min_plane_distances`` and
``rect_iou`` one for one; the numpy versions stay the reference and the
tests compare the two.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def planes_from_faces(verts, faces, sizes):
    m = faces.shape[0]
    out = np.empty((m, 4))
    for j in range(m):
        k = sizes[j]
        centre = np.zeros(3)
        for i in range(k):
            centre += verts[faces[j, i]]
        centre /= k
        centred = np.empty((3, k))
        for i in range(k):
            for a in range(3):
                centred[a, i] = verts[faces[j, i], a] - centre[a]
        u, _, _ = np.linalg.svd(centred)
        nx, ny, nz = u[0, 2], u[1, 2], u[2, 2]
        if nz < 0:
            nx, ny, nz = -nx, -ny, -nz
        out[j, 0] = nx
        out[j, 1] = ny
        out[j, 2] = nz
        out[j, 3] = -(nx * centre[0] + ny * centre[1] + nz * centre[2])
    return out


@njit(cache=True)
def mean_min_distance(points, planes):
    total = 0.0
    m = planes.shape[0]
    for i in range(points.shape[0]):
        x, y, z = points[i, 0], points[i, 1], points[i, 2]
        best = np.inf
        for j in range(m):
            d = abs(planes[j, 0] * x + planes[j, 1] * y + planes[j, 2] * z + planes[j, 3])
            if d < best:
                best = d
        total += best
    return total / points.shape[0]


@njit(cache=True)
def _clip(src, n, ax, ay, bx, by, dst):
    # keep the part of src[:n] left of a->b, written to dst; returns new length
    if n == 0:
        return 0
    out = 0
    px, py = src[n - 1, 0], src[n - 1, 1]
    sp = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    for i in range(n):
        cx, cy = src[i, 0], src[i, 1]
        sc = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if (sc >= 0.0) != (sp >= 0.0):
            t = sp / (sp - sc)
            dst[out, 0] = px + t * (cx - px)
            dst[out, 1] = py + t * (cy - py)
            out += 1
        if sc >= 0.0:
            dst[out, 0] = cx
            dst[out, 1] = cy
            out += 1
        px, py, sp = cx, cy, sc
    return out


@njit(cache=True)
def rect_intersection_area(rect, ring):
    """Area of a simple ring clipped to a convex CCW quadrilateral."""
    n = ring.shape[0]
    # each pass at most doubles the vertex count
    a = np.empty((16 * n + 8, 2))
    b = np.empty((16 * n + 8, 2))
    a[:n] = ring
    for k in range(4):
        k1 = (k + 1) % 4
        n = _clip(a, n, rect[k, 0], rect[k, 1], rect[k1, 0], rect[k1, 1], b)
        a, b = b, a
        if n == 0:
            return 0.0
    if n < 3:
        return 0.0
    s = 0.0
    for i in range(n):
        j = (i + 1) % n
        s += a[i, 0] * a[j, 1] - a[j, 0] * a[i, 1]
    return abs(0.5 * s)
