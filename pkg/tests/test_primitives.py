import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roofprim import primitives as prims
from roofprim.errors import InvalidParameterError, ShapeError
from roofprim.geometry import polygon_area

from conftest import gable, hip, pyramid


def as_set(vertices):
    return {tuple(np.round(v, 12)) for v in vertices}


def test_gable_vertices():
    v = prims.roof_vertices("gable", prims.ShapeParams(10, 8, 3))
    assert len(v) == 6
    pts = as_set(v)
    assert {(5.0, 0.0, 3.0), (-5.0, 0.0, 3.0)} <= pts
    assert {(sx * 5.0, sy * 4.0, 0.0) for sx in (-1, 1) for sy in (-1, 1)} <= pts


def test_hip_degenerates():
    s = dict(l=10.0, w=8.0, h=3.0)
    assert as_set(prims.roof_vertices("hip", prims.ShapeParams(**s, rho=0.0))) == \
        as_set(prims.roof_vertices("pyramid", prims.ShapeParams(**s)))
    np.testing.assert_allclose(prims.roof_vertices("hip", prims.ShapeParams(**s, rho=1.0)),
                               prims.roof_vertices("gable", prims.ShapeParams(**s)))


def test_gable_faces_follow_vertex_labels():
    # one-based v4 v3 v2 v1 and v3 v4 v5 v6
    faces = prims.roof_faces("gable").faces
    assert [[i + 1 for i in f] for f in faces] == [[4, 3, 2, 1], [3, 4, 5, 6]]


def test_pyramid_faces_share_apex():
    topo = prims.roof_faces("pyramid")
    assert len(topo.faces) == 4
    apex = topo.vertex_count - 1
    assert all(apex in f for f in topo.faces)


def boundary_edges(faces):
    count = Counter()
    for f in faces:
        for a, b in zip(f, f[1:] + f[:1]):
            count[frozenset((a, b))] += 1
    return [e for e, n in count.items() if n == 1]


@pytest.mark.parametrize("kind,n_faces,n_boundary", [("pyramid", 4, 4), ("gable", 2, 6), ("hip", 4, 4)])
def test_face_topology(kind, n_faces, n_boundary):
    faces = [tuple(f) for f in prims.roof_faces(kind).faces]
    assert len(faces) == n_faces
    assert len(boundary_edges(faces)) == n_boundary


@pytest.mark.parametrize("kind", ["pyramid", "gable", "hip"])
def test_faces_point_up(kind):
    s = prims.ShapeParams(10, 6, 3, 0.4 if kind == "hip" else None)
    v = prims.roof_vertices(kind, s)
    for f in prims.roof_faces(kind).faces:
        ring = v[list(f)]
        n = np.zeros(3)
        for a, b in zip(ring, np.roll(ring, -1, axis=0)):
            n += np.cross(a, b)
        assert n[2] > 0


def test_apply_pose_quarter_turn():
    out = prims.apply_pose([[1, 0, 0]], prims.Pose(math.pi / 2))
    np.testing.assert_allclose(out, [[0, 1, 0]], atol=1e-12)


def test_apply_pose_translation():
    np.testing.assert_array_equal(prims.apply_pose([[0, 0, 0]], prims.Pose(0, (1, 2, 3))), [[1, 2, 3]])


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.tuples(*[st.floats(-100, 100)] * 3))
def test_pose_inverse(kappa, t):
    pose = prims.Pose(kappa, t)
    v = np.array([[1.0, 2.0, 3.0], [-4.0, 0.5, 0.0]])
    back = prims.apply_pose(prims.apply_pose(v, pose), pose.inverse())
    np.testing.assert_allclose(back, v, atol=1e-12 * 200)


def test_footprint_ring():
    p = prims.RoofPrimitive("gable", prims.ShapeParams(2, 1, 1))
    ring = prims.footprint_polygon(p).ring
    np.testing.assert_allclose(ring, [(-1, -0.5), (1, -0.5), (1, 0.5), (-1, 0.5)])


def test_footprint_quarter_turn_swaps_extent():
    p = prims.RoofPrimitive("gable", prims.ShapeParams(4, 2, 1), prims.Pose(math.pi / 2))
    ring = prims.footprint_corners(p)
    ext = ring.max(axis=0) - ring.min(axis=0)
    np.testing.assert_allclose(ext, [2, 4], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 200), st.floats(0.5, 200), st.floats(-math.pi, math.pi),
       st.tuples(st.floats(-50, 50), st.floats(-50, 50)))
def test_footprint_area(l, w, kappa, t):
    p = prims.RoofPrimitive("pyramid", prims.ShapeParams(l, w, 1.0), prims.Pose(kappa, (*t, 0.0)))
    assert polygon_area(prims.footprint_polygon(p)) == pytest.approx(l * w, rel=1e-9)


@pytest.mark.parametrize("prim", [gable(kappa=0.3, t=(1, -2, 4)), hip(rho=0.25, kappa=-1.2), pyramid(kappa=1.0)])
def test_pack_unpack(prim):
    x = prims.pack(prim)
    assert prims.unpack(prim.kind, x) == prim


def test_vector_lengths():
    assert len(prims.pack(gable())) == 7
    assert len(prims.pack(hip())) == 8
    assert prims.vector_names("hip") == ("l", "w", "h", "rho", "kappa", "tx", "ty", "tz")


def test_unpack_bounds():
    x = prims.pack(gable())
    x[0] = 0.0
    with pytest.raises(InvalidParameterError) as exc:
        prims.unpack("gable", x)
    assert exc.value.field == "l"
    with pytest.raises(ShapeError):
        prims.unpack("gable", np.zeros(8))


def test_shape_validation():
    with pytest.raises(InvalidParameterError):
        prims.RoofPrimitive("gable", prims.ShapeParams(1, 1, 1, 0.5))
    with pytest.raises(InvalidParameterError):
        prims.RoofPrimitive("hip", prims.ShapeParams(1, 1, 1, 1.5))
    with pytest.raises(InvalidParameterError):
        prims.RoofPrimitive("dome", prims.ShapeParams(1, 1, 1))
    with pytest.raises(InvalidParameterError):
        prims.RoofPrimitive("gable", prims.ShapeParams(-1, 1, 1))


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["pyramid", "gable", "hip"]), st.floats(1, 20), st.floats(1, 20),
       st.floats(-7, 7), st.floats(0, 1))
def test_canonical_preserves_geometry(kind, l, w, kappa, rho):
    s = prims.ShapeParams(l, w, 2.0, rho if kind == "hip" else None)
    p = prims.RoofPrimitive(kind, s, prims.Pose(kappa, (1.0, 2.0, 3.0)))
    c = p.canonical()
    assert -math.pi / 2 <= c.pose.kappa < math.pi / 2
    a = prims.apply_pose(prims.roof_vertices(kind, p.shape), p.pose)
    b = prims.apply_pose(prims.roof_vertices(kind, c.shape), c.pose)
    assert as_set(np.round(a, 8)) == as_set(np.round(b, 8))
    if kind == "pyramid":
        assert c.shape.l >= c.shape.w
