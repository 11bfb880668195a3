import math

import numpy as np
import pytest

from roofprim import primitives as prims
from roofprim.geometry import Polygon2D
from roofprim.pointcloud import to_local

ACCEPTANCE = {}


def record(number: int, passed: bool, detail: str):
    """Store one acceptance line; printed in the terminal summary."""
    ACCEPTANCE[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


def gable(l=10.0, w=8.0, h=3.0, kappa=0.0, t=(0.0, 0.0, 0.0), tg=(0.0, 0.0, 0.0)):
    return prims.RoofPrimitive("gable", prims.ShapeParams(l, w, h), prims.Pose(kappa, t),
                               prims.GlobalTranslation(*tg))


def hip(l=12.0, w=8.0, h=3.0, rho=0.5, kappa=0.0, t=(0.0, 0.0, 0.0), tg=(0.0, 0.0, 0.0)):
    return prims.RoofPrimitive("hip", prims.ShapeParams(l, w, h, rho), prims.Pose(kappa, t),
                               prims.GlobalTranslation(*tg))


def pyramid(l=10.0, w=8.0, h=3.0, kappa=0.0, t=(0.0, 0.0, 0.0), tg=(0.0, 0.0, 0.0)):
    return prims.RoofPrimitive("pyramid", prims.ShapeParams(l, w, h), prims.Pose(kappa, t),
                               prims.GlobalTranslation(*tg))


def exact_boundary(prim, t_global):
    """Footprint rectangle of ``prim`` in the frame of a cloud centred at ``t_global``."""
    ring = prims.footprint_corners(prim) + prim.t_global.as_array()[:2] - t_global.as_array()[:2]
    return Polygon2D(ring)


def local_with_boundary(cloud, prim):
    local, tg = to_local(cloud)
    return local, tg, exact_boundary(prim, tg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rotation2d(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])
