"""CityGML 2.0 LoD2 output."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Iterable

import numpy as np

from .._io import atomic_open
from .model import BuildingModel

NS = {
    "core": "http://www.opengis.net/citygml/2.0",
    "bldg": "http://www.opengis.net/citygml/building/2.0",
    "gml": "http://www.opengis.net/gml",
    "xlink": "http://www.w3.org/1999/xlink",
}
for _prefix, _uri in NS.items():
    ET.register_namespace(_prefix, _uri)

SIGNIFICANT_DIGITS = 9


def _q(tag: str) -> str:
    prefix, name = tag.split(":")
    return f"{{{NS[prefix]}}}{name}"


def _sub(parent, tag, text=None, **attrs):
    el = ET.SubElement(parent, _q(tag), {(_q(k) if ":" in k else k): v for k, v in attrs.items()})
    if text is not None:
        el.text = text
    return el


def format_coords(points) -> str:
    pts = np.asarray(points, dtype=float).reshape(-1)
    return " ".join(f"{v:.{SIGNIFICANT_DIGITS}g}" for v in pts)


def _envelope(parent, lower, upper, srs_name):
    env = _sub(_sub(parent, "gml:boundedBy"), "gml:Envelope", srsDimension="3")
    if srs_name:
        env.set("srsName", srs_name)
    _sub(env, "gml:lowerCorner", format_coords(lower))
    _sub(env, "gml:upperCorner", format_coords(upper))


def _building(parent, model: BuildingModel):
    bid = model.id
    b = _sub(_sub(parent, "core:cityObjectMember"), "bldg:Building", **{"gml:id": bid})
    _envelope(b, model.envelope[0], model.envelope[1], model.srs_name)
    if model.kind:
        _sub(b, "bldg:roofType", model.kind)
    _sub(b, "bldg:measuredHeight", f"{model.measured_height:.{SIGNIFICANT_DIGITS}g}", uom="m")

    poly_ids = [f"{bid}_poly_{i}" for i in range(len(model.surfaces))]
    shell = _sub(_sub(_sub(_sub(b, "bldg:lod2Solid"), "gml:Solid"), "gml:exterior"), "gml:CompositeSurface")
    for pid in poly_ids:
        _sub(shell, "gml:surfaceMember", **{"xlink:href": f"#{pid}"})

    if model.terrain_curve is not None:
        mc = _sub(_sub(b, "bldg:lod2MultiCurve"), "gml:MultiCurve")
        line = _sub(_sub(mc, "gml:curveMember"), "gml:LineString")
        _sub(line, "gml:posList", format_coords(model.terrain_curve), srsDimension="3")

    for i, (surface, pid) in enumerate(zip(model.surfaces, poly_ids)):
        s = _sub(_sub(b, "bldg:boundedBy"), f"bldg:{surface.label.value}", **{"gml:id": f"{bid}_surf_{i}"})
        ms = _sub(_sub(s, "bldg:lod2MultiSurface"), "gml:MultiSurface")
        poly = _sub(_sub(ms, "gml:surfaceMember"), "gml:Polygon", **{"gml:id": pid})
        ring = _sub(_sub(poly, "gml:exterior"), "gml:LinearRing")
        _sub(ring, "gml:posList", format_coords(surface.ring), srsDimension="3")


def citygml_tree(models: Iterable[BuildingModel], srs_name: str = "") -> ET.ElementTree:
    models = list(models)
    root = ET.Element(_q("core:CityModel"))
    if models:
        lower = np.min([m.envelope[0] for m in models], axis=0)
        upper = np.max([m.envelope[1] for m in models], axis=0)
        _envelope(root, lower, upper, srs_name or models[0].srs_name)
    for m in models:
        _building(root, m)
    tree = ET.ElementTree(root)
    ET.indent(tree, space="  ")
    return tree


def write_citygml(models, path, srs_name: str = ""):
    """Write one CityModel holding every given building (a single model is fine too)."""
    if isinstance(models, BuildingModel):
        models = [models]
    tree = citygml_tree(models, srs_name)
    with atomic_open(path, "wb") as fh:
        tree.write(fh, encoding="UTF-8", xml_declaration=True)
