"""The intermediate JSON file holding fitted primitive parameters."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .. import primitives as prims
from .._io import write_text
from ..errors import InputError, InvalidParameterError, SchemaError
from ..optimizer.config import CostBreakdown
from ..pointcloud import GlobalTranslation


@dataclass(frozen=True)
class ParamsRecord:
    primitive: prims.RoofPrimitive
    cost: Optional[CostBreakdown] = None
    srs_name: str = ""
    converged: Optional[bool] = None


def params_dict(prim: prims.RoofPrimitive, cost: Optional[CostBreakdown] = None,
                srs_name: str = "", converged: Optional[bool] = None) -> dict:
    names = prims.definition(prim.kind).shape_names
    out = {
        "kind": prim.kind.value,
        "theta_p": {n: getattr(prim.shape, n) for n in names},
        "theta_0": {"kappa": prim.pose.kappa, "t": list(prim.pose.t)},
        "t_global": prim.t_global.as_array().tolist(),
        "cost": cost.as_dict() if cost is not None else None,
        "srs_name": srs_name,
    }
    if converged is not None:
        out["converged"] = bool(converged)
    return out


def write_params_json(path, prim: prims.RoofPrimitive, cost: Optional[CostBreakdown] = None,
                      srs_name: str = "", converged: Optional[bool] = None):
    write_text(path, json.dumps(params_dict(prim, cost, srs_name, converged), indent=2) + "\n")


def _number(value, field, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise SchemaError(field, f"expected a finite number, got {value!r}", path)
    return float(value)


def _triple(value, field, path):
    if not isinstance(value, list) or len(value) != 3:
        raise SchemaError(field, "expected a list of three numbers", path)
    return tuple(_number(v, f"{field}[{i}]", path) for i, v in enumerate(value))


def _require(obj, key, field, path):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(field, "missing", path)
    return obj[key]


def record_from_dict(data: dict, path=None) -> ParamsRecord:
    if not isinstance(data, dict):
        raise SchemaError("<root>", "expected a JSON object", path)
    kind = _require(data, "kind", "kind", path)
    try:
        defn = prims.definition(kind)
    except InvalidParameterError:
        raise SchemaError("kind", f"unknown kind {kind!r}", path) from None
    theta_p = _require(data, "theta_p", "theta_p", path)
    shape = {n: _number(_require(theta_p, n, f"theta_p.{n}", path), f"theta_p.{n}", path)
             for n in defn.shape_names}
    extra = set(theta_p) - set(defn.shape_names)
    if extra:
        raise SchemaError(f"theta_p.{sorted(extra)[0]}", f"not a parameter of {defn.kind.value}", path)
    theta_0 = _require(data, "theta_0", "theta_0", path)
    kappa = _number(_require(theta_0, "kappa", "theta_0.kappa", path), "theta_0.kappa", path)
    t = _triple(_require(theta_0, "t", "theta_0.t", path), "theta_0.t", path)
    tg = _triple(_require(data, "t_global", "t_global", path), "t_global", path)
    try:
        prim = prims.RoofPrimitive(defn.kind, prims.ShapeParams(**shape), prims.Pose(kappa, t),
                                   GlobalTranslation(*tg))
    except InvalidParameterError as exc:
        raise SchemaError(f"theta_p.{exc.field}", str(exc), path) from None

    cost = data.get("cost")
    if cost is not None:
        values = {k: _number(_require(cost, k, f"cost.{k}", path), f"cost.{k}", path)
                  for k in ("j1", "j2", "beta", "j")}
        cost = CostBreakdown(**values)
    srs = data.get("srs_name", "") or ""
    if not isinstance(srs, str):
        raise SchemaError("srs_name", "expected a string", path)
    converged = data.get("converged")
    if converged is not None and not isinstance(converged, bool):
        raise SchemaError("converged", "expected true or false", path)
    return ParamsRecord(prim, cost, srs, converged)


def read_params_json(path) -> ParamsRecord:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("<json>", exc.msg, path) from None
    return record_from_dict(data, path)
