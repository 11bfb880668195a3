"""Command-line entry point: ``roofprim <subcommand> ...``.

Exit codes: 0 success, 2 input or configuration error, 3 geometric or
extent error, 4 internal failure.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import math
import os
import sys
from dataclasses import fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import primitives as prims
from ._io import write_text
from .errors import InputError, InvalidParameterError, RoofPrimError
from .geometry import Polygon2D
from .harness.metrics import world_footprint
from .harness.quality import BuildingInput, QualityConfig, run_quality, write_quality
from .harness.stability import StabilityConfig, format_table, random_primitive, run_stability, write_stability
from .harness.synth import NoiseModel, add_noise, sample_surface
from .optimizer import OptimizerConfig, classify, fit
from .pointcloud import GlobalTranslation, load_cloud, write_xyz
from .reconstruct import (
    DEFAULT_WALL_HEIGHT, assemble, eave_z, footprint_xy, ground_elevation, read_dem, read_params_json,
    terrain_curve, write_citygml, write_params_json,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("roofprim")

CLOUD_SUFFIXES = (".xyz", ".txt", ".ply")
GLOBAL_DEFAULTS = {
    "seed": 0, "jobs": None, "config": None, "out_dir": None, "beta": None,
    "alpha_radius": None, "srs_name": None, "verbose": 0,
}


# -- configuration -------------------------------------------------------------

def load_config(path) -> dict:
    if path is None:
        return {}
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: {exc}") from exc
    unknown = set(data) - {"optimizer", "noise", "io"}
    if unknown:
        raise InvalidParameterError(sorted(unknown)[0], f"unknown config section in {path}")
    return data


def optimizer_config(args, cfg: dict) -> OptimizerConfig:
    values = dict(cfg.get("optimizer", {}))
    values.pop("alpha_radius", None)
    if args.beta is not None:
        values["beta"] = args.beta
    return OptimizerConfig.from_mapping(values)


def alpha_radius(args, cfg: dict) -> Optional[float]:
    value = args.alpha_radius if args.alpha_radius is not None else cfg.get("optimizer", {}).get("alpha_radius")
    if value is None:
        return None
    value = float(value)
    if not value > 0:
        raise InvalidParameterError("alpha_radius", "must be positive")
    return value


def noise_model(args, cfg: dict) -> NoiseModel:
    values = dict(cfg.get("noise", {}))
    values.pop("density", None)
    if getattr(args, "noise_rmse", None) is not None:
        values["rmse"] = args.noise_rmse
    known = {f.name for f in fields(NoiseModel)}
    unknown = set(values) - known
    if unknown:
        raise InvalidParameterError(sorted(unknown)[0], "unknown noise setting")
    if "band_probs" in values:
        values["band_probs"] = tuple(values["band_probs"])
    values.setdefault("seed", args.seed)
    return NoiseModel(**values)


def density(args, cfg: dict) -> float:
    value = args.density if args.density is not None else cfg.get("noise", {}).get("density", 4.72)
    if not value > 0:
        raise InvalidParameterError("density", "must be positive")
    return float(value)


def io_setting(args, cfg: dict, name: str, default=None):
    flag = getattr(args, name, None)
    if flag is not None:
        return flag
    return cfg.get("io", {}).get(name, default)


def out_dir(args, cfg: dict) -> Path:
    return Path(io_setting(args, cfg, "out_dir", "."))


def jobs(args) -> int:
    n = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    if n < 1:
        raise InvalidParameterError("jobs", "must be at least 1")
    return n


def expand_inputs(patterns, suffixes=None) -> list:
    """Files named directly, matched by glob patterns, or found in named directories."""
    found = []
    for pattern in patterns:
        p = Path(pattern)
        if p.is_dir():
            found += sorted(q for q in p.iterdir() if q.is_file() and (suffixes is None or q.suffix.lower() in suffixes))
        elif any(ch in pattern for ch in "*?["):
            found += sorted(Path(m) for m in glob.glob(pattern))
        else:
            found.append(p)
    if not found:
        raise InputError(f"no input files match {' '.join(patterns)}")
    return found


def building_id(path) -> str:
    name = Path(path).name
    for suffix in (".params.json", ".truth.json"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return Path(path).stem


def read_footprint(path) -> Polygon2D:
    """Reference footprint: a truth/params JSON, or a text file of x y rows."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return Polygon2D(world_footprint(read_params_json(path).primitive))
    try:
        xy = np.loadtxt(path, ndmin=2, usecols=(0, 1))
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read footprint {path}: {exc}") from exc
    return Polygon2D(xy)


# -- subcommands -------------------------------------------------------------

def cmd_fit(args, cfg) -> int:
    srs = io_setting(args, cfg, "srs_name", "")
    cloud = load_cloud(args.input, args.format, srs)
    config = optimizer_config(args, cfg)
    radius = alpha_radius(args, cfg)
    if args.kind:
        result = fit(cloud, args.kind, config, alpha_radius=radius)
    else:
        kind, results = classify(cloud, config, alpha_radius=radius)
        for k, r in results:
            log.info("%-8s j=%.6f score=%.6f", k.value, r.cost.j, r.score)
        result = dict(results)[kind]
    out = Path(args.output) if args.output else out_dir(args, cfg) / f"{building_id(args.input)}.params.json"
    write_params_json(out, result.primitive, result.cost, srs, result.converged)
    c = result.cost
    print(f"kind={result.primitive.kind.value} j={c.j:.6f} j1={c.j1:.6f} j2={c.j2:.6f} beta={c.beta:g} "
          f"iterations={result.iterations} converged={str(result.converged).lower()}")
    if not result.converged:
        log.warning("optimizer stopped before convergence (%s); result written with converged=false",
                    result.message)
    print(out)
    return 0


def _reconstruct_one(path, args, cfg, dem, wall_height, srs):
    bid = building_id(path)
    if path.suffix.lower() == ".json":
        record = read_params_json(path)
        prim, srs = record.primitive, srs or record.srs_name
    else:
        cloud = load_cloud(path, args.format, srs)
        config = optimizer_config(args, cfg)
        kind, results = classify(cloud, config, alpha_radius=alpha_radius(args, cfg))
        prim = dict(results)[kind].primitive
    corners = footprint_xy(prim)
    try:
        base = ground_elevation(dem, corners, eave_z(prim) - wall_height)
        tic = terrain_curve(dem, corners) if dem is not None else None
    except RoofPrimError as exc:
        raise type(exc)(f"building {bid}: {exc}") from None
    return assemble(prim, base, srs_name=srs, building_id=bid, terrain_curve=tic)


def cmd_reconstruct(args, cfg) -> int:
    srs = io_setting(args, cfg, "srs_name", "")
    dem_path = args.dem or cfg.get("io", {}).get("dem")
    dem = read_dem(dem_path) if dem_path else None
    wall_height = float(io_setting(args, cfg, "wall_height", DEFAULT_WALL_HEIGHT))
    paths = expand_inputs(args.inputs, (".json",) + CLOUD_SUFFIXES)
    models = [_reconstruct_one(p, args, cfg, dem, wall_height, srs) for p in paths]
    models.sort(key=lambda m: m.id)
    out = Path(args.output) if args.output else out_dir(args, cfg) / "buildings.gml"
    write_citygml(models, out, srs)
    for m in models:
        print(f"{m.id}: {len(m.surfaces)} surfaces, measured height {m.measured_height:.3f} m")
    print(out)
    return 0


def cmd_synth(args, cfg) -> int:
    rng = np.random.default_rng(args.seed)
    if args.random:
        prim = random_primitive(args.kind, rng)
    else:
        prim = prims.RoofPrimitive(args.kind, prims.ShapeParams(args.l, args.w, args.h, args.rho),
                                   prims.Pose(args.kappa, (0.0, 0.0, 0.0)))
    prim = replace(prim, t_global=GlobalTranslation(args.tx, args.ty, args.tz + prim.pose.t[2]),
                   pose=prims.Pose(prim.pose.kappa, (0.0, 0.0, 0.0)))
    srs = io_setting(args, cfg, "srs_name", "")
    clean = sample_surface(prim, density(args, cfg), rng, srs or None)
    model = noise_model(args, cfg)
    cloud = add_noise(clean, model, rng) if model.rmse > 0 else clean
    realized = float(np.sqrt(np.mean((cloud.points[:, 2] - clean.points[:, 2]) ** 2))) if len(cloud) else 0.0
    out = Path(args.output) if args.output else out_dir(args, cfg) / f"{args.kind}_{args.seed}.xyz"
    truth = out.with_name(out.stem + ".truth.json")
    write_xyz(cloud, out, precision=9)
    write_params_json(truth, prim, None, srs)
    print(f"points={len(cloud)} realized_rmse={realized:.6f} m")
    print(out)
    print(truth)
    return 0


def cmd_stability(args, cfg) -> int:
    config = StabilityConfig(
        buildings_per_kind=args.buildings,
        trials_per_building=args.trials,
        density=density(args, cfg),
        noise=noise_model(args, cfg),
        seed=args.seed,
        kinds=tuple(args.kinds) if args.kinds else StabilityConfig().kinds,
        optimizer=optimizer_config(args, cfg),
        alpha_radius=alpha_radius(args, cfg),
        boundary=args.boundary,
    )
    rows, reports = run_stability(config, jobs(args))
    paths = write_stability(rows, reports, out_dir(args, cfg))
    print(format_table(rows))
    print(paths["summary"])
    return 0


def _pair(clouds, others, what):
    by_id = {}
    for p in others:
        by_id.setdefault(building_id(p), p)
    pairs = []
    for c in clouds:
        bid = building_id(c)
        if bid not in by_id:
            raise InputError(f"no {what} for cloud {c} (expected a file named {bid}.*)")
        pairs.append((c, by_id.pop(bid)))
    if by_id:
        extra = sorted(by_id)[0]
        raise InputError(f"{what} {by_id[extra]} has no matching cloud")
    return pairs


def _quality_config(args, cfg, dem=None) -> QualityConfig:
    return QualityConfig(
        optimizer=optimizer_config(args, cfg),
        alpha_radius=alpha_radius(args, cfg),
        wall_height=float(io_setting(args, cfg, "wall_height", DEFAULT_WALL_HEIGHT)),
        dem=dem,
        srs_name=io_setting(args, cfg, "srs_name", ""),
    )


def _report(report, out, plots=True):
    paths = write_quality(report, out, plots=plots)
    for a in report.aggregates:
        label = a.kind or a.scope
        print(f"{label:<8} buildings={a.n_buildings} psd_mean={a.psd_mean:.4f} m psd_std={a.psd_std:.4f} m "
              f"iou={a.iou:.4f} failed={a.n_failed}")
    return paths


def cmd_eval(args, cfg) -> int:
    srs = io_setting(args, cfg, "srs_name", "")
    clouds = expand_inputs(args.clouds, CLOUD_SUFFIXES)
    params = dict((building_id(c), p) for c, p in _pair(clouds, expand_inputs(args.params, (".json",)), "params file"))
    feet = {}
    if args.footprints:
        feet = dict((building_id(c), f) for c, f in _pair(clouds, expand_inputs(args.footprints), "footprint"))
    items = []
    for c in clouds:
        bid = building_id(c)
        fp = read_footprint(feet[bid]) if bid in feet else None
        items.append(BuildingInput(bid, load_cloud(c, args.format, srs), fp,
                                   fitted=read_params_json(params[bid]).primitive))
    report = run_quality(items, _quality_config(args, cfg), jobs(args))
    _report(report, out_dir(args, cfg), plots=not args.no_plots)
    return 0


def cmd_pipeline(args, cfg) -> int:
    srs = io_setting(args, cfg, "srs_name", "")
    clouds = expand_inputs(args.inputs, CLOUD_SUFFIXES)
    feet = {}
    if args.footprints:
        for p in expand_inputs([args.footprints], (".json", ".txt", ".csv")):
            if not p.name.endswith(".params.json"):
                feet.setdefault(building_id(p), p)
    dem_path = args.dem or cfg.get("io", {}).get("dem")
    dem = read_dem(dem_path) if dem_path else None
    items = []
    for c in clouds:
        bid = building_id(c)
        fp = read_footprint(feet[bid]) if bid in feet else None
        items.append(BuildingInput(bid, load_cloud(c, args.format, srs), fp))
    report = run_quality(items, _quality_config(args, cfg, dem), jobs(args))
    out = out_dir(args, cfg)
    for r in report.buildings:
        if r.primitive is not None:
            write_params_json(out / "params" / f"{r.id}.params.json", r.primitive, r.cost, srs, r.converged)
    models = [r.model for r in report.buildings if r.model is not None]
    if models:
        write_citygml(models, out / "buildings.gml", srs)
    _report(report, out, plots=not args.no_plots)
    failed = [r for r in report.buildings if r.error]
    for r in failed:
        log.error("%s: %s", r.id, r.error)
    return 0


# -- parser --------------------------------------------------------------------

def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else 0, help="random seed (default 0)")
    g.add_argument("--jobs", type=int, default=default, help="worker processes (default: all cores)")
    g.add_argument("--config", default=default, help="TOML file with [optimizer], [noise] and [io] sections")
    g.add_argument("--out-dir", default=default, help="output directory (default: current directory)")
    g.add_argument("--beta", type=float, default=default, help="weight of the footprint term")
    g.add_argument("--alpha-radius", type=float, default=default,
                   help="alpha-shape disk radius in metres (default: convex hull)")
    g.add_argument("--srs-name", default=default, help="spatial reference written to outputs")
    g.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roofprim", description="Fit parametric roofs to building point clouds.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    kinds = [k.value for k in prims.PrimitiveKind]

    p = sub.add_parser("fit", help="fit one cloud and write its parameter JSON")
    p.add_argument("input")
    p.add_argument("--kind", choices=kinds, help="skip classification and fit this kind")
    p.add_argument("--format", choices=["xyz-ascii", "ply-ascii"])
    p.add_argument("--output", help="parameter JSON path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("reconstruct", help="build CityGML from parameter files or clouds")
    p.add_argument("inputs", nargs="+", help="params JSON / cloud files, globs or directories")
    p.add_argument("--dem", help="ESRI ASCII elevation grid")
    p.add_argument("--wall-height", type=float, help=f"fallback wall height without a DEM (default {DEFAULT_WALL_HEIGHT})")
    p.add_argument("--format", choices=["xyz-ascii", "ply-ascii"])
    p.add_argument("--output", help="CityGML path (default OUT_DIR/buildings.gml)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("synth", help="sample a synthetic roof cloud")
    p.add_argument("--kind", choices=kinds, required=True)
    p.add_argument("--random", action="store_true", help="draw dimensions and orientation at random")
    for name in ("l", "w", "h", "rho"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--tx", type=float, default=0.0)
    p.add_argument("--ty", type=float, default=0.0)
    p.add_argument("--tz", type=float, default=0.0, help="eave elevation")
    p.add_argument("--density", type=float, help="points per square metre (default 4.72)")
    p.add_argument("--noise-rmse", type=float, help="vertical noise RMSE in metres (default 0.12)")
    p.add_argument("--out", "--output", dest="output", help="XYZ path (default OUT_DIR/<kind>_<seed>.xyz)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stability", help="repeated noisy re-fits of random buildings")
    p.add_argument("--buildings", type=int, default=20, help="buildings per kind")
    p.add_argument("--trials", type=int, default=30, help="noise trials per building")
    p.add_argument("--kinds", nargs="+", choices=kinds)
    p.add_argument("--density", type=float)
    p.add_argument("--noise-rmse", type=float)
    p.add_argument("--boundary", choices=["cloud", "exact"], default="cloud",
                   help="footprint for the IoU term: from the cloud, or the true rectangle")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("eval", help="score fitted parameters against their clouds")
    p.add_argument("clouds", nargs="+")
    p.add_argument("--params", nargs="+", required=True, help="params JSON files, paired with clouds by name")
    p.add_argument("--footprints", nargs="+", help="reference footprints (truth JSON or x y text)")
    p.add_argument("--format", choices=["xyz-ascii", "ply-ascii"])
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="fit, reconstruct and score a batch of clouds")
    p.add_argument("inputs", nargs="+", help="cloud files, globs or directories")
    p.add_argument("--footprints", help="directory of reference footprints named after the clouds")
    p.add_argument("--dem", help="ESRI ASCII elevation grid")
    p.add_argument("--wall-height", type=float)
    p.add_argument("--format", choices=["xyz-ascii", "ply-ascii"])
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_pipeline)

    for action in sub.choices.values():
        _global_flags(action, suppress=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "synth":
        given = [n for n in ("l", "w", "h", "rho") if getattr(args, n) is not None]
        if args.random and given:
            parser.error(f"--random cannot be combined with --{given[0]}")
        if not args.random and len(set(given) & {"l", "w", "h"}) < 3:
            parser.error("synth needs --l, --w and --h, or --random")
        if not args.random and args.kind == "hip" and args.rho is None:
            parser.error("a hip roof needs --rho")
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except RoofPrimError as exc:
        print(f"roofprim: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"roofprim: internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
