"""Repeated noisy re-fits of random buildings: accuracy and spread of the estimates."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import primitives as prims
from .._io import write_text
from ..errors import RoofPrimError
from ..geometry import Polygon2D
from ..optimizer import OptimizerConfig, fit
from ..pointcloud import to_local
from ..reconstruct import footprint_xy
from .metrics import eval_iou, eval_psd, world_footprint
from .synth import NoiseModel, add_noise, sample_surface

log = logging.getLogger(__name__)

KINDS = (prims.PrimitiveKind.PYRAMID, prims.PrimitiveKind.GABLE, prims.PrimitiveKind.HIP)
# "cloud" derives the footprint from the sampled points as in real use;
# "exact" hands the optimizer the true rectangle, isolating the fit itself.
BOUNDARIES = ("cloud", "exact")
SUMMARY_COLUMNS = ("kind", "n_buildings", "dim_rmse_m", "dim_rmse_pct", "dim_std_m",
                   "trans_rmse_m", "trans_std_m", "n_failed")


@dataclass(frozen=True)
class BuildingRanges:
    """Uniform ranges for random true buildings (metres, radians)."""

    l: tuple = (6.0, 16.0)
    w: tuple = (5.0, 12.0)
    h: tuple = (1.5, 5.0)
    rho: tuple = (0.2, 0.8)
    tz: tuple = (2.0, 6.0)
    kappa: tuple = (-math.pi / 2, math.pi / 2)


@dataclass(frozen=True)
class StabilityConfig:
    buildings_per_kind: int = 20
    trials_per_building: int = 30
    density: float = 4.72
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    kinds: tuple = KINDS
    ranges: BuildingRanges = field(default_factory=BuildingRanges)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    alpha_radius: Optional[float] = None
    boundary: str = "cloud"

    def __post_init__(self):
        from ..errors import InvalidParameterError

        if self.boundary not in BOUNDARIES:
            raise InvalidParameterError("boundary", f"expected one of {', '.join(BOUNDARIES)}")
        if self.buildings_per_kind < 1 or self.trials_per_building < 1:
            raise InvalidParameterError("buildings/trials", "counts must be positive")
        if not self.density > 0:
            raise InvalidParameterError("density", "must be positive")
        object.__setattr__(self, "kinds", tuple(prims.PrimitiveKind(k) for k in self.kinds))


@dataclass
class TrialReport:
    kind: str
    building: int
    trial: int
    true_params: dict
    estimated_params: Optional[dict]
    dimension_errors: Optional[dict]
    translation_error: Optional[tuple]
    psd_mean: float = math.nan
    psd_std: float = math.nan
    iou: float = math.nan
    converged: bool = False
    monotone: bool = True
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error) or not self.converged


def _kind_index(kind) -> int:
    return list(prims.REGISTRY).index(prims.PrimitiveKind(kind))


def trial_rng(seed: int, kind, building: int, trial: int) -> np.random.Generator:
    """Independent stream per (seed, kind, building, trial); trial -1 draws the building."""
    key = (_kind_index(kind), building, trial + 1)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def random_primitive(kind, rng: np.random.Generator, ranges: BuildingRanges = BuildingRanges()) -> prims.RoofPrimitive:
    kind = prims.PrimitiveKind(kind)
    l = rng.uniform(*ranges.l)
    w = rng.uniform(ranges.w[0], min(ranges.w[1], l))
    h = rng.uniform(*ranges.h)
    rho = rng.uniform(*ranges.rho) if kind == prims.PrimitiveKind.HIP else None
    kappa = rng.uniform(*ranges.kappa)
    tz = rng.uniform(*ranges.tz)
    return prims.RoofPrimitive(kind, prims.ShapeParams(l, w, h, rho), prims.Pose(kappa, (0.0, 0.0, tz))).canonical()


def shape_dict(prim: prims.RoofPrimitive) -> dict:
    out = {n: getattr(prim.shape, n) for n in prims.definition(prim.kind).shape_names}
    out["kappa"] = prim.pose.kappa
    world = prim.t_global.as_array() + np.asarray(prim.pose.t)
    out.update(tx=float(world[0]), ty=float(world[1]), tz=float(world[2]))
    return out


def dimension_terms(prim: prims.RoofPrimitive) -> dict:
    """Shape parameters in metres; rho enters as the ridge length rho * l."""
    s = prim.shape
    out = {"l": s.l, "w": s.w, "h": s.h}
    if s.rho is not None:
        out["rho_l"] = s.rho * s.l
    return out


def run_trial(config: StabilityConfig, kind, building: int, trial: int,
              truth: Optional[prims.RoofPrimitive] = None) -> TrialReport:
    if truth is None:
        truth = random_primitive(kind, trial_rng(config.seed, kind, building, -1), config.ranges)
    rng = trial_rng(config.seed, kind, building, trial)
    cloud = sample_surface(truth, config.density, rng)
    if config.noise.rmse > 0:
        cloud = add_noise(cloud, config.noise, rng)
    report = TrialReport(str(kind), building, trial, shape_dict(truth), None, None, None)
    try:
        if config.boundary == "exact":
            local, tg = to_local(cloud)
            ring = footprint_xy(truth) - tg.as_array()[:2]
            result = fit(local, kind, config.optimizer, boundary=Polygon2D(ring), t_global=tg)
        else:
            result = fit(cloud, kind, config.optimizer, alpha_radius=config.alpha_radius)
    except RoofPrimError as exc:
        report.error = f"{type(exc).__name__}: {exc}"
        return report
    est = result.primitive
    true_dims, est_dims = dimension_terms(truth), dimension_terms(est)
    report.estimated_params = shape_dict(est)
    report.dimension_errors = {k: est_dims[k] - true_dims[k] for k in true_dims}
    d = (est.t_global.as_array() + np.asarray(est.pose.t))[:2] - np.asarray(truth.pose.t[:2])
    report.translation_error = (float(d[0]), float(d[1]))
    report.psd_mean, report.psd_std = eval_psd(cloud, est)
    report.iou = eval_iou(est, world_footprint(truth))
    report.converged = result.converged
    f = [v for _, v in result.history]
    report.monotone = all(b <= a for a, b in zip(f, f[1:]))
    return report


def _building_task(args):
    config, kind, building = args
    truth = random_primitive(kind, trial_rng(config.seed, kind, building, -1), config.ranges)
    return [run_trial(config, kind, building, t, truth) for t in range(config.trials_per_building)]


def run_trials(config: StabilityConfig, jobs: int = 1) -> list:
    """All trial reports, ordered by kind, building and trial whatever ``jobs`` is."""
    tasks = [(config, kind, b) for kind in config.kinds for b in range(config.buildings_per_kind)]
    if jobs <= 1:
        batches = [_building_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_building_task, tasks))
    return [r for batch in batches for r in batch]


@dataclass
class SummaryRow:
    kind: str
    n_buildings: int
    dim_rmse_m: float
    dim_rmse_pct: float
    dim_std_m: float
    trans_rmse_m: float
    trans_std_m: float
    n_failed: int
    param_rmse_m: dict = field(default_factory=dict)
    param_rmse_pct: dict = field(default_factory=dict)


def _rms(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean(v ** 2))) if v.size else math.nan


def _std(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.std()) if v.size else math.nan


def summarize(reports, label: str, n_buildings: int) -> SummaryRow:
    """Pooled RMSE/STD of signed errors.

    Dimension errors pool every shape term in metres (l, w, h and rho*l for
    hips); percentages are relative to each term's true value. Translation
    pools the x and y errors of the planar position.
    """
    dims, rel, trans = [], [], []
    per, per_rel = {}, {}
    failed = 0
    for r in reports:
        if r.failed:
            failed += 1
        if r.dimension_errors is None:
            continue
        truth = {"l": r.true_params["l"], "w": r.true_params["w"], "h": r.true_params["h"]}
        if "rho" in r.true_params:
            truth["rho_l"] = r.true_params["rho"] * r.true_params["l"]
        for k, e in r.dimension_errors.items():
            dims.append(e)
            per.setdefault(k, []).append(e)
            if truth[k] > 0:
                rel.append(e / truth[k])
                per_rel.setdefault(k, []).append(e / truth[k])
        trans.extend(r.translation_error)
    return SummaryRow(
        label, n_buildings, _rms(dims), 100.0 * _rms(rel), _std(dims), _rms(trans), _std(trans), failed,
        {k: _rms(v) for k, v in per.items()}, {k: 100.0 * _rms(per_rel.get(k, [])) for k in per},
    )


def run_stability(config: StabilityConfig = StabilityConfig(), jobs: int = 1):
    """Returns ``(rows, reports)``: one summary row per kind plus an overall row."""
    reports = run_trials(config, jobs)
    rows = []
    for kind in config.kinds:
        subset = [r for r in reports if r.kind == kind.value]
        rows.append(summarize(subset, kind.value, config.buildings_per_kind))
    rows.append(summarize(reports, "overall", config.buildings_per_kind * len(config.kinds)))
    failed = sum(r.failed for r in reports)
    if failed:
        log.warning("%d of %d trials did not converge or failed", failed, len(reports))
    return rows, reports


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def summary_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(getattr(row, c)) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def parameter_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("kind", "parameter", "rmse_m", "rmse_pct"))
    for row in rows:
        for k in row.param_rmse_m:
            writer.writerow([row.kind, k, _fmt(row.param_rmse_m[k]), _fmt(row.param_rmse_pct[k])])
    return buf.getvalue()


def trials_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    terms = ("l", "w", "h", "rho_l")
    writer.writerow(("kind", "building", "trial", "converged", "monotone")
                    + tuple(f"err_{t}" for t in terms) + ("err_tx", "err_ty", "psd_mean", "psd_std", "iou", "error"))
    for r in reports:
        errs = r.dimension_errors or {}
        trans = r.translation_error or (math.nan, math.nan)
        writer.writerow([r.kind, r.building, r.trial, int(r.converged), int(r.monotone)]
                        + [_fmt(float(errs.get(t, math.nan))) for t in terms]
                        + [_fmt(trans[0]), _fmt(trans[1]), _fmt(r.psd_mean), _fmt(r.psd_std), _fmt(r.iou), r.error])
    return buf.getvalue()


def format_table(rows) -> str:
    head = f"{'kind':<8} {'bldgs':>5} {'dim RMSE m':>10} {'dim RMSE %':>10} {'dim STD m':>9} " \
           f"{'trans RMSE m':>12} {'trans STD m':>11} {'failed':>6}"
    lines = ["dimension errors pool l, w, h and rho*l (metres); translation pools planar x and y", head]
    for r in rows:
        lines.append(f"{r.kind:<8} {r.n_buildings:>5} {r.dim_rmse_m:>10.3f} {r.dim_rmse_pct:>10.2f} "
                     f"{r.dim_std_m:>9.3f} {r.trans_rmse_m:>12.3f} {r.trans_std_m:>11.3f} {r.n_failed:>6}")
    return "\n".join(lines)


def write_stability(rows, reports, out_dir) -> dict:
    from pathlib import Path

    out = Path(out_dir)
    paths = {
        "summary": out / "stability.csv",
        "parameters": out / "stability_parameters.csv",
        "trials": out / "stability_trials.csv",
    }
    write_text(paths["summary"], summary_csv(rows))
    write_text(paths["parameters"], parameter_csv(rows))
    write_text(paths["trials"], trials_csv(reports))
    return paths
