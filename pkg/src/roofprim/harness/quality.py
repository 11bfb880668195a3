"""Batch reconstruction quality: distance of points to the fitted roofs and footprint IoU."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import primitives as prims
from .._io import write_text
from ..errors import RoofPrimError
from ..geometry import Polygon2D
from ..optimizer import OptimizerConfig, classify, fit
from ..optimizer.config import CostBreakdown
from ..pointcloud import PointCloud
from ..reconstruct import DEFAULT_WALL_HEIGHT, DEM, assemble, eave_z, footprint_xy, ground_elevation, terrain_curve
from .metrics import eval_iou, eval_psd

log = logging.getLogger(__name__)

PSD_BINS = (0.0, 0.5, 0.02)
IOU_BINS = (0.0, 1.0, 0.02)
COLUMNS = ("scope", "id", "kind", "n_buildings", "n_points", "psd_mean_m", "psd_std_m", "iou",
           "converged", "error")


@dataclass(frozen=True)
class BuildingInput:
    """One building to score. ``fitted`` skips fitting; ``kind`` forces a roof type."""

    id: str
    cloud: PointCloud
    footprint: Optional[Polygon2D] = None
    kind: Optional[str] = None
    fitted: Optional[prims.RoofPrimitive] = None


@dataclass(frozen=True)
class QualityConfig:
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    alpha_radius: Optional[float] = None
    wall_height: float = DEFAULT_WALL_HEIGHT
    dem: Optional[DEM] = None
    srs_name: str = ""


@dataclass
class BuildingResult:
    id: str
    n_points: int
    kind: str = ""
    psd_mean: float = math.nan
    psd_std: float = math.nan
    iou: float = math.nan
    converged: Optional[bool] = None
    cost: Optional[CostBreakdown] = None
    primitive: Optional[prims.RoofPrimitive] = None
    model: object = None
    error: str = ""


@dataclass
class AggregateRow:
    scope: str
    kind: str
    n_buildings: int
    n_points: int
    psd_mean: float
    psd_std: float
    iou: float
    n_failed: int


def process_building(item: BuildingInput, config: QualityConfig = QualityConfig()) -> BuildingResult:
    """Fit (unless already fitted), assemble and score one building; errors are recorded, not raised."""
    res = BuildingResult(item.id, len(item.cloud))
    try:
        prim = item.fitted
        if prim is None:
            if item.kind is not None:
                fitted = fit(item.cloud, item.kind, config.optimizer, alpha_radius=config.alpha_radius)
            else:
                kind, results = classify(item.cloud, config.optimizer, alpha_radius=config.alpha_radius)
                fitted = dict(results)[kind]
            prim, res.cost, res.converged = fitted.primitive, fitted.cost, fitted.converged
        res.primitive = prim
        res.kind = prim.kind.value
        res.psd_mean, res.psd_std = eval_psd(item.cloud, prim)
        if item.footprint is not None:
            res.iou = eval_iou(prim, item.footprint)
        corners = footprint_xy(prim)
        base = ground_elevation(config.dem, corners, eave_z(prim) - config.wall_height)
        tic = terrain_curve(config.dem, corners) if config.dem is not None else None
        res.model = assemble(prim, base, srs_name=config.srs_name, building_id=item.id, terrain_curve=tic)
    except RoofPrimError as exc:
        res.error = f"{type(exc).__name__}: {exc}"
        log.warning("building %s failed: %s", item.id, exc)
    return res


def _task(args):
    return process_building(*args)


def aggregate(results, scope: str, kind: str) -> AggregateRow:
    """Point-weighted pooling: the mean PSD equals the PSD mean over all pooled points."""
    ok = [r for r in results if not r.error]
    n = np.array([r.n_points for r in ok], dtype=float)
    total = int(n.sum())
    if total:
        mean = np.array([r.psd_mean for r in ok])
        std = np.array([r.psd_std for r in ok])
        psd_mean = float((n * mean).sum() / total)
        second = float((n * (std ** 2 + mean ** 2)).sum() / total)
        psd_std = math.sqrt(max(second - psd_mean ** 2, 0.0))
    else:
        psd_mean = psd_std = math.nan
    ious = [r.iou for r in ok if not math.isnan(r.iou)]
    iou = float(np.mean(ious)) if ious else math.nan
    return AggregateRow(scope, kind, len(results), total, psd_mean, psd_std, iou, len(results) - len(ok))


@dataclass
class QualityReport:
    buildings: list
    aggregates: list


def run_quality(items, config: QualityConfig = QualityConfig(), jobs: int = 1) -> QualityReport:
    items = sorted(items, key=lambda it: it.id)
    if jobs <= 1:
        results = [process_building(it, config) for it in items]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, [(it, config) for it in items]))
    kinds = sorted({r.kind for r in results if r.kind})
    rows = [aggregate([r for r in results if r.kind == k], "kind", k) for k in kinds]
    rows.append(aggregate(results, "overall", ""))
    return QualityReport(results, rows)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def report_csv(report: QualityReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in report.buildings:
        w.writerow(["building", r.id, r.kind, 1, r.n_points, _fmt(r.psd_mean), _fmt(r.psd_std), _fmt(r.iou),
                    _fmt(r.converged), r.error])
    for a in report.aggregates:
        w.writerow([a.scope, "", a.kind, a.n_buildings, a.n_points, _fmt(a.psd_mean), _fmt(a.psd_std),
                    _fmt(a.iou), "", f"{a.n_failed} failed" if a.n_failed else ""])
    return buf.getvalue()


def bin_edges(spec) -> np.ndarray:
    lo, hi, width = spec
    n = int(round((hi - lo) / width))
    return lo + width * np.arange(n + 1)


def histogram(values, spec) -> tuple[np.ndarray, np.ndarray]:
    """Counts on fixed bins; values past either end land in the outer bins."""
    edges = bin_edges(spec)
    v = np.asarray([x for x in values if not math.isnan(x)], dtype=float)
    idx = np.floor((v - spec[0]) / spec[2] + 1e-9).astype(int)
    idx = np.clip(idx, 0, len(edges) - 2)
    return edges, np.bincount(idx, minlength=len(edges) - 1)


def histogram_csv(edges, counts) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("bin_low", "bin_high", "count"))
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        w.writerow([f"{lo:.2f}", f"{hi:.2f}", int(c)])
    return buf.getvalue()


def write_quality(report: QualityReport, out_dir, plots: bool = True) -> dict:
    out = Path(out_dir)
    paths = {"report": out / "quality.csv"}
    write_text(paths["report"], report_csv(report))
    ok = [r for r in report.buildings if not r.error]
    for name, spec, values, label in (
        ("psd", PSD_BINS, [r.psd_mean for r in ok], "mean point-to-surface distance (m)"),
        ("iou", IOU_BINS, [r.iou for r in ok], "footprint IoU"),
    ):
        edges, counts = histogram(values, spec)
        paths[f"{name}_histogram"] = out / f"{name}_histogram.csv"
        write_text(paths[f"{name}_histogram"], histogram_csv(edges, counts))
        if plots:
            from .plots import histogram_png

            paths[f"{name}_plot"] = out / f"{name}_histogram.png"
            histogram_png(edges, counts, label, paths[f"{name}_plot"])
    return paths
