"""Staged driver: mask -> chips -> detect -> dedup -> points -> report (-> eval).

Every stage reads its inputs from, and writes its outputs to, the output
directory, so any stage can be re-run on its own.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, TypeVar

from . import aggregate, evaluate, fileio, inventory
from .aggregate import WorldDetection
from .chipper import ChipPlan, extract_chip, plan_chips
from .config import PipelineConfig
from .detector import ReferenceDetector, default_templates, detect_chip, load_templates
from .geo import InputError
from .labels import TURNING_LABELS, LaneLabel, Schema, project
from .preprocess import MANIFEST_HEADER, load_masked, mask_tile, scan_tiles, select_tiles, write_masked

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

MASKED_MANIFEST = "masked_manifest.csv"
CHIPS_MANIFEST = "chips_manifest.csv"
RAW_DETECTIONS = "detections_raw"
DETECTIONS = "detections"
POINTS = "points"
INVENTORY = "inventory"
COUNT_TABLE = "count_table.csv"
METRICS = "metrics.csv"
CIRCUS = "circus.csv"
RUN_MANIFEST = "run_manifest.json"

CHIP_HEADER = ("tile_id", "window_col", "window_row", "chip_size", "stride", "pad", "path")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """Order-preserving map; results come back in input order regardless of completion."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _out(cfg: PipelineConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _require(cfg: PipelineConfig, name: str) -> str:
    value = getattr(cfg, name)
    if not value:
        raise InputError(f"--{name} is required for this stage")
    return value


def _read_manifest(path: Path) -> list[dict]:
    if not path.exists():
        raise InputError(f"{path.name} not found; run the previous stage first")
    return fileio.read_csv(path)


# -- stages ------------------------------------------------------------------

def stage_mask(cfg: PipelineConfig) -> list[dict]:
    out = _out(cfg)
    lines = fileio.read_centerlines(Path(_require(cfg, "centerlines")))
    sources = {s.tile_id: s for s in scan_tiles(Path(_require(cfg, "tiles")))}
    picked = select_tiles({k: s.footprint for k, s in sources.items()}, lines, cfg.buffer_radius)
    log.info("mask: %d of %d tiles near a centerline", len(picked), len(sources))

    def work(tile_id):
        masked = mask_tile(sources[tile_id].load(), lines, cfg.buffer_radius)
        if masked.retained_pixel_count == 0:
            return None
        path = write_masked(out / "masked", masked)
        return {"tile_id": tile_id, "path": str(path.relative_to(out)), "width": masked.width,
                "height": masked.height, "retained_pixel_count": masked.retained_pixel_count}

    rows = [r for r in parallel_map(work, picked, cfg.threads) if r is not None]
    fileio.write_csv(out / MASKED_MANIFEST, MANIFEST_HEADER, ([r[k] for k in MANIFEST_HEADER] for r in rows))
    return rows


def stage_chips(cfg: PipelineConfig) -> list[ChipPlan]:
    out = _out(cfg)
    plans = []
    tiles = _read_manifest(out / MASKED_MANIFEST)
    for row in tiles:
        plans.extend(plan_chips(int(row["width"]), int(row["height"]), cfg.chip_size, cfg.stride, cfg.pad,
                                tile_id=row["tile_id"]))
    paths = [""] * len(plans)
    if cfg.dump_chips:
        (out / "chips").mkdir(exist_ok=True)
        by_tile = {r["tile_id"]: out / r["path"] for r in tiles}
        cache = {}
        for i, p in enumerate(plans):
            if p.tile_id not in cache:
                cache.clear()
                cache[p.tile_id] = load_masked(by_tile[p.tile_id])
            rel = Path("chips") / f"{p.name}.png"
            fileio.write_rgb(out / rel, extract_chip(cache[p.tile_id], p).pixels)
            paths[i] = str(rel)
    fileio.write_csv(out / CHIPS_MANIFEST, CHIP_HEADER,
                     ((p.tile_id, p.window_col, p.window_row, p.chip_size, p.stride, p.pad, path)
                      for p, path in zip(plans, paths)))
    log.info("chips: %d windows over %d tiles", len(plans), len(tiles))
    return plans


def build_detector(cfg: PipelineConfig) -> ReferenceDetector:
    schema = Schema.parse(cfg.schema)
    if cfg.templates:
        templates = load_templates(Path(cfg.templates))
    else:
        templates = default_templates([lab for lab in TURNING_LABELS if lab in schema.labels], cfg.template_size)
    return ReferenceDetector(templates, cfg.score_floor)


def stage_detect(cfg: PipelineConfig, detector=None) -> list[WorldDetection]:
    out = _out(cfg)
    detector = detector or build_detector(cfg)
    schema = Schema.parse(cfg.schema)
    tiles = {r["tile_id"]: out / r["path"] for r in _read_manifest(out / MASKED_MANIFEST)}
    plans: dict[str, list[ChipPlan]] = {}
    for row in _read_manifest(out / CHIPS_MANIFEST):
        p = ChipPlan(row["tile_id"], int(row["window_row"]), int(row["window_col"]),
                     int(row["chip_size"]), int(row["stride"]), int(row["pad"]))
        plans.setdefault(p.tile_id, []).append(p)

    def work(tile_id):
        tile = load_masked(tiles[tile_id])
        found = []
        for plan in plans[tile_id]:
            for d in detect_chip(extract_chip(tile, plan), detector):
                if d.confidence < cfg.confidence_floor:
                    continue
                w = aggregate.georeference(d, plan, tile.transform)
                label = project(w.label, schema)
                if label != w.label:
                    w = WorldDetection(label, w.bbox, w.confidence, w.source)
                found.append(w)
        return found

    dets = [d for chunk in parallel_map(work, sorted(plans), cfg.threads) for d in chunk]
    _write_detections(out, RAW_DETECTIONS, dets)
    log.info("detect: %d raw detections", len(dets))
    return dets


def _write_detections(out: Path, stem: str, dets: Sequence[WorldDetection]) -> None:
    fileio.dump_geojson(out / f"{stem}.geojson", [aggregate.detection_feature(d) for d in dets])
    fileio.write_csv(out / f"{stem}.csv", aggregate.DETECTION_HEADER, (aggregate.detection_row(d) for d in dets))


def _load_detections(out: Path, stem: str) -> list[WorldDetection]:
    path = out / f"{stem}.geojson"
    if not path.exists():
        raise InputError(f"{path.name} not found; run the previous stage first")
    return aggregate.detections_from_features(fileio.load_features(path))


def stage_dedup(cfg: PipelineConfig) -> list[WorldDetection]:
    out = _out(cfg)
    raw = _load_detections(out, RAW_DETECTIONS)
    kept = aggregate.dedup(raw, cfg.overlap_floor, cfg.overlap_method)
    _write_detections(out, DETECTIONS, kept)
    log.info("dedup: kept %d of %d", len(kept), len(raw))
    return kept


def stage_points(cfg: PipelineConfig) -> list[aggregate.DetectionPoint]:
    out = _out(cfg)
    pts = aggregate.to_points(_load_detections(out, DETECTIONS))
    fileio.dump_geojson(out / f"{POINTS}.geojson", [aggregate.point_feature(p) for p in pts])
    fileio.write_csv(out / f"{POINTS}.csv", aggregate.POINT_HEADER, (aggregate.point_row(p) for p in pts))
    return pts


def stage_report(cfg: PipelineConfig) -> tuple[list[inventory.InventoryRecord], list[inventory.CountRow]]:
    out = _out(cfg)
    path = out / f"{POINTS}.geojson"
    if not path.exists():
        raise InputError(f"{path.name} not found; run the points stage first")
    pts = aggregate.points_from_features(fileio.load_features(path))
    lines = fileio.read_centerlines(Path(_require(cfg, "centerlines")))
    records = inventory.classify(pts, lines, cfg.buffer_radius)
    fileio.dump_geojson(out / f"{INVENTORY}.geojson", [inventory.record_feature(r) for r in records])
    inventory.write_records(out / f"{INVENTORY}.csv", records)
    rows = inventory.count_table(records, cfg.sweep_floors)
    (out / COUNT_TABLE).write_text(inventory.count_table_csv(rows))
    return records, rows


def stage_eval(cfg: PipelineConfig) -> dict[LaneLabel, list[evaluate.MetricsRow]]:
    out = _out(cfg)
    schema = Schema.parse(cfg.schema)
    gt = evaluate.parse_ground_truth(fileio.load_features(Path(_require(cfg, "gt"))))
    gt = [g for g in gt if g.label in schema.labels]
    dets = _load_detections(out, DETECTIONS)
    rows = {lab: evaluate.sweep(gt, dets, lab, cfg.sweep_floors) for lab in TURNING_LABELS}
    (out / METRICS).write_text(evaluate.metrics_table_csv(rows))
    (out / CIRCUS).write_text(evaluate.emit_circus_csv({cfg.model_name: rows}))
    return rows


# -- full run ----------------------------------------------------------------

@dataclass
class Artifacts:
    out: Path
    masked: list[dict] = field(default_factory=list)
    plans: list[ChipPlan] = field(default_factory=list)
    raw_detections: list[WorldDetection] = field(default_factory=list)
    detections: list[WorldDetection] = field(default_factory=list)
    points: list[aggregate.DetectionPoint] = field(default_factory=list)
    inventory: list[inventory.InventoryRecord] = field(default_factory=list)
    counts: list[inventory.CountRow] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)


def run_stage(name: str, fn: Callable, *args):
    """Run one stage, tagging any failure with the stage name."""
    try:
        return fn(*args)
    except InputError as exc:
        raise InputError(f"[{name}] {exc}") from exc
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with stage context
        raise StageError(name, f"{type(exc).__name__}: {exc}") from exc


def run_pipeline(cfg: PipelineConfig, detector=None) -> Artifacts:
    out = _out(cfg)
    art = Artifacts(out)
    art.masked = run_stage("mask", stage_mask, cfg)
    art.plans = run_stage("chips", stage_chips, cfg)
    art.raw_detections = run_stage("detect", stage_detect, cfg, detector)
    art.detections = run_stage("dedup", stage_dedup, cfg)
    art.points = run_stage("points", stage_points, cfg)
    art.inventory, art.counts = run_stage("report", stage_report, cfg)
    if cfg.gt:
        art.metrics = run_stage("eval", stage_eval, cfg)
    summary = {
        "config": json.loads(cfg.to_json()),
        "tiles": len(art.masked),
        "chips": len(art.plans),
        "raw_detections": len(art.raw_detections),
        "detections": len(art.detections),
        "points": len(art.points),
        "unclassified": sum(r.road_system is None for r in art.inventory),
    }
    (out / RUN_MANIFEST).write_text(json.dumps(summary, indent=2) + "\n")
    return art
