"""Road-system classification of detected points and State/Local count tables."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import fileio
from .aggregate import DetectionPoint, Source, point_feature
from .evaluate import SWEEP_FLOORS, fmt_floor
from .geo import RoadCenterline, RoadSystem, WorldPoint, distance_point_to_polyline
from .labels import TURNING_LABELS, LaneLabel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class InventoryRecord:
    point: DetectionPoint
    road_system: RoadSystem | None  # None = no centerline within the buffer

    @property
    def label(self) -> LaneLabel:
        return self.point.label

    @property
    def confidence(self) -> float:
        return self.point.confidence


def assign_road_system(p: DetectionPoint, lines: Sequence[RoadCenterline],
                       buffer_radius: float = 100.0) -> RoadSystem | None:
    """Road system of the nearest centerline; exact ties go to State."""
    best = None
    for ln in lines:
        d = distance_point_to_polyline(p.location, ln)
        if d > buffer_radius:
            continue
        key = (d, ln.road_system is not RoadSystem.STATE)
        if best is None or key < best[0]:
            best = (key, ln.road_system)
    if best is None:
        log.warning("no centerline within %.1f ft of %s point at (%.2f, %.2f); left unclassified",
                    buffer_radius, p.label.slug, p.location.x, p.location.y)
        return None
    return best[1]


def classify(points: Iterable[DetectionPoint], lines: Sequence[RoadCenterline],
             buffer_radius: float = 100.0) -> list[InventoryRecord]:
    return [InventoryRecord(p, assign_road_system(p, lines, buffer_radius)) for p in points]


@dataclass(frozen=True)
class CountRow:
    label: LaneLabel
    floor: float
    state: int
    local: int

    @property
    def total(self) -> int:
        return self.state + self.local


def count_table(records: Sequence[InventoryRecord], floors: Sequence[float] = SWEEP_FLOORS,
                labels: Sequence[LaneLabel] = TURNING_LABELS) -> list[CountRow]:
    """Cumulative State/Local counts of records with confidence >= each floor.

    Unclassified records are left out, so total is always state + local.
    """
    floors = sorted(floors, reverse=True)
    rows = []
    for lab in labels:
        recs = [r for r in records if r.label == lab and r.road_system is not None]
        for f in floors:
            hits = [r for r in recs if r.confidence >= f]
            state = sum(r.road_system is RoadSystem.STATE for r in hits)
            rows.append(CountRow(lab, f, state, len(hits) - state))
    return rows


COUNT_HEADER = ("class", "Confidence", "State", "Local", "Total")


def count_table_csv(rows: Sequence[CountRow]) -> str:
    return fileio.csv_text(COUNT_HEADER, [(r.label.slug, fmt_floor(r.floor), r.state, r.local, r.total) for r in rows])


# -- attribute files ---------------------------------------------------------

RECORD_HEADER = ("label", "confidence", "road_system", "x", "y", "tile_id")


def record_row(r: InventoryRecord) -> tuple:
    p = r.point
    return (p.label.slug, repr(p.confidence), r.road_system.value if r.road_system else "",
            repr(p.location.x), repr(p.location.y), p.source.tile_id)


def write_records(path: Path, records: Sequence[InventoryRecord]) -> None:
    fileio.write_csv(path, RECORD_HEADER, (record_row(r) for r in records))


def read_records(path: Path) -> list[InventoryRecord]:
    """Inventory attribute CSV; only label, confidence and road_system are required."""
    out = []
    for row in fileio.read_csv(path):
        rs = row.get("road_system") or ""
        p = DetectionPoint(LaneLabel.parse(row["label"]),
                           WorldPoint(float(row.get("x") or 0.0), float(row.get("y") or 0.0)),
                           float(row["confidence"]), Source(row.get("tile_id") or "", 0, 0))
        out.append(InventoryRecord(p, RoadSystem.parse(rs) if rs else None))
    return out


def record_feature(r: InventoryRecord) -> dict:
    return point_feature(r.point, road_system=r.road_system.value if r.road_system else None)
