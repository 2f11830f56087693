"""Georeference chip detections, suppress duplicates, and reduce boxes to points."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .chipper import ChipPlan
from .detector import CONFIDENCE_FLOOR, ChipDetection
from .geo import (GeoTransform, InputError, WorldBox, WorldPoint, overlap_ratio,
                  pixel_to_world)
from .labels import LaneLabel

OVERLAP_FLOOR = 0.10


@dataclass(frozen=True)
class Source:
    tile_id: str
    window_col: int
    window_row: int


@dataclass(frozen=True)
class WorldDetection:
    label: LaneLabel
    bbox: WorldBox
    confidence: float
    source: Source

    def __post_init__(self):
        if not self.bbox.area > 0:
            raise InputError(f"detection box has no area: {self.bbox}")
        if not CONFIDENCE_FLOOR <= self.confidence <= 1:
            raise InputError(f"confidence {self.confidence} outside [{CONFIDENCE_FLOOR}, 1]")

    def sort_key(self):
        """Total order: confidence descending, then label id, box, source."""
        return (-self.confidence, int(self.label), self.bbox.as_tuple(),
                (self.source.tile_id, self.source.window_col, self.source.window_row))


@dataclass(frozen=True)
class DetectionPoint:
    label: LaneLabel
    location: WorldPoint
    confidence: float
    source: Source


def georeference(d: ChipDetection, plan: ChipPlan, t: GeoTransform) -> WorldDetection:
    x1, y1, x2, y2 = d.bbox
    size = plan.chip_size
    if not (0 <= x1 < x2 <= size and 0 <= y1 < y2 <= size):
        raise InputError(f"bbox {d.bbox} is outside the {size}px window")
    a = pixel_to_world(plan.window_col + x1, plan.window_row + y1, t)
    b = pixel_to_world(plan.window_col + x2, plan.window_row + y2, t)
    return WorldDetection(d.label, WorldBox.from_corners(a.x, a.y, b.x, b.y), d.confidence,
                          Source(plan.tile_id, plan.window_col, plan.window_row))


def dedup(ds: Iterable[WorldDetection], overlap_floor: float = OVERLAP_FLOOR,
          method: str = "iou") -> list[WorldDetection]:
    """Class-aware greedy non-maximum suppression.

    A detection survives unless it overlaps an already kept detection of the
    same class by more than ``overlap_floor``. Output is in acceptance order.
    """
    if not 0 < overlap_floor <= 1:
        raise InputError(f"overlap_floor must be in (0, 1], got {overlap_floor}")
    kept: dict[LaneLabel, list[WorldDetection]] = {}
    out = []
    for d in sorted(ds, key=WorldDetection.sort_key):
        same = kept.setdefault(d.label, [])
        if all(overlap_ratio(d.bbox, k.bbox, method) <= overlap_floor for k in same):
            same.append(d)
            out.append(d)
    return out


def to_points(ds: Sequence[WorldDetection]) -> list[DetectionPoint]:
    return [DetectionPoint(d.label, d.bbox.center, d.confidence, d.source) for d in ds]


# -- serialization -----------------------------------------------------------

DETECTION_HEADER = ("label", "confidence", "min_x", "min_y", "max_x", "max_y",
                    "tile_id", "window_col", "window_row")
POINT_HEADER = ("label", "confidence", "x", "y", "tile_id", "window_col", "window_row")


def detection_feature(d: WorldDetection) -> dict:
    b = d.bbox
    ring = [[b.min_x, b.min_y], [b.max_x, b.min_y], [b.max_x, b.max_y], [b.min_x, b.max_y], [b.min_x, b.min_y]]
    return {
        "type": "Feature",
        "properties": {"label": d.label.slug, "confidence": d.confidence, "tile_id": d.source.tile_id,
                       "window_col": d.source.window_col, "window_row": d.source.window_row},
        "geometry": {"type": "Polygon", "coordinates": [ring]},
    }


def point_feature(p: DetectionPoint, **extra) -> dict:
    props = {"label": p.label.slug, "confidence": p.confidence, "tile_id": p.source.tile_id,
             "window_col": p.source.window_col, "window_row": p.source.window_row}
    props.update(extra)
    return {"type": "Feature", "properties": props,
            "geometry": {"type": "Point", "coordinates": [p.location.x, p.location.y]}}


def detection_row(d: WorldDetection) -> tuple:
    return (d.label.slug, repr(d.confidence), *(repr(v) for v in d.bbox.as_tuple()),
            d.source.tile_id, d.source.window_col, d.source.window_row)


def point_row(p: DetectionPoint) -> tuple:
    return (p.label.slug, repr(p.confidence), repr(p.location.x), repr(p.location.y),
            p.source.tile_id, p.source.window_col, p.source.window_row)


def _source(props: dict) -> Source:
    return Source(str(props.get("tile_id", "")), int(props.get("window_col", 0)), int(props.get("window_row", 0)))


def detections_from_features(features: Iterable[dict]) -> list[WorldDetection]:
    out = []
    for f in features:
        props = f.get("properties") or {}
        ring = (f.get("geometry") or {}).get("coordinates", [[]])[0]
        if not ring:
            raise InputError("detection feature without polygon coordinates")
        xs = [c[0] for c in ring]
        ys = [c[1] for c in ring]
        out.append(WorldDetection(LaneLabel.parse(props["label"]), WorldBox(min(xs), min(ys), max(xs), max(ys)),
                                  float(props["confidence"]), _source(props)))
    return out


def points_from_features(features: Iterable[dict]) -> list[DetectionPoint]:
    out = []
    for f in features:
        props = f.get("properties") or {}
        x, y = (f.get("geometry") or {})["coordinates"][:2]
        out.append(DetectionPoint(LaneLabel.parse(props["label"]), WorldPoint(float(x), float(y)),
                                  float(props["confidence"]), _source(props)))
    return out
