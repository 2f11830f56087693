"""Ground-truth matching and completeness / correctness / quality / F1 metrics."""
from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import fileio
from .aggregate import DetectionPoint, WorldDetection
from .geo import InputError, WorldPoint
from .labels import LaneLabel

SWEEP_FLOORS = (0.75, 0.50, 0.25, 0.10, 0.05)
NA = "N/A"


@dataclass(frozen=True)
class GroundTruthPoint:
    location: WorldPoint
    label: LaneLabel

    def __post_init__(self):
        if self.label is LaneLabel.NONE:
            raise InputError("ground-truth points must carry a positive class")


@dataclass(frozen=True)
class MatchCounts:
    gt_total: int
    model_total: int
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.gt_total, self.model_total, self.tp, self.fp, self.fn) < 0:
            raise ValueError(f"negative count in {self}")
        if self.tp + self.fp != self.model_total or self.tp + self.fn != self.gt_total:
            raise ValueError(f"inconsistent counts {self}")


@dataclass(frozen=True)
class MetricsRow:
    confidence_floor: float
    counts: MatchCounts
    completeness: float | None
    correctness: float | None
    quality: float | None
    f1: float | None


def match_class(gt: Sequence[GroundTruthPoint], ds: Sequence[WorldDetection], cls: LaneLabel,
                conf_floor: float) -> MatchCounts:
    """One-to-one greedy matching of detections to ground-truth points of one class.

    Detections are visited from most to least confident; each claims the
    unclaimed point inside its box nearest the box center (lowest index on
    ties).
    """
    pts = [g.location for g in gt if g.label == cls]
    dets = sorted((d for d in ds if d.label == cls and d.confidence >= conf_floor), key=WorldDetection.sort_key)
    xy = np.array([(p.x, p.y) for p in pts], dtype=np.float64).reshape(-1, 2)
    free = np.ones(len(pts), dtype=bool)
    tp = 0
    for d in dets:
        b = d.bbox
        inside = free & (xy[:, 0] >= b.min_x) & (xy[:, 0] <= b.max_x) & (xy[:, 1] >= b.min_y) & (xy[:, 1] <= b.max_y)
        idx = np.flatnonzero(inside)
        if len(idx) == 0:
            continue
        c = b.center
        d2 = (xy[idx, 0] - c.x) ** 2 + (xy[idx, 1] - c.y) ** 2
        free[idx[np.argmin(d2)]] = False
        tp += 1
    return MatchCounts(gt_total=len(pts), model_total=len(dets), tp=tp, fp=len(dets) - tp, fn=len(pts) - tp)


def metrics(c: MatchCounts, confidence_floor: float = float("nan")) -> MetricsRow:
    gt, m = c.gt_total, c.model_total
    completeness = (gt - c.fn) / gt * 100 if gt else None
    correctness = (m - c.fp) / m * 100 if m else None
    quality = (gt - c.fn) / (gt + c.fp) * 100 if gt + c.fp else None
    f1 = None
    if completeness is not None and correctness is not None and completeness + correctness > 0:
        f1 = 2 * completeness * correctness / (completeness + correctness)
    return MetricsRow(confidence_floor, c, completeness, correctness, quality, f1)


def sweep(gt: Sequence[GroundTruthPoint], ds: Sequence[WorldDetection], cls: LaneLabel,
          floors: Sequence[float] = SWEEP_FLOORS) -> list[MetricsRow]:
    floors = list(floors)
    if floors != sorted(floors, reverse=True):
        raise InputError(f"sweep floors must be in descending order, got {floors}")
    return [metrics(match_class(gt, ds, cls, f), f) for f in floors]


# -- reporting ---------------------------------------------------------------

def fmt_pct(v: float | None) -> str:
    if v is None:
        return NA
    return str(Decimal(repr(v)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def fmt_floor(f: float) -> str:
    """Confidence floor as a whole percentage, e.g. 0.75 -> "75"."""
    return fmt_pct(f * 100).rstrip("0").rstrip(".")


TABLE_HEADER = ("class", "GT", "Confidence", "M", "TP", "FP", "FN",
                "Completeness", "Correctness", "Quality", "F1")
CIRCUS_HEADER = ("model", "class", "confidence_floor", "tp", "fp", "fn",
                 "completeness", "correctness", "quality", "f1")


def metrics_table_csv(rows: Mapping[LaneLabel, Sequence[MetricsRow]]) -> str:
    """Per-class sweep rows in the Confidence/M/TP/FP/FN/... layout."""
    out = []
    for label, metric_rows in rows.items():
        for r in metric_rows:
            c = r.counts
            out.append((LaneLabel.parse(label).slug, c.gt_total, fmt_floor(r.confidence_floor),
                        c.model_total, c.tp, c.fp, c.fn,
                        fmt_pct(r.completeness), fmt_pct(r.correctness), fmt_pct(r.quality), fmt_pct(r.f1)))
    return fileio.csv_text(TABLE_HEADER, out)


def emit_circus_csv(rows: Mapping[str, Mapping[LaneLabel, Sequence[MetricsRow]]]) -> str:
    """Long-format metric table keyed by model and class, one line per floor."""
    out = []
    for model, per_class in rows.items():
        for label, metric_rows in per_class.items():
            for r in metric_rows:
                c = r.counts
                out.append((model, LaneLabel.parse(label).slug, fmt_floor(r.confidence_floor), c.tp, c.fp, c.fn,
                            fmt_pct(r.completeness), fmt_pct(r.correctness), fmt_pct(r.quality), fmt_pct(r.f1)))
    return fileio.csv_text(CIRCUS_HEADER, out)


def parse_ground_truth(features: Iterable[dict]) -> list[GroundTruthPoint]:
    out = []
    for f in features:
        geom = f.get("geometry") or {}
        if geom.get("type") != "Point":
            raise InputError(f"ground truth must be Point features, got {geom.get('type')!r}")
        props = f.get("properties") or {}
        if "label" not in props:
            raise InputError("ground-truth feature lacks a label property")
        x, y = geom["coordinates"][:2]
        out.append(GroundTruthPoint(WorldPoint(float(x), float(y)), LaneLabel.parse(props["label"])))
    return out


# -- optional lane grouping --------------------------------------------------

@dataclass(frozen=True)
class LaneGroup:
    members: tuple[DetectionPoint, ...]

    @property
    def labels(self) -> frozenset[LaneLabel]:
        return frozenset(p.label for p in self.members)

    @property
    def consistent(self) -> bool:
        """False when features of one lane disagree; the whole lane is then a miss."""
        return len(self.labels) == 1


def group_lanes(points: Sequence[DetectionPoint], max_gap: float = 60.0) -> list[LaneGroup]:
    """Chain features into lanes: any two within ``max_gap`` feet share a lane.

    A proximity heuristic only; it does not check that chained features are
    collinear. Groups come out ordered by their first member's input index.
    """
    n = len(points)
    if n == 0:
        return []
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    tree = cKDTree(np.array([(p.location.x, p.location.y) for p in points]))
    for i, j in sorted(tree.query_pairs(max_gap)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[DetectionPoint]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(points[i])
    return [LaneGroup(tuple(m)) for _, m in sorted(groups.items())]
