"""Planar geometry in world feet: affine pixel transforms, boxes, centerlines.

World axes are north-up: x grows with pixel column, y shrinks as the pixel
row grows. Nothing here knows about map projections; inputs are assumed to
be in a planar, feet-based CRS already.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence


class InputError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class GeoTransform:
    """North-up affine mapping with square pixels.

    ``origin_x``/``origin_y`` locate the top-left *corner* of pixel (0, 0).
    """

    origin_x: float
    origin_y: float
    px_size: float

    def __post_init__(self):
        if not (self.px_size > 0 and math.isfinite(self.px_size)):
            raise InputError(f"px_size must be positive, got {self.px_size!r}")


@dataclass(frozen=True)
class WorldPoint:
    x: float
    y: float


@dataclass(frozen=True, order=True)
class WorldBox:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if self.min_x > self.max_x or self.min_y > self.max_y:
            raise InputError(f"inverted box {self!r}")

    @classmethod
    def from_corners(cls, x0: float, y0: float, x1: float, y1: float) -> "WorldBox":
        return cls(min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1))

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> WorldPoint:
        return WorldPoint((self.min_x + self.max_x) / 2, (self.min_y + self.max_y) / 2)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.min_x, self.min_y, self.max_x, self.max_y)


class RoadSystem(str, enum.Enum):
    """State-maintained (ON System) vs county/city-maintained (OFF System) roads."""

    STATE = "state"
    LOCAL = "local"

    @classmethod
    def parse(cls, value: str) -> "RoadSystem":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InputError(f"road_system must be 'state' or 'local', got {value!r}") from None


@dataclass(frozen=True)
class RoadCenterline:
    id: str
    vertices: tuple[WorldPoint, ...]
    road_system: RoadSystem

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise InputError(f"centerline {self.id!r} needs at least 2 vertices")
        for a, b in zip(self.vertices, self.vertices[1:]):
            if a == b:
                raise InputError(f"centerline {self.id!r} repeats vertex ({a.x}, {a.y})")
        if not isinstance(self.road_system, RoadSystem):
            raise InputError(f"centerline {self.id!r} has no road_system")

    @classmethod
    def from_coords(cls, id: str, coords: Iterable[Sequence[float]], road_system) -> "RoadCenterline":
        """Build a centerline, silently dropping consecutive duplicate vertices."""
        pts: list[WorldPoint] = []
        for c in coords:
            p = WorldPoint(float(c[0]), float(c[1]))
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise InputError(f"centerline {id!r} has a non-finite vertex")
            if not pts or pts[-1] != p:
                pts.append(p)
        if isinstance(road_system, str):
            road_system = RoadSystem.parse(road_system)
        return cls(str(id), tuple(pts), road_system)

    def segments(self):
        """Yield ``(ax, ay, bx, by)`` for each segment."""
        for a, b in zip(self.vertices, self.vertices[1:]):
            yield a.x, a.y, b.x, b.y

    @property
    def bounds(self) -> WorldBox:
        xs = [v.x for v in self.vertices]
        ys = [v.y for v in self.vertices]
        return WorldBox(min(xs), min(ys), max(xs), max(ys))


def pixel_to_world(col: float, row: float, t: GeoTransform) -> WorldPoint:
    return WorldPoint(t.origin_x + col * t.px_size, t.origin_y - row * t.px_size)


def world_to_pixel(p: WorldPoint, t: GeoTransform) -> tuple[float, float]:
    return (p.x - t.origin_x) / t.px_size, (t.origin_y - p.y) / t.px_size


def distance_point_to_segment(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> float:
    # keep the arithmetic order in sync with preprocess._segment_distance
    dx = bx - ax
    dy = by - ay
    dd = dx * dx + dy * dy
    t = ((px - ax) * dx + (py - ay) * dy) / dd if dd > 0 else 0.0
    t = min(max(t, 0.0), 1.0)
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return math.sqrt(ex * ex + ey * ey)


def distance_point_to_polyline(p: WorldPoint, line: RoadCenterline) -> float:
    return min(distance_point_to_segment(p.x, p.y, *seg) for seg in line.segments())


def _segments_intersect(ax, ay, bx, by, cx, cy, dx, dy) -> bool:
    def orient(px, py, qx, qy, rx, ry):
        v = (qx - px) * (ry - py) - (qy - py) * (rx - px)
        return (v > 0) - (v < 0)

    def on_seg(px, py, qx, qy, rx, ry):
        return min(px, qx) <= rx <= max(px, qx) and min(py, qy) <= ry <= max(py, qy)

    o1 = orient(ax, ay, bx, by, cx, cy)
    o2 = orient(ax, ay, bx, by, dx, dy)
    o3 = orient(cx, cy, dx, dy, ax, ay)
    o4 = orient(cx, cy, dx, dy, bx, by)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(ax, ay, bx, by, cx, cy))
            or (o2 == 0 and on_seg(ax, ay, bx, by, dx, dy))
            or (o3 == 0 and on_seg(cx, cy, dx, dy, ax, ay))
            or (o4 == 0 and on_seg(cx, cy, dx, dy, bx, by)))


def distance_box_to_segment(b: WorldBox, ax: float, ay: float, bx: float, by: float) -> float:
    """Minimum distance between a (filled) box and a segment; 0 if they touch."""
    if point_in_box(WorldPoint(ax, ay), b) or point_in_box(WorldPoint(bx, by), b):
        return 0.0
    corners = [(b.min_x, b.min_y), (b.max_x, b.min_y), (b.max_x, b.max_y), (b.min_x, b.max_y)]
    edges = list(zip(corners, corners[1:] + corners[:1]))
    for (cx, cy), (dx, dy) in edges:
        if _segments_intersect(ax, ay, bx, by, cx, cy, dx, dy):
            return 0.0
    best = min(distance_point_to_segment(cx, cy, ax, ay, bx, by) for cx, cy in corners)
    for (cx, cy), (dx, dy) in edges:
        best = min(best,
                   distance_point_to_segment(ax, ay, cx, cy, dx, dy),
                   distance_point_to_segment(bx, by, cx, cy, dx, dy))
    return best


def distance_box_to_polyline(b: WorldBox, line: RoadCenterline) -> float:
    return min(distance_box_to_segment(b, *seg) for seg in line.segments())


def intersection_area(a: WorldBox, b: WorldBox) -> float:
    w = min(a.max_x, b.max_x) - max(a.min_x, b.min_x)
    h = min(a.max_y, b.max_y) - max(a.min_y, b.min_y)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def overlap_ratio(a: WorldBox, b: WorldBox, method: str = "iou") -> float:
    """Overlap of two boxes as a fraction in [0, 1].

    ``method`` selects the denominator: ``"iou"`` (union, the default),
    ``"min"`` (smaller box) or ``"max"`` (larger box). Two identical
    zero-area boxes count as fully overlapping.
    """
    inter = intersection_area(a, b)
    if method == "iou":
        denom = a.area + b.area - inter
    elif method == "min":
        denom = min(a.area, b.area)
    elif method == "max":
        denom = max(a.area, b.area)
    else:
        raise ValueError(f"unknown overlap method {method!r}")
    if denom <= 0:
        return 1.0 if a == b else 0.0
    return min(1.0, inter / denom)


def point_in_box(p: WorldPoint, b: WorldBox) -> bool:
    return b.min_x <= p.x <= b.max_x and b.min_y <= p.y <= b.max_y
