"""Readers and writers for world files, PNG rasters, GeoJSON and CSV."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .geo import GeoTransform, InputError, RoadCenterline, WorldPoint

WORLD_FILE_SUFFIXES = (".pgw", ".pngw", ".wld")


# -- world files -------------------------------------------------------------

def parse_world_file(text: str) -> GeoTransform:
    """Parse a 6-line world file into a north-up transform.

    Lines 5 and 6 give the *center* of the top-left pixel; the transform
    origin is that pixel's top-left corner, half a pixel up and left.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) != 6:
        raise InputError(f"world file needs 6 lines, got {len(lines)}")
    try:
        a, d, b, e, c, f = (float(v) for v in lines)
    except ValueError as exc:
        raise InputError(f"world file has a non-numeric line: {exc}") from None
    if d != 0 or b != 0:
        raise InputError("rotated world files are not supported")
    if a <= 0 or not math.isclose(e, -a, rel_tol=1e-12):
        raise InputError(f"world file must be north-up with square pixels (a={a}, e={e})")
    return GeoTransform(origin_x=c - a / 2, origin_y=f + a / 2, px_size=a)


def format_world_file(t: GeoTransform) -> str:
    cx = t.origin_x + t.px_size / 2
    cy = t.origin_y - t.px_size / 2
    vals = [t.px_size, 0.0, 0.0, -t.px_size, cx, cy]
    return "".join(f"{v!r}\n" for v in vals)


def world_file_for(image_path: Path) -> Path | None:
    for suffix in WORLD_FILE_SUFFIXES:
        candidate = image_path.with_suffix(suffix)
        if candidate.exists():
            return candidate
    return None


def read_world_file(path: Path) -> GeoTransform:
    return parse_world_file(Path(path).read_text())


def write_world_file(path: Path, t: GeoTransform) -> None:
    Path(path).write_text(format_world_file(t))


# -- rasters -----------------------------------------------------------------

def read_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_rgb(path: Path, pixels: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8), mode="RGB").save(path, optimize=False)


def read_mask(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 0


def write_mask(path: Path, mask: np.ndarray) -> None:
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path, optimize=False)


# -- GeoJSON -----------------------------------------------------------------

def feature_collection(features: list[dict]) -> dict:
    return {"type": "FeatureCollection", "features": features}


def dump_geojson(path: Path, features: list[dict]) -> None:
    Path(path).write_text(json.dumps(feature_collection(features), indent=1) + "\n")


def load_features(path: Path) -> list[dict]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read GeoJSON {path}: {exc}") from None
    if data.get("type") != "FeatureCollection":
        raise InputError(f"{path} is not a FeatureCollection")
    return list(data.get("features") or [])


def parse_centerlines(features: Iterable[dict]) -> list[RoadCenterline]:
    """Centerlines from LineString/MultiLineString features.

    Each part of a MultiLineString becomes its own centerline with id
    ``"<id>/<part>"``.
    """
    lines: list[RoadCenterline] = []
    for n, feat in enumerate(features):
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        fid = props.get("id", feat.get("id", n))
        if "road_system" not in props:
            raise InputError(f"centerline {fid!r} lacks a road_system property")
        gtype = geom.get("type")
        if gtype == "LineString":
            parts = [geom["coordinates"]]
            ids = [str(fid)]
        elif gtype == "MultiLineString":
            parts = geom["coordinates"]
            ids = [f"{fid}/{k}" for k in range(len(parts))]
        else:
            raise InputError(f"centerline {fid!r} has unsupported geometry {gtype!r}")
        for pid, coords in zip(ids, parts):
            lines.append(RoadCenterline.from_coords(pid, coords, props["road_system"]))
    return lines


def read_centerlines(path: Path) -> list[RoadCenterline]:
    return parse_centerlines(load_features(path))


def centerline_feature(line: RoadCenterline) -> dict:
    return {
        "type": "Feature",
        "properties": {"id": line.id, "road_system": line.road_system.value},
        "geometry": {"type": "LineString", "coordinates": [[v.x, v.y] for v in line.vertices]},
    }


def point_feature(p: WorldPoint, properties: dict) -> dict:
    return {
        "type": "Feature",
        "properties": properties,
        "geometry": {"type": "Point", "coordinates": [p.x, p.y]},
    }


# -- CSV ---------------------------------------------------------------------

def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    Path(path).write_text(csv_text(header, rows))


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
