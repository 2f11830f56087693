"""Tile selection and buffer masking around road centerlines."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from PIL import Image

from . import fileio
from .geo import (GeoTransform, InputError, RoadCenterline, WorldBox,
                  distance_box_to_polyline)

NODATA = (0, 0, 0)
MANIFEST_HEADER = ("tile_id", "path", "width", "height", "retained_pixel_count")


@dataclass(frozen=True, eq=False)
class RasterTile:
    tile_id: str
    transform: GeoTransform | None
    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] == 0 or px.shape[1] == 0:
            raise InputError(f"tile {self.tile_id!r}: expected a non-empty HxWx3 array, got {px.shape}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def footprint(self) -> WorldBox:
        return footprint(self.transform, self.width, self.height)


@dataclass(frozen=True, eq=False)
class MaskedTile(RasterTile):
    mask: np.ndarray = None  # (height, width) bool, True = retained

    def __post_init__(self):
        super().__post_init__()
        if self.mask is None or self.mask.shape != self.pixels.shape[:2]:
            raise InputError(f"tile {self.tile_id!r}: mask shape does not match pixels")

    @property
    def retained_pixel_count(self) -> int:
        return int(self.mask.sum())


def footprint(t: GeoTransform, width: int, height: int) -> WorldBox:
    return WorldBox(t.origin_x, t.origin_y - height * t.px_size,
                    t.origin_x + width * t.px_size, t.origin_y)


def select_tiles(tiles: Mapping[str, WorldBox], lines: Sequence[RoadCenterline],
                 buffer_radius: float = 100.0) -> list[str]:
    """Ids of tiles whose footprint lies within ``buffer_radius`` of a centerline, sorted."""
    if not lines:
        return []
    picked = []
    for tile_id, box in tiles.items():
        near = [ln for ln in lines if _box_gap(box, ln.bounds) <= buffer_radius]
        if any(distance_box_to_polyline(box, ln) <= buffer_radius for ln in near):
            picked.append(tile_id)
    return sorted(picked)


def _box_gap(a: WorldBox, b: WorldBox) -> float:
    dx = max(0.0, max(a.min_x, b.min_x) - min(a.max_x, b.max_x))
    dy = max(0.0, max(a.min_y, b.min_y) - min(a.max_y, b.max_y))
    return float(np.hypot(dx, dy))


def _segment_array(lines: Sequence[RoadCenterline]) -> np.ndarray:
    segs = [seg for ln in lines for seg in ln.segments()]
    return np.asarray(segs, dtype=np.float64).reshape(-1, 4)


def _segment_distance(px: np.ndarray, py: np.ndarray, seg) -> np.ndarray:
    # same operation order as geo.distance_point_to_segment, so results match bit for bit
    ax, ay, bx, by = seg
    dx = bx - ax
    dy = by - ay
    dd = dx * dx + dy * dy
    t = ((px - ax) * dx + (py - ay) * dy) / dd if dd > 0 else np.zeros_like(px)
    t = np.minimum(np.maximum(t, 0.0), 1.0)
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return np.sqrt(ex * ex + ey * ey)


def buffer_mask(width: int, height: int, t: GeoTransform, lines: Sequence[RoadCenterline],
                buffer_radius: float = 100.0) -> np.ndarray:
    """Boolean grid: True where the pixel center is within ``buffer_radius`` of a line.

    The grid is processed in square cells one buffer radius wide; each cell
    only tests the segments whose radius-expanded bounds reach it.
    """
    if not buffer_radius > 0:
        raise InputError(f"buffer_radius must be positive, got {buffer_radius}")
    mask = np.zeros((height, width), dtype=bool)
    segs = _segment_array(lines)
    if len(segs) == 0:
        return mask
    seg_lo_x = np.minimum(segs[:, 0], segs[:, 2]) - buffer_radius
    seg_hi_x = np.maximum(segs[:, 0], segs[:, 2]) + buffer_radius
    seg_lo_y = np.minimum(segs[:, 1], segs[:, 3]) - buffer_radius
    seg_hi_y = np.maximum(segs[:, 1], segs[:, 3]) + buffer_radius

    cell = max(1, int(buffer_radius / t.px_size))
    xs = t.origin_x + (np.arange(width) + 0.5) * t.px_size
    ys = t.origin_y - (np.arange(height) + 0.5) * t.px_size
    for r0 in range(0, height, cell):
        r1 = min(height, r0 + cell)
        cy = ys[r0:r1]
        for c0 in range(0, width, cell):
            c1 = min(width, c0 + cell)
            cx = xs[c0:c1]
            hit = ((seg_lo_x <= cx[-1]) & (seg_hi_x >= cx[0])
                   & (seg_lo_y <= cy[0]) & (seg_hi_y >= cy[-1]))
            idx = np.flatnonzero(hit)
            if len(idx) == 0:
                continue
            gx, gy = np.meshgrid(cx, cy)
            block = np.zeros(gx.shape, dtype=bool)
            for i in idx:
                block |= _segment_distance(gx, gy, segs[i]) <= buffer_radius
            mask[r0:r1, c0:c1] = block
    return mask


def mask_tile(tile: RasterTile, lines: Sequence[RoadCenterline], buffer_radius: float = 100.0) -> MaskedTile:
    """Blank every pixel whose center is farther than ``buffer_radius`` from all centerlines."""
    if tile.transform is None:
        raise InputError(f"tile {tile.tile_id!r} has no georeference")
    mask = buffer_mask(tile.width, tile.height, tile.transform, lines, buffer_radius)
    pixels = tile.pixels.copy()
    pixels[~mask] = NODATA
    return MaskedTile(tile.tile_id, tile.transform, pixels, mask)


# -- on-disk tiles -----------------------------------------------------------

@dataclass(frozen=True)
class TileSource:
    tile_id: str
    image_path: Path
    transform: GeoTransform
    width: int
    height: int

    @property
    def footprint(self) -> WorldBox:
        return footprint(self.transform, self.width, self.height)

    def load(self) -> RasterTile:
        return RasterTile(self.tile_id, self.transform, fileio.read_rgb(self.image_path))


def scan_tiles(directory: Path) -> list[TileSource]:
    """PNG tiles with world-file sidecars in ``directory``, sorted by tile id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"tile directory {directory} does not exist")
    out = []
    for png in sorted(directory.glob("*.png")):
        if png.stem.endswith("_mask"):
            continue
        wf = fileio.world_file_for(png)
        if wf is None:
            raise InputError(f"tile {png.name} has no world file")
        with Image.open(png) as im:
            w, h = im.size
        out.append(TileSource(png.stem, png, fileio.read_world_file(wf), w, h))
    return out


def write_masked(out_dir: Path, tile: MaskedTile) -> Path:
    """Write masked PNG, world file and 1-band mask PNG; returns the image path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    img = out_dir / f"{tile.tile_id}.png"
    fileio.write_rgb(img, tile.pixels)
    fileio.write_world_file(img.with_suffix(".pgw"), tile.transform)
    fileio.write_mask(out_dir / f"{tile.tile_id}_mask.png", tile.mask)
    return img


def load_masked(image_path: Path) -> MaskedTile:
    image_path = Path(image_path)
    t = fileio.read_world_file(fileio.world_file_for(image_path) or image_path.with_suffix(".pgw"))
    pixels = fileio.read_rgb(image_path)
    mask = fileio.read_mask(image_path.with_name(f"{image_path.stem}_mask.png"))
    return MaskedTile(image_path.stem, t, pixels, mask)
