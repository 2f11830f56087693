"""Synthetic georeferenced scenes with planted arrow markings of known position."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio, stencils
from .evaluate import GroundTruthPoint
from .geo import GeoTransform, RoadCenterline, RoadSystem, WorldPoint, pixel_to_world
from .labels import TURNING_LABELS, LaneLabel
from .preprocess import RasterTile

ASPHALT = np.array([88.0, 90.0, 92.0])
GRASS = np.array([70.0, 95.0, 55.0])
PAINT = np.array([1.0, 1.0, 0.96])


@dataclass(frozen=True)
class Plant:
    label: LaneLabel
    row: int          # top-left pixel of the stencil
    col: int
    size: int
    rotation: int     # quarter turns clockwise
    contrast: float
    road_system: RoadSystem
    center: WorldPoint


@dataclass(frozen=True, eq=False)
class Scene:
    tile: RasterTile
    lines: tuple[RoadCenterline, ...]
    plants: tuple[Plant, ...]

    @property
    def ground_truth(self) -> list[GroundTruthPoint]:
        return [GroundTruthPoint(p.center, p.label) for p in self.plants]

    def write(self, directory: Path) -> tuple[Path, Path, Path]:
        """Write tile PNG + world file, centerlines and ground truth; returns their paths."""
        directory = Path(directory)
        tiles = directory / "tiles"
        tiles.mkdir(parents=True, exist_ok=True)
        img = tiles / f"{self.tile.tile_id}.png"
        fileio.write_rgb(img, self.tile.pixels)
        fileio.write_world_file(img.with_suffix(".pgw"), self.tile.transform)
        lines = directory / "centerlines.geojson"
        fileio.dump_geojson(lines, [fileio.centerline_feature(ln) for ln in self.lines])
        gt = directory / "gt.geojson"
        fileio.dump_geojson(gt, [fileio.point_feature(g.location, {"label": g.label.slug})
                                 for g in self.ground_truth])
        return tiles, lines, gt


def planted_scene(seed: int = 0, size: int = 2048, n_plants: int = 100, px_size: float = 0.5,
                  origin: tuple[float, float] = (500000.0, 700000.0), stencil_size: int = 32,
                  noise: float = 9.0, tile_id: str = "synthetic") -> Scene:
    """Two parallel roads (State above, Local below) with ``n_plants`` arrows.

    Plants sit in three rows per road, 70 px apart, with jittered columns;
    contrast varies to spread detector confidence.
    """
    rng = np.random.default_rng(seed)
    t = GeoTransform(origin[0], origin[1], px_size)
    # keep the two roads' plant rows apart even on small tiles
    gap = max(round(size * 0.06), 110)
    state_row, local_row = size // 2 - gap, size // 2 + gap

    def road(row, system, name):
        y = t.origin_y - row * px_size
        return RoadCenterline.from_coords(name, [(t.origin_x - 50, y), (t.origin_x + size * px_size + 50, y)], system)

    lines = (road(state_row, RoadSystem.STATE, "state-1"), road(local_row, RoadSystem.LOCAL, "local-1"))

    img = np.empty((size, size, 3))
    img[:] = GRASS
    img[max(0, state_row - 140):local_row + 140] = ASPHALT

    rows = [(state_row + d, RoadSystem.STATE) for d in (-70, 0, 70)] + \
           [(local_row + d, RoadSystem.LOCAL) for d in (-70, 0, 70)]
    per_row = [n_plants // len(rows) + (1 if k < n_plants % len(rows) else 0) for k in range(len(rows))]
    plants = []
    half = stencil_size // 2
    for (crow, system), n in zip(rows, per_row):
        if n == 0:
            continue
        xs = np.linspace(half + 24, size - half - 24, n)
        for x in xs:
            ccol = int(np.clip(round(x + rng.uniform(-12, 12)), half + 1, size - half - 1))
            label = TURNING_LABELS[int(rng.integers(len(TURNING_LABELS)))]
            k = int(rng.integers(4))
            contrast = float(rng.choice([140.0, 60.0, 36.0]))
            r0, c0 = crow - half, ccol - half
            mark = np.rot90(stencils.stencil(label, stencil_size), -k)
            patch = img[r0:r0 + stencil_size, c0:c0 + stencil_size]
            patch[mark] = ASPHALT + contrast * PAINT
            center = pixel_to_world(c0 + stencil_size / 2, r0 + stencil_size / 2, t)
            plants.append(Plant(label, r0, c0, stencil_size, k, contrast, system, center))

    img += rng.normal(0.0, noise, img.shape)
    pixels = np.clip(np.round(img), 0, 255).astype(np.uint8)
    return Scene(RasterTile(tile_id, t, pixels), lines, tuple(plants))
