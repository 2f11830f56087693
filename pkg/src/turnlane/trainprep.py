"""Training-chip export, 90 degree rotation augmentation, class balancing, splits."""
from __future__ import annotations

import math
import random
import statistics
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import fileio, voc
from .chipper import CHIP_SIZE, STRIDE, window_origins
from .geo import InputError, WorldBox, WorldPoint, point_in_box, world_to_pixel
from .labels import LaneLabel, Schema
from .preprocess import NODATA, RasterTile

SPLITS = (("train", 0.70), ("validation", 0.15), ("test", 0.15))


@dataclass(frozen=True)
class LabeledFeature:
    label: LaneLabel
    bbox: WorldBox
    tile_id: str = ""

    def __post_init__(self):
        if not self.bbox.area > 0:
            raise InputError(f"labeled feature has no area: {self.bbox}")


@dataclass(frozen=True, eq=False)
class TrainingChip:
    chip_id: str
    tile_id: str
    window_col: int
    window_row: int
    pixels: np.ndarray
    annotation: voc.VocAnnotation


@dataclass
class ExportResult:
    chips: list[TrainingChip]
    warnings: list[str]
    feature_count: int

    @property
    def object_count(self) -> int:
        return sum(len(c.annotation.objects) for c in self.chips)

    @property
    def expansion_factor(self) -> float:
        """Exported objects per labeled feature (window overlap duplicates features)."""
        return self.object_count / self.feature_count if self.feature_count else 0.0


def _pixel_box(f: LabeledFeature, tile: RasterTile) -> tuple[int, int, int, int]:
    c0, r0 = world_to_pixel(WorldPoint(f.bbox.min_x, f.bbox.max_y), tile.transform)
    c1, r1 = world_to_pixel(WorldPoint(f.bbox.max_x, f.bbox.min_y), tile.transform)
    # round first so 9.9999999 does not floor to 9
    return (math.floor(round(c0, 6)), math.floor(round(r0, 6)),
            math.ceil(round(c1, 6)), math.ceil(round(r1, 6)))


def _window_pixels(tile: RasterTile, col: int, row: int, size: int) -> np.ndarray:
    out = np.empty((size, size, 3), dtype=np.uint8)
    out[:] = NODATA
    h = min(size, tile.height - row)
    w = min(size, tile.width - col)
    out[:h, :w] = tile.pixels[row:row + h, col:col + w]
    return out


def export_chips(tiles: Sequence[RasterTile], features: Sequence[LabeledFeature],
                 chip_size: int = CHIP_SIZE, stride: int = STRIDE) -> ExportResult:
    """Cut labeled chips on the stride grid.

    Every window that fully contains at least one feature becomes a chip
    annotated with all features it fully contains. A feature no window can
    hold is clipped into the window nearest its center and a warning is
    recorded.
    """
    by_tile: dict[str, list[LabeledFeature]] = {t.tile_id: [] for t in tiles}
    tile_map = {t.tile_id: t for t in tiles}
    for f in features:
        home = f.tile_id if f.tile_id in tile_map else None
        if home is None or not point_in_box(f.bbox.center, tile_map[home].footprint):
            home = next((t.tile_id for t in tiles if point_in_box(f.bbox.center, t.footprint)), None)
        if home is None:
            raise InputError(f"feature {f.label.slug} at {f.bbox.as_tuple()} is not on any tile")
        by_tile[home].append(f)

    chips: list[TrainingChip] = []
    notes: list[str] = []
    for tile in tiles:
        feats = by_tile[tile.tile_id]
        if not feats:
            continue
        boxes = [_pixel_box(f, tile) for f in feats]
        cols = window_origins(tile.width, chip_size, stride)
        rows = window_origins(tile.height, chip_size, stride)
        members: dict[tuple[int, int], list[voc.VocObject]] = {}
        placed = [False] * len(feats)
        for r in rows:
            for c in cols:
                objs = []
                for i, (x0, y0, x1, y1) in enumerate(boxes):
                    if c <= x0 and x1 <= c + chip_size and r <= y0 and y1 <= r + chip_size:
                        objs.append(voc.VocObject(feats[i].label.slug, x0 - c, y0 - r, x1 - c, y1 - r))
                        placed[i] = True
                if objs:
                    members[(r, c)] = objs
        for i, ok in enumerate(placed):
            if ok:
                continue
            x0, y0, x1, y1 = boxes[i]
            mx, my = (x0 + x1) / 2, (y0 + y1) / 2
            r, c = min(((r, c) for r in rows for c in cols),
                       key=lambda rc: ((rc[1] + chip_size / 2 - mx) ** 2 + (rc[0] + chip_size / 2 - my) ** 2, rc))
            obj = voc.VocObject(feats[i].label.slug,
                                max(0, x0 - c), max(0, y0 - r),
                                min(chip_size, x1 - c), min(chip_size, y1 - r), truncated=1)
            members.setdefault((r, c), []).append(obj)
            notes.append(f"{tile.tile_id}: {feats[i].label.slug} box {boxes[i]} does not fit a "
                         f"{chip_size}px window; clipped into window ({c}, {r})")
        for (r, c), objs in sorted(members.items()):
            chip_id = f"{tile.tile_id}_{c}_{r}"
            ann = voc.VocAnnotation(f"{chip_id}.png", chip_size, chip_size, 3, objects=tuple(objs))
            chips.append(TrainingChip(chip_id, tile.tile_id, c, r, _window_pixels(tile, c, r, chip_size), ann))
    return ExportResult(chips, notes, len(features))


def write_export(out_dir: Path, result: ExportResult) -> Path:
    """Write images/, labels/ and a manifest CSV; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    rows = []
    for chip in result.chips:
        fileio.write_rgb(out_dir / "images" / f"{chip.chip_id}.png", chip.pixels)
        voc.write(out_dir / "labels" / f"{chip.chip_id}.xml", chip.annotation)
        rows.append((chip.chip_id, chip.tile_id, chip.window_col, chip.window_row,
                     f"images/{chip.chip_id}.png", f"labels/{chip.chip_id}.xml",
                     " ".join(o.name for o in chip.annotation.objects)))
    manifest = out_dir / "export_manifest.csv"
    fileio.write_csv(manifest, ("chip_id", "tile_id", "window_col", "window_row", "image", "annotation", "labels"), rows)
    if result.warnings:
        (out_dir / "export_warnings.txt").write_text("".join(w + "\n" for w in result.warnings))
    return manifest


def rotate90(pixels: np.ndarray, boxes: Sequence) -> tuple[np.ndarray, list]:
    """Rotate a chip 90 degrees clockwise together with its boxes.

    ``boxes`` holds ``(x1, y1, x2, y2)`` tuples or ``VocObject``s; a box maps
    to ``(H - y2, x1, H - y1, x2)`` where ``H`` is the chip height.
    """
    h = pixels.shape[0]
    out = []
    for b in boxes:
        if isinstance(b, voc.VocObject):
            out.append(replace(b, xmin=h - b.ymax, ymin=b.xmin, xmax=h - b.ymin, ymax=b.xmax))
        else:
            x1, y1, x2, y2 = b
            out.append((h - y2, x1, h - y1, x2))
    return np.rot90(pixels, -1).copy(), out


# -- manifests ---------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    chip_id: str
    labels: tuple[LaneLabel, ...]
    split: str = ""
    duplicate_of: str = ""
    rotate: bool = False


@dataclass(frozen=True)
class TrainingManifest:
    schema: Schema
    entries: tuple[ManifestEntry, ...]
    seed: int = 0
    splits: tuple = field(default=SPLITS)

    @property
    def counts(self) -> Counter:
        c = Counter({lab: 0 for lab in self.schema.labels})
        for e in self.entries:
            c.update(e.labels)
        return c


def assign_splits(n: int, seed: int = 0, splits=SPLITS) -> list[str]:
    """Seeded 70/15/15 partition of ``n`` items; index i gets the returned name."""
    order = list(range(n))
    random.Random(seed).shuffle(order)
    out = [""] * n
    start = 0
    for k, (name, frac) in enumerate(splits):
        stop = n if k == len(splits) - 1 else start + int(n * frac + 0.5)
        for i in order[start:min(stop, n)]:
            out[i] = name
        start = stop
    return out


def build_manifest(chips: Sequence[TrainingChip], schema: Schema = Schema.SCHEMA4, seed: int = 0) -> TrainingManifest:
    allowed = set(schema.labels)
    entries = []
    names = assign_splits(len(chips), seed)
    for chip, split in zip(chips, names):
        labels = tuple(LaneLabel.parse(o.name) for o in chip.annotation.objects)
        bad = [lab for lab in labels if lab not in allowed]
        if bad:
            raise InputError(f"chip {chip.chip_id} has labels outside {schema.name}: {bad}")
        entries.append(ManifestEntry(chip.chip_id, labels, split))
    return TrainingManifest(schema, tuple(entries), seed)


def balance_target(counts: Counter) -> int:
    present = [v for v in counts.values() if v > 0]
    return math.ceil(statistics.median(present)) if present else 0


def balance_classes(manifest: TrainingManifest, target: int | None = None) -> TrainingManifest:
    """Duplicate chips of under-represented classes until each reaches ``target``.

    The default target is the median of the non-empty class counts.
    Duplicates keep their source's split and are flagged for rotation.
    """
    counts = manifest.counts
    if target is None:
        target = balance_target(counts)
    entries = list(manifest.entries)
    originals = [e for e in manifest.entries if not e.duplicate_of]
    n_dups = Counter()
    for lab in manifest.schema.labels:
        if counts[lab] == 0:
            warnings.warn(f"class {lab.slug} has no examples; left empty", stacklevel=2)
            continue
        sources = [e for e in originals if lab in e.labels]
        k = 0
        while counts[lab] < target:
            src = sources[k % len(sources)]
            n_dups[src.chip_id] += 1
            dup = ManifestEntry(f"{src.chip_id}#dup{n_dups[src.chip_id]}", src.labels, src.split,
                                duplicate_of=src.chip_id, rotate=True)
            entries.append(dup)
            counts.update(dup.labels)
            k += 1
    return replace(manifest, entries=tuple(entries))


MANIFEST_HEADER = ("chip_id", "labels", "split", "duplicate_of", "rotate")


def manifest_csv(manifest: TrainingManifest) -> str:
    rows = [(e.chip_id, " ".join(lab.slug for lab in e.labels), e.split, e.duplicate_of, int(e.rotate))
            for e in manifest.entries]
    return fileio.csv_text(MANIFEST_HEADER, rows)
