import random
import warnings
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from turnlane import voc
from turnlane.geo import GeoTransform, InputError, WorldBox, pixel_to_world
from turnlane.labels import LaneLabel, Schema
from turnlane.preprocess import RasterTile
from turnlane.trainprep import (LabeledFeature, ManifestEntry, TrainingManifest, assign_splits,
                                balance_classes, balance_target, build_manifest, export_chips,
                                manifest_csv, rotate90, write_export)

T = GeoTransform(0.0, 0.0, 0.5)
# per-class feature counts of the 12-class training set
COUNTS_12 = {LaneLabel.LEFT_ONLY: 3021, LaneLabel.RIGHT_ONLY: 2179, LaneLabel.LEFT_THROUGH: 1627,
             LaneLabel.RIGHT_THROUGH: 1583, LaneLabel.THROUGH: 2233, LaneLabel.LEFT_RIGHT_THROUGH: 920,
             LaneLabel.BICYCLE: 3230, LaneLabel.CENTER: 3043, LaneLabel.LEFT_RIGHT: 159,
             LaneLabel.MERGE: 2262, LaneLabel.U_TURN: 632, LaneLabel.NONE: 2780}


def tile(size=512, tile_id="t", seed=0):
    px = np.random.default_rng(seed).integers(0, 256, (size, size, 3), dtype=np.uint8)
    return RasterTile(tile_id, T, px)


def feature(label, col, row, w=20, h=20):
    a = pixel_to_world(col, row, T)
    b = pixel_to_world(col + w, row + h, T)
    return LabeledFeature(label, WorldBox.from_corners(a.x, a.y, b.x, b.y))


def test_voc_round_trip(tmp_path):
    ann = voc.VocAnnotation("c.png", 256, 256, 3, objects=(
        voc.VocObject("left_only", 3, 4, 40, 50), voc.VocObject("center", 0, 200, 256, 256, truncated=1)))
    assert voc.from_xml(voc.to_xml(ann)) == ann
    voc.write(tmp_path / "c.xml", ann)
    assert voc.read(tmp_path / "c.xml") == ann


def test_export_single_feature():
    res = export_chips([tile()], [feature(LaneLabel.LEFT_ONLY, 10, 10)])
    assert [c.chip_id for c in res.chips] == ["t_0_0"]
    (obj,) = res.chips[0].annotation.objects
    assert (obj.name, obj.bbox) == ("left_only", (10, 10, 30, 30))
    assert res.warnings == []


def test_export_two_features_share_a_chip():
    res = export_chips([tile()], [feature(LaneLabel.LEFT_ONLY, 10, 10), feature(LaneLabel.CENTER, 100, 40)])
    first = res.chips[0]
    assert first.chip_id == "t_0_0"
    assert [o.name for o in first.annotation.objects] == ["left_only", "center"]
    assert res.expansion_factor >= 1


def test_export_overlapping_windows_duplicate_features():
    res = export_chips([tile()], [feature(LaneLabel.RIGHT_ONLY, 200, 200)])
    # the box sits in the interior of four windows
    assert sorted(c.chip_id for c in res.chips) == ["t_0_0", "t_0_128", "t_128_0", "t_128_128"]
    assert res.expansion_factor == 4


def test_export_pixels_match_tile():
    t = tile(seed=3)
    res = export_chips([t], [feature(LaneLabel.CENTER, 300, 300)])
    for c in res.chips:
        assert np.array_equal(c.pixels, t.pixels[c.window_row:c.window_row + 256, c.window_col:c.window_col + 256])


def test_oversize_feature_is_clipped_with_warning():
    res = export_chips([tile()], [feature(LaneLabel.THROUGH, 100, 100, w=300, h=20)])
    assert len(res.warnings) == 1
    objs = [o for c in res.chips for o in c.annotation.objects]
    assert len(objs) == 1 and objs[0].truncated == 1
    assert 0 <= objs[0].xmin < objs[0].xmax <= 256


def test_feature_off_every_tile():
    with pytest.raises(InputError):
        export_chips([tile()], [LabeledFeature(LaneLabel.CENTER, WorldBox(1e5, 1e5, 1e5 + 5, 1e5 + 5))])


def test_write_export(tmp_path):
    res = export_chips([tile()], [feature(LaneLabel.LEFT_ONLY, 10, 10), feature(LaneLabel.CENTER, 300, 300)])
    write_export(tmp_path, res)
    for c in res.chips:
        assert voc.read(tmp_path / "labels" / f"{c.chip_id}.xml") == c.annotation
        assert (tmp_path / "images" / f"{c.chip_id}.png").exists()
    assert len((tmp_path / "export_manifest.csv").read_text().splitlines()) == len(res.chips) + 1


def test_rotate90_known_box():
    px = np.zeros((256, 256, 3), np.uint8)
    _, (box,) = rotate90(px, [(10, 20, 30, 60)])
    assert box == (196, 10, 236, 30)


def test_rotate90_index_oracle():
    rng = np.random.default_rng(0)
    px = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
    out, _ = rotate90(px, [])
    for r in range(16):
        for c in range(16):
            # clockwise: source (r, c) lands at (c, H - 1 - r)
            assert np.array_equal(out[c, 15 - r], px[r, c])


def test_rotate90_moves_painted_box_with_pixels():
    rng = random.Random(4)
    for _ in range(50):
        px = np.zeros((64, 64, 3), np.uint8)
        x1, y1 = rng.randint(0, 50), rng.randint(0, 50)
        x2, y2 = x1 + rng.randint(1, 13), y1 + rng.randint(1, 13)
        px[y1:y2, x1:x2] = 255
        out, (b,) = rotate90(px, [(x1, y1, x2, y2)])
        ys, xs = np.nonzero(out[..., 0])
        assert (xs.min(), ys.min(), xs.max() + 1, ys.max() + 1) == b


def test_rotate90_centered_box_symmetric():
    _, (b,) = rotate90(np.zeros((256, 256, 3), np.uint8), [(96, 96, 160, 160)])
    assert b == (96, 96, 160, 160)


@given(st.integers(0, 10**6))
def test_rotate90_four_cycle(seed):
    rng = np.random.default_rng(seed)
    px = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
    objs = []
    for _ in range(int(rng.integers(0, 4))):
        x1, y1 = (int(v) for v in rng.integers(0, 31, 2))
        x2, y2 = (int(v) for v in rng.integers((x1 + 1, y1 + 1), 33))
        objs.append(voc.VocObject("center", x1, y1, x2, y2))
    p, b = px, objs
    for _ in range(4):
        p, b = rotate90(p, b)
    assert np.array_equal(p, px)
    assert b == objs


def manifest_from_counts(counts, schema):
    entries = []
    for lab, n in counts.items():
        entries += [ManifestEntry(f"{lab.slug}-{i}", (lab,), "train") for i in range(n)]
    return TrainingManifest(schema, tuple(entries))


def test_balance_simple_counts():
    a, b, c = LaneLabel.LEFT_ONLY, LaneLabel.RIGHT_ONLY, LaneLabel.CENTER
    m = manifest_from_counts({a: 100, b: 100, c: 10}, Schema.SCHEMA4)
    with pytest.warns(UserWarning, match="none"):
        out = balance_classes(m)
    assert out.counts[c] == 100 and out.counts[a] == 100
    dups = [e for e in out.entries if e.duplicate_of]
    assert len(dups) == 90 and all(e.rotate for e in dups)
    assert len({e.chip_id for e in out.entries}) == len(out.entries)


def test_balance_twelve_class_counts():
    assert sum(COUNTS_12.values()) == 23669
    assert balance_target(Counter(COUNTS_12)) == 2206
    out = balance_classes(manifest_from_counts(COUNTS_12, Schema.SCHEMA12))
    dups = Counter(e.labels[0] for e in out.entries if e.duplicate_of)
    assert dups[LaneLabel.LEFT_RIGHT] == 2047
    assert dups[LaneLabel.LEFT_ONLY] == 0
    assert all(out.counts[lab] >= 2206 for lab in COUNTS_12)


def test_balance_never_reduces():
    m = manifest_from_counts({LaneLabel.LEFT_ONLY: 5, LaneLabel.RIGHT_ONLY: 50, LaneLabel.CENTER: 9,
                              LaneLabel.NONE: 7}, Schema.SCHEMA4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        out = balance_classes(m)
    for lab, n in m.counts.items():
        assert out.counts[lab] >= n


def test_splits_partition_and_determinism():
    names = assign_splits(1000, seed=7)
    assert Counter(names) == {"train": 700, "validation": 150, "test": 150}
    assert names == assign_splits(1000, seed=7)
    assert names != assign_splits(1000, seed=8)
    for n in range(0, 30):
        assert len(assign_splits(n)) == n and all(assign_splits(n))


def test_build_manifest_and_duplicates_inherit_split():
    res = export_chips([tile()], [feature(LaneLabel.LEFT_ONLY, 10, 10), feature(LaneLabel.CENTER, 300, 300),
                                  feature(LaneLabel.CENTER, 400, 420), feature(LaneLabel.RIGHT_ONLY, 200, 10)])
    man = build_manifest(res.chips, Schema.SCHEMA4, seed=1)
    with pytest.warns(UserWarning, match="none"):
        bal = balance_classes(man, target=6)
    splits = {e.chip_id: e.split for e in man.entries}
    for e in bal.entries:
        if e.duplicate_of:
            assert e.split == splits[e.duplicate_of]
    assert manifest_csv(bal).splitlines()[0] == "chip_id,labels,split,duplicate_of,rotate"


def test_build_manifest_rejects_foreign_labels():
    res = export_chips([tile()], [feature(LaneLabel.BICYCLE, 10, 10)])
    with pytest.raises(InputError):
        build_manifest(res.chips, Schema.SCHEMA4)
