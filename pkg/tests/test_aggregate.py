import random

import pytest
from hypothesis import given, settings, strategies as st

from turnlane import fileio
from turnlane.aggregate import (DetectionPoint, Source, WorldDetection, dedup, detection_feature,
                                detections_from_features, georeference, point_feature,
                                points_from_features, to_points)
from turnlane.chipper import ChipPlan
from turnlane.detector import ChipDetection
from turnlane.geo import InputError, WorldBox, WorldPoint, overlap_ratio, world_to_pixel
from turnlane.labels import LaneLabel

from oracles import box_iou, greedy_nms

LABELS = (LaneLabel.LEFT_ONLY, LaneLabel.RIGHT_ONLY, LaneLabel.CENTER)
SRC = Source("t", 0, 0)


def det(label, box, conf, src=SRC):
    return WorldDetection(label, WorldBox(*box), conf, src)


def random_detections(rng, n, span=200.0):
    out = []
    for i in range(n):
        x, y = rng.uniform(0, span), rng.uniform(0, span)
        w, h = rng.uniform(2, 30), rng.uniform(2, 30)
        conf = round(rng.uniform(0.05, 1.0), 2)  # ties happen on purpose
        out.append(det(rng.choice(LABELS), (x, y, x + w, y + h), conf, Source("t", rng.choice([0, 128]), 0)))
    return out


def test_georeference_window_origin(transform):
    wd = georeference(ChipDetection(LaneLabel.LEFT_ONLY, (10, 10, 20, 20), 0.7), ChipPlan("t", 0, 0), transform)
    assert wd.bbox == WorldBox(1005, 1990, 1010, 1995)
    assert wd.source == Source("t", 0, 0)


def test_georeference_shifted_window(transform):
    a = georeference(ChipDetection(LaneLabel.CENTER, (10, 10, 20, 20), 0.7), ChipPlan("t", 0, 0), transform)
    b = georeference(ChipDetection(LaneLabel.CENTER, (10, 10, 20, 20), 0.7), ChipPlan("t", 0, 128), transform)
    assert b.bbox.min_x - a.bbox.min_x == 64
    assert b.bbox.min_y == a.bbox.min_y


def test_georeference_inverse(transform):
    rng = random.Random(5)
    for _ in range(200):
        plan = ChipPlan("t", rng.choice([0, 128, 9744]), rng.choice([0, 256, 1792]))
        x1, y1 = rng.uniform(0, 200), rng.uniform(0, 200)
        bbox = (x1, y1, x1 + rng.uniform(1, 56), y1 + rng.uniform(1, 56))
        wd = georeference(ChipDetection(LaneLabel.LEFT_ONLY, bbox, 0.5), plan, transform)
        c1, r1 = world_to_pixel(WorldPoint(wd.bbox.min_x, wd.bbox.max_y), transform)
        c2, r2 = world_to_pixel(WorldPoint(wd.bbox.max_x, wd.bbox.min_y), transform)
        got = (c1 - plan.window_col, r1 - plan.window_row, c2 - plan.window_col, r2 - plan.window_row)
        assert got == pytest.approx(bbox, abs=1e-6)


def test_georeference_rejects_out_of_window(transform):
    with pytest.raises(InputError):
        georeference(ChipDetection(LaneLabel.LEFT_ONLY, (250, 0, 260, 5), 0.7), ChipPlan("t", 0, 0), transform)


def test_world_detection_validation():
    with pytest.raises(InputError):
        det(LaneLabel.LEFT_ONLY, (0, 0, 0, 5), 0.5)
    with pytest.raises(InputError):
        det(LaneLabel.LEFT_ONLY, (0, 0, 1, 1), 0.01)


def test_identical_boxes_keep_higher_confidence():
    a = det(LaneLabel.LEFT_ONLY, (0, 0, 10, 10), 0.9)
    b = det(LaneLabel.LEFT_ONLY, (0, 0, 10, 10), 0.8, Source("t", 128, 0))
    assert dedup([b, a]) == [a]


def test_dedup_is_class_aware():
    a = det(LaneLabel.LEFT_ONLY, (0, 0, 10, 10), 0.9)
    b = det(LaneLabel.RIGHT_ONLY, (0, 0, 10, 10), 0.8)
    assert dedup([a, b]) == [a, b]


def test_dedup_floor_is_inclusive_for_survival():
    a = det(LaneLabel.CENTER, (0, 0, 10, 10), 0.9)
    # overlap 2/18 > 0.1 is suppressed, 1/19 is kept
    assert dedup([a, det(LaneLabel.CENTER, (8, 0, 18, 10), 0.5)]) == [a]
    far = det(LaneLabel.CENTER, (9, 0, 19, 10), 0.5)
    assert dedup([a, far]) == [a, far]


def test_dedup_matches_oracle():
    rng = random.Random(11)
    for _ in range(20):
        ds = random_detections(rng, 200)
        got = dedup(ds)
        items = [(d.sort_key(), int(d.label), d.bbox.as_tuple()) for d in ds]
        want = [ds[i] for i in greedy_nms(items, 0.10)]
        assert got == want


@settings(max_examples=50)
@given(st.integers(0, 10**6), st.integers(0, 80))
def test_dedup_postcondition_idempotent_order_free(seed, n):
    rng = random.Random(seed)
    ds = random_detections(rng, n, span=80)
    out = dedup(ds)
    for i, a in enumerate(out):
        for b in out[i + 1:]:
            if a.label == b.label:
                assert box_iou(a.bbox.as_tuple(), b.bbox.as_tuple()) <= 0.10 + 1e-12
    assert dedup(out) == out
    shuffled = ds[:]
    rng.shuffle(shuffled)
    assert dedup(shuffled) == out


def test_dedup_alternative_method_and_validation():
    a = det(LaneLabel.CENTER, (0, 0, 10, 10), 0.9)
    inner = det(LaneLabel.CENTER, (2, 2, 4, 4), 0.5)
    assert overlap_ratio(a.bbox, inner.bbox) <= 0.10
    assert dedup([a, inner]) == [a, inner]
    assert dedup([a, inner], method="min") == [a]
    with pytest.raises(InputError):
        dedup([a], overlap_floor=0)


def test_to_points_uses_box_center():
    (p,) = to_points([det(LaneLabel.RIGHT_ONLY, (10, 20, 14, 30), 0.4)])
    assert p.location == WorldPoint(12, 25)
    assert p.label == LaneLabel.RIGHT_ONLY and p.confidence == 0.4


def test_geojson_round_trip(tmp_path):
    ds = random_detections(random.Random(2), 30)
    fileio.dump_geojson(tmp_path / "d.geojson", [detection_feature(d) for d in ds])
    assert detections_from_features(fileio.load_features(tmp_path / "d.geojson")) == ds
    pts = to_points(ds)
    fileio.dump_geojson(tmp_path / "p.geojson", [point_feature(p) for p in pts])
    back = points_from_features(fileio.load_features(tmp_path / "p.geojson"))
    assert back == pts
    assert all(isinstance(p, DetectionPoint) for p in back)
