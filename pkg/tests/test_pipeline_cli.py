import json

import numpy as np
import pytest

from turnlane import fileio
from turnlane.cli import main
from turnlane.config import PipelineConfig
from turnlane.detector import CallableDetector
from turnlane.geo import GeoTransform
from turnlane.pipeline import run_pipeline
from turnlane.synthetic import planted_scene

OUTPUTS = ("masked_manifest.csv", "chips_manifest.csv", "detections_raw.geojson", "detections.geojson",
           "detections.csv", "points.geojson", "points.csv", "inventory.geojson", "inventory.csv",
           "count_table.csv", "metrics.csv", "circus.csv", "run_manifest.json")


@pytest.fixture(scope="module")
def scene_paths(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    scene = planted_scene(seed=3, size=512, n_plants=12)
    tiles, lines, gt = scene.write(d)
    return scene, tiles, lines, gt


def args(scene_paths, out, *extra):
    _, tiles, lines, gt = scene_paths
    return ["--tiles", str(tiles), "--centerlines", str(lines), "--gt", str(gt), "--out", str(out), *extra]


def test_run_writes_everything(scene_paths, tmp_path):
    scene = scene_paths[0]
    assert main(["run", *args(scene_paths, tmp_path)]) == 0
    for name in OUTPUTS:
        assert (tmp_path / name).exists(), name
    pts = fileio.load_features(tmp_path / "points.geojson")
    assert len(pts) == len(scene.plants)
    summary = json.loads((tmp_path / "run_manifest.json").read_text())
    assert summary["points"] == len(scene.plants) and summary["unclassified"] == 0
    circus = (tmp_path / "circus.csv").read_text().splitlines()
    assert len(circus) == 16
    assert all(line.split(",")[5] == "0" for line in circus[1:] if line.split(",")[2] == "5")  # no misses


def test_stages_one_by_one_match_run(scene_paths, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", *args(scene_paths, a)]) == 0
    for stage in ("mask", "chips", "detect", "dedup", "points", "report", "eval"):
        assert main([stage, *args(scene_paths, b)]) == 0, stage
    for name in OUTPUTS[:-1]:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_rerun_is_byte_identical(scene_paths, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", *args(scene_paths, a)]) == 0
    assert main(["run", *args(scene_paths, b)]) == 0
    for name in OUTPUTS:
        if name == "run_manifest.json":
            continue  # records its own output path
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_threads_do_not_change_output(scene_paths, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", *args(scene_paths, a)]) == 0
    assert main(["run", *args(scene_paths, b, "--threads", "4")]) == 0
    for name in ("detections_raw.csv", "detections.csv", "inventory.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_overlapping_windows_produce_duplicates_before_dedup(scene_paths, tmp_path):
    scene = scene_paths[0]
    assert main(["run", *args(scene_paths, tmp_path)]) == 0
    raw = fileio.load_features(tmp_path / "detections_raw.geojson")
    assert len(raw) > len(scene.plants)
    assert len(fileio.load_features(tmp_path / "points.geojson")) == len(scene.plants)


def test_overlap_floor_one_disables_dedup(scene_paths, tmp_path):
    scene = scene_paths[0]
    assert main(["run", *args(scene_paths, tmp_path, "--overlap-floor", "1.0")]) == 0
    raw = fileio.load_features(tmp_path / "detections_raw.geojson")
    pts = fileio.load_features(tmp_path / "points.geojson")
    assert len(pts) == len(raw) > len(scene.plants)


def test_dump_chips(scene_paths, tmp_path):
    assert main(["mask", *args(scene_paths, tmp_path)]) == 0
    assert main(["chips", *args(scene_paths, tmp_path, "--dump-chips")]) == 0
    rows = fileio.read_csv(tmp_path / "chips_manifest.csv")
    assert len(rows) == 9
    img = fileio.read_rgb(tmp_path / rows[0]["path"])
    assert img.shape == (368, 368, 3)


def test_masking_blanks_pixels_beyond_the_buffer(scene_paths, tmp_path):
    scene, tiles, _, _ = scene_paths
    state = scene.lines[0]
    only_state = tmp_path / "state.geojson"
    fileio.dump_geojson(only_state, [fileio.centerline_feature(state)])
    assert main(["mask", "--tiles", str(tiles), "--centerlines", str(only_state), "--out", str(tmp_path)]) == 0
    (row,) = fileio.read_csv(tmp_path / "masked_manifest.csv")
    masked = fileio.read_rgb(tmp_path / row["path"])
    road_row = round((scene.tile.transform.origin_y - state.vertices[0].y) / 0.5)
    # 100 ft is 200 px at this resolution
    assert (masked[road_row + 201:] == 0).all()
    assert masked[road_row + 199].any()
    assert int(row["retained_pixel_count"]) == 512 * (road_row + 200)


def test_empty_centerlines_give_empty_inventory(scene_paths, tmp_path):
    empty = tmp_path / "empty.geojson"
    fileio.dump_geojson(empty, [])
    _, tiles, _, _ = scene_paths
    out = tmp_path / "out"
    assert main(["run", "--tiles", str(tiles), "--centerlines", str(empty), "--out", str(out)]) == 0
    assert fileio.load_features(out / "inventory.geojson") == []
    rows = fileio.read_csv(out / "count_table.csv")
    assert len(rows) == 15 and all(r["Total"] == "0" for r in rows)


def test_far_tile_yields_no_work(tmp_path):
    tiles = tmp_path / "tiles"
    tiles.mkdir()
    fileio.write_rgb(tiles / "far.png", np.full((64, 64, 3), 90, np.uint8))
    fileio.write_world_file(tiles / "far.pgw", GeoTransform(0, 64, 1))
    lines = tmp_path / "c.geojson"
    fileio.dump_geojson(lines, [{"type": "Feature", "properties": {"road_system": "state"},
                                 "geometry": {"type": "LineString", "coordinates": [[1e4, 0], [2e4, 0]]}}])
    assert main(["run", "--tiles", str(tiles), "--centerlines", str(lines), "--out", str(tmp_path / "o")]) == 0
    assert fileio.read_csv(tmp_path / "o" / "masked_manifest.csv") == []


def test_exit_code_input_error(tmp_path, capsys):
    assert main(["run", "--tiles", str(tmp_path / "missing"), "--centerlines", str(tmp_path / "x.geojson"),
                 "--out", str(tmp_path)]) == 2
    assert main(["dedup", "--out", str(tmp_path / "fresh")]) == 2
    assert "input error" in capsys.readouterr().err


def test_exit_code_stage_failure(scene_paths, tmp_path, capsys):
    assert main(["mask", *args(scene_paths, tmp_path)]) == 0
    assert main(["chips", *args(scene_paths, tmp_path)]) == 0
    (row,) = fileio.read_csv(tmp_path / "masked_manifest.csv")
    (tmp_path / row["path"]).write_bytes(b"not a png")
    assert main(["detect", *args(scene_paths, tmp_path)]) == 3
    assert "[detect]" in capsys.readouterr().err


def test_external_detector_slot(scene_paths, tmp_path):
    def fn(pixels):
        return [("left_only", (100, 100, 120, 120), 0.9)]

    cfg = PipelineConfig(tiles=str(scene_paths[1]), centerlines=str(scene_paths[2]), out=str(tmp_path))
    art = run_pipeline(cfg, detector=CallableDetector(fn))
    # one box per window; overlapping windows do not overlap these boxes, so all survive
    assert len(art.raw_detections) == len(art.plans) == 9
    assert len(art.points) == 9


def test_templates_and_model_card_commands(tmp_path, capsys):
    assert main(["templates", str(tmp_path / "t")]) == 0
    assert sorted(p.name for p in (tmp_path / "t").glob("*.png")) == ["center.png", "left_only.png", "right_only.png"]
    assert main(["model-card"]) == 0
    assert json.loads(capsys.readouterr().out)["batch_size"] == 64


def test_export_training_command(scene_paths, tmp_path):
    scene = scene_paths[0]
    feats = []
    for p in scene.plants[:5]:
        h = p.size * 0.25
        c = p.center
        ring = [[c.x - h, c.y - h], [c.x + h, c.y - h], [c.x + h, c.y + h], [c.x - h, c.y + h], [c.x - h, c.y - h]]
        feats.append({"type": "Feature", "properties": {"label": p.label.slug},
                      "geometry": {"type": "Polygon", "coordinates": [ring]}})
    fileio.dump_geojson(tmp_path / "f.geojson", feats)
    out = tmp_path / "exp"
    with pytest.warns(UserWarning):
        code = main(["export-training", "--tiles", str(scene_paths[1]), "--features", str(tmp_path / "f.geojson"),
                     "--out", str(out), "--balance"])
    assert code == 0
    assert (out / "export_manifest.csv").exists()
    assert (out / "training_manifest.csv").read_text().startswith("chip_id,labels,split")
