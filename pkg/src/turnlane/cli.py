"""Command-line entry point: ``turnlane <stage> [options]``.

Exit codes: 0 success, 2 input error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import fileio, pipeline, trainprep
from .config import PipelineConfig
from .detector import ModelCard, default_templates, save_templates
from .geo import InputError, WorldBox
from .labels import LaneLabel, Schema

EXIT_OK, EXIT_INPUT, EXIT_STAGE = 0, 2, 3

STAGES = {
    "mask": pipeline.stage_mask,
    "chips": pipeline.stage_chips,
    "detect": pipeline.stage_detect,
    "dedup": pipeline.stage_dedup,
    "points": pipeline.stage_points,
    "eval": pipeline.stage_eval,
    "report": pipeline.stage_report,
}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--tiles", help="directory of PNG tiles with world files")
    p.add_argument("--centerlines", help="GeoJSON road centerlines")
    p.add_argument("--gt", help="GeoJSON ground-truth points")
    p.add_argument("--schema", type=int, choices=(4, 12))
    p.add_argument("--confidence-floor", type=float)
    p.add_argument("--overlap-floor", type=float)
    p.add_argument("--buffer-radius", type=float)
    p.add_argument("--score-floor", type=float, help="reference detector NCC floor")
    p.add_argument("--templates", help="directory of stencil PNG + JSON sidecars")
    p.add_argument("--dump-chips", action="store_true", default=None, help="write every chip as PNG")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="turnlane", description="Turning-lane marking inventory from aerial tiles.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    for name in (*STAGES, "run"):
        sub.add_parser(name, parents=[common], help=f"run the {name} stage" if name != "run" else "run every stage")

    t = sub.add_parser("templates", help="write the default arrow stencils")
    t.add_argument("directory")
    t.add_argument("--size", type=int, default=32)

    m = sub.add_parser("model-card", help="print the recorded training settings as JSON")
    m.add_argument("--out")

    e = sub.add_parser("export-training", parents=[common], help="export labeled VOC training chips")
    e.add_argument("--features", required=True, help="GeoJSON polygons with a label property")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--balance", action="store_true", help="duplicate rare classes up to the median count")
    return parser


def _config(args) -> PipelineConfig:
    return PipelineConfig.load(
        args.config,
        tiles=args.tiles, centerlines=args.centerlines, gt=args.gt, schema=args.schema,
        confidence_floor=args.confidence_floor, overlap_floor=args.overlap_floor,
        buffer_radius=args.buffer_radius, score_floor=args.score_floor, templates=args.templates,
        dump_chips=args.dump_chips, out=args.out, threads=args.threads,
    )


def _export_training(args, cfg: PipelineConfig) -> None:
    from .preprocess import scan_tiles

    tiles = [s.load() for s in scan_tiles(Path(pipeline._require(cfg, "tiles")))]
    feats = []
    for f in fileio.load_features(Path(args.features)):
        ring = f["geometry"]["coordinates"][0]
        xs, ys = [c[0] for c in ring], [c[1] for c in ring]
        props = f.get("properties") or {}
        feats.append(trainprep.LabeledFeature(LaneLabel.parse(props["label"]),
                                              WorldBox(min(xs), min(ys), max(xs), max(ys)),
                                              str(props.get("tile_id", ""))))
    result = trainprep.export_chips(tiles, feats, cfg.chip_size, cfg.stride)
    out = Path(cfg.out)
    trainprep.write_export(out, result)
    manifest = trainprep.build_manifest(result.chips, Schema.parse(cfg.schema), args.seed)
    if args.balance:
        manifest = trainprep.balance_classes(manifest)
    (out / "training_manifest.csv").write_text(trainprep.manifest_csv(manifest))
    print(f"{len(result.chips)} chips, {result.object_count} objects, "
          f"expansion factor {result.expansion_factor:.3f}, {len(result.warnings)} warnings")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "templates":
            save_templates(Path(args.directory), default_templates(size=args.size))
            return EXIT_OK
        if args.command == "model-card":
            text = ModelCard().to_json()
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
        cfg = _config(args)
        if args.command == "run":
            pipeline.run_pipeline(cfg)
        elif args.command == "export-training":
            _export_training(args, cfg)
        else:
            pipeline.run_stage(args.command, STAGES[args.command], cfg)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except pipeline.StageError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
