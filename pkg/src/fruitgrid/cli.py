"""Command-line front door.

Subcommands wire the pipeline end to end:

  synth      render scene bundles (PNG + ground-truth JSON) per seed,
             with and without background disturbances
  calibrate  estimate the pixel->world homography and write the
             calibration file
  eval       run a detector over scene bundles, match against ground
             truth, and write reports plus the raw pair dump
  report     re-render a JSON metrics report as table or CSV

Exit codes: 0 success, 2 usage, 3 validation/precondition,
4 backend protocol, 5 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .detect import (
    BackendHandle,
    ClassMap,
    DEFAULT_CONFIDENCE_THRESHOLD,
    DetectionRequest,
    detect_external,
    detect_hsv,
)
from .errors import (
    BackendError,
    DegenerateConfiguration,
    EmptyInput,
    FruitGridError,
    GridTooSmall,
    InsufficientCorrespondences,
)
from .evaluate import (
    DEFAULT_MATCH_THRESHOLD_CM,
    MetricsReport,
    MetricsRow,
    aggregate_metrics,
    emit_report,
    frame_records,
    match_detections,
    write_pair_dump,
)
from .geometry import (
    Correspondence,
    PixelPoint,
    WorldPoint,
    estimate_homography,
    read_calibration,
    reprojection_error,
    write_calibration,
)
from .hsv import DEFAULT_FRUIT_RANGES, load_hsv_ranges
from .synth import (
    ClutterConfig,
    DisturbanceConfig,
    SceneConfig,
    ShadowConfig,
    generate_pattern,
    grid_correspondences,
    read_scene_image,
    read_scene_truth,
    render_scene,
    write_scene_bundle,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_BACKEND = 4
EXIT_IO = 5

# Qualitative stand-ins for the benchmark's lighting conditions; tunable,
# never claimed to match any physical illuminance.
PRESETS = {
    "indoor": DisturbanceConfig(),
    "shaded": DisturbanceConfig(lighting_gain=0.7, gamma=0.9),
    "direct_sun": DisturbanceConfig(
        lighting_gain=1.6,
        gamma=1.2,
        shadow=ShadowConfig(enabled=True, direction_deg=35.0, opacity=0.5),
    ),
}

# "With disturbances" layers clutter and per-fruit colour drift on top of
# any lighting preset.
DISTURBED_CLUTTER = ClutterConfig(leaf_count=25)
DISTURBED_COLOUR_JITTER = (0.0, 18.0)


def with_disturbances(base: DisturbanceConfig) -> DisturbanceConfig:
    return replace(base, clutter=DISTURBED_CLUTTER, colour_jitter_deg=DISTURBED_COLOUR_JITTER)


def resolve_preset(name_or_path: str) -> tuple[str, DisturbanceConfig]:
    if name_or_path in PRESETS:
        return name_or_path, PRESETS[name_or_path]
    path = Path(name_or_path)
    if not path.exists():
        raise ValueError(
            f"unknown preset {name_or_path!r} (expected one of {sorted(PRESETS)} or a file path)"
        )
    doc = json.loads(path.read_text(encoding="utf-8"))
    return path.stem, DisturbanceConfig.from_dict(doc)


def _parse_seeds(values) -> list[int]:
    seeds: list[int] = []
    for value in values or []:
        for part in str(value).split(","):
            part = part.strip()
            if part:
                seeds.append(int(part))
    return seeds


def bundle_name(preset: str, seed: int, disturbed: bool) -> str:
    return f"{preset}-{seed:04d}-{'dist' if disturbed else 'clean'}"


def parse_bundle_name(name: str) -> tuple[str, int, bool]:
    preset, seed, variant = name.rsplit("-", 2)
    return preset, int(seed), variant == "dist"


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    cfg = SceneConfig()
    if args.config:
        cfg = SceneConfig.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    preset_name, base_dist = resolve_preset(args.preset)
    seeds = _parse_seeds(args.seed)
    if not seeds:
        print("synth: at least one --seed is required", file=sys.stderr)
        return EXIT_VALIDATION
    out_dir = Path(args.out)
    bundles = []
    for seed in seeds:
        scene_cfg = cfg.with_seed(seed)
        fruits = generate_pattern(scene_cfg)
        for disturbed in (False, True):
            dist = with_disturbances(base_dist) if disturbed else base_dist
            image, truth = render_scene(scene_cfg, fruits, dist)
            name = bundle_name(preset_name, seed, disturbed)
            entry = write_scene_bundle(out_dir, name, image, truth)
            entry.update({"preset": preset_name, "seed": seed, "disturbed": disturbed})
            bundles.append(entry)
    manifest = {
        "schema_version": 1,
        "preset": preset_name,
        "scene_config": cfg.to_dict(),
        "seeds": seeds,
        "bundles": bundles,
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (out_dir / f"manifest-{preset_name}.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------- calibrate

def _correspondences_from_file(path: Path) -> list[Correspondence]:
    doc = json.loads(path.read_text(encoding="utf-8"))
    return [
        Correspondence(
            PixelPoint(float(c["pixel"][0]), float(c["pixel"][1])),
            WorldPoint(float(c["world_cm"][0]), float(c["world_cm"][1])),
        )
        for c in doc
    ]


def cmd_calibrate(args) -> int:
    corrs: list[Correspondence] = []
    if args.scene_config is not None:
        doc = json.loads(Path(args.scene_config).read_text(encoding="utf-8"))
        corrs += grid_correspondences(SceneConfig.from_dict(doc))
    if args.correspondences:
        corrs += _correspondences_from_file(Path(args.correspondences))
    for truth_path in args.truth or []:
        truth = read_scene_truth(truth_path)
        corrs += [Correspondence(f.pixel, f.world) for f in truth.fruits]
    if not corrs and args.grid_defaults:
        corrs = grid_correspondences(SceneConfig())
    if not corrs:
        print("calibrate: no correspondences given", file=sys.stderr)
        return EXIT_VALIDATION
    h = estimate_homography(corrs)
    rms = reprojection_error(h, corrs)
    write_calibration(args.out, h, rms)
    print(f"calibrated from {len(corrs)} correspondences, rms {rms:.3e} cm -> {args.out}")
    return EXIT_OK


# ------------------------------------------------------------------ eval

def _discover_bundles(scenes_dir: Path):
    bundles = []
    for truth_path in sorted(scenes_dir.glob("*.truth.json")):
        name = truth_path.name[: -len(".truth.json")]
        png_path = truth_path.with_name(name + ".png")
        if not png_path.exists():
            raise FileNotFoundError(f"missing image for bundle {name!r}: {png_path}")
        bundles.append((name, png_path, truth_path))
    return bundles


def cmd_eval(args) -> int:
    scenes_dir = Path(args.scenes)
    bundles = _discover_bundles(scenes_dir)
    if not bundles:
        print(f"eval: no scene bundles in {scenes_dir}", file=sys.stderr)
        return EXIT_IO
    homography, _ = read_calibration(args.calibration)
    ranges = load_hsv_ranges(args.hsv_ranges) if args.hsv_ranges else list(DEFAULT_FRUIT_RANGES)
    class_map = ClassMap(
        json.loads(Path(args.class_map).read_text(encoding="utf-8")) if args.class_map else None
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    backend = None
    if args.detector != "hsv":
        backend = BackendHandle(args.detector)
    frames = []
    records = []
    try:
        for name, png_path, truth_path in bundles:
            truth = read_scene_truth(truth_path)
            if args.detector == "hsv":
                detections = detect_hsv(read_scene_image(png_path), ranges)
            else:
                try:
                    detections = detect_external(
                        backend,
                        DetectionRequest(frame_id=name, image_path=str(png_path.resolve())),
                        class_map,
                        timeout=args.timeout_s,
                        confidence_threshold=args.confidence_threshold,
                    )
                except BackendError as exc:
                    raise BackendError(f"frame {name!r}: {exc}") from exc
            result = match_detections(truth, detections, homography, args.threshold_cm)
            preset, _, disturbed = parse_bundle_name(name)
            frames.append((preset, disturbed, result))
            records.extend(frame_records(name, result))
    finally:
        if backend is not None:
            backend.close()

    report = aggregate_metrics(frames)
    (out_dir / "report.json").write_text(emit_report(report, "json"), encoding="utf-8")
    (out_dir / "report.csv").write_text(emit_report(report, "csv"), encoding="utf-8")
    table = emit_report(report, "table")
    (out_dir / "report.txt").write_text(table, encoding="utf-8")
    write_pair_dump(out_dir / "pairs.jsonl", records)
    sys.stdout.write(table)
    return EXIT_OK


# ---------------------------------------------------------------- report

def _report_from_json(doc: dict) -> MetricsReport:
    rows = tuple(
        MetricsRow(
            crop=r["crop"],
            condition=r["condition"],
            disturbed=r["disturbances"] == "with",
            x_mean_cm=r["x_mean_cm"],
            y_mean_cm=r["y_mean_cm"],
            detection_pct=r["detection_pct"],
            n_patterns=r["n_patterns"],
            n_fruits=r["n_fruits"],
            n_ghosts=r.get("n_ghosts", 0),
        )
        for r in doc["rows"]
    )
    return MetricsReport(rows=rows)


def cmd_report(args) -> int:
    doc = json.loads(Path(args.metrics).read_text(encoding="utf-8"))
    if doc.get("schema_version") != 1:
        print(f"report: unsupported schema_version {doc.get('schema_version')!r}", file=sys.stderr)
        return EXIT_VALIDATION
    rendered = emit_report(_report_from_json(doc), args.format)
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
    sys.stdout.write(rendered)
    return EXIT_OK


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fruitgrid",
        description="Fruit detection and localisation benchmark pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="render synthetic scene bundles")
    p_synth.add_argument("--config", help="scene config JSON (defaults when omitted)")
    p_synth.add_argument(
        "--preset", default="indoor", help="indoor | shaded | direct_sun | path to custom JSON"
    )
    p_synth.add_argument("--seed", action="append", help="seed (repeatable, comma lists allowed)")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.set_defaults(func=cmd_synth)

    p_cal = sub.add_parser("calibrate", help="estimate the pixel->world homography")
    p_cal.add_argument("--scene-config", help="scene config JSON; uses its grid holes")
    p_cal.add_argument("--correspondences", help="JSON list of {pixel, world_cm} pairs")
    p_cal.add_argument("--truth", action="append", help="scene truth JSON (fruit centres)")
    p_cal.add_argument(
        "--grid-defaults",
        action="store_true",
        help="fall back to the default scene grid when no source is given",
    )
    p_cal.add_argument("--out", required=True, help="calibration JSON path")
    p_cal.set_defaults(func=cmd_calibrate)

    p_eval = sub.add_parser("eval", help="run a detector over bundles and score it")
    p_eval.add_argument("--scenes", required=True, help="directory of scene bundles")
    p_eval.add_argument("--calibration", required=True, help="calibration JSON path")
    p_eval.add_argument(
        "--detector",
        default="hsv",
        help='"hsv" or an external detector command line (wire protocol over stdio)',
    )
    p_eval.add_argument("--hsv-ranges", help="HSV range config JSON")
    p_eval.add_argument("--class-map", help="JSON object mapping backend class names to labels")
    p_eval.add_argument(
        "--threshold-cm", type=float, default=DEFAULT_MATCH_THRESHOLD_CM,
        help="match threshold in cm",
    )
    p_eval.add_argument(
        "--confidence-threshold", type=float, default=DEFAULT_CONFIDENCE_THRESHOLD,
        help="drop external boxes below this confidence",
    )
    p_eval.add_argument("--timeout-s", type=float, default=30.0, help="backend response timeout")
    p_eval.add_argument("--out", required=True, help="output directory for reports")
    p_eval.set_defaults(func=cmd_eval)

    p_rep = sub.add_parser("report", help="re-render a JSON metrics report")
    p_rep.add_argument("--metrics", required=True, help="report.json produced by eval")
    p_rep.add_argument("--format", default="table", choices=("table", "json", "csv"))
    p_rep.add_argument("--out", help="optional output file")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InsufficientCorrespondences, DegenerateConfiguration, GridTooSmall, EmptyInput) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BackendError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ValueError, KeyError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FruitGridError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
