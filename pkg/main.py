#!/usr/bin/env python3
"""SheetLoc command line: synthetic data, refinement, matching, calibration, benchmarks, pipelines.

Exit codes: 0 when a match reaches min_score (or a non-matching command succeeds),
2 when no match does, 1 on any error.
"""

import argparse
import json
import os
import sys
from typing import List, Optional

import config
from bench import bench, format_table
from calib.beacons import BeaconPlate, detect_beacons
from calib.hand_eye import HandEyeSample, hand_eye_calibrate_detailed
from calib.plate_pose import beacon_depths, plate_pose, scene_frame_from_plate
from calib.session import load_session, save_session
from date_utils import DateUtils
from error_logger import log_error, log_info
from errors import ConfigValidationError, ParseError, SheetLocError
from export_data import export_bench
from geom.image_io import read_depth_image
from geom.ply_io import write_ply
from geom.transforms import RigidTransform
from match3d.registry import builtin_models, load_model_registry
from pipeline_runner import PipelineConfig, load_input, load_pipeline_config, run_pipeline
from report_manager import PoseReport
from stages import PipelineContext, describe_stages, run_stage
from synth.dataset import ARCHETYPES, generate_dataset
from synth.scan_report import scan_pose_report
from synth.scene_spec import NoiseSpec, load_scene_spec
from synth.scenes import DEFAULT_NOISE

REFINE_STAGES = ("z_band", "intensity", "normal_direction", "crop", "voxel", "outliers",
                 "background", "plane_removal", "normals")


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        log_error(f"Invalid JSON in {path}", e)
        raise ParseError(f"{path}: invalid JSON: {e.msg}", e.lineno)


def _write_json(path, data):
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)


def _read_transform(path):
    """4x4 row-major matrix from a JSON file: a bare matrix or {"matrix": ...}."""
    data = _read_json(path)
    if isinstance(data, dict):
        data = data.get("matrix", data.get("scene_frame"))
    return RigidTransform.from_list(data)


def _print_report(report: PoseReport):
    for entry in report.inputs:
        print(f"{entry.input}: {len(entry.results)} hypotheses, {entry.duration:.3f} s")
        for result in entry.results:
            t = result.pose.translation
            flag = "" if result.score >= report.min_score else "  (below min_score)"
            print(f"  {result.model_id:<12} score {result.score:.3f}  "
                  f"t = ({t[0]:.2f}, {t[1]:.2f}, {t[2]:.2f}) mm{flag}")
    if not report.found:
        print(config.Messages.NO_MATCH.format(min_score=report.min_score))


# ---------------------------------------------------------------- synth

def cmd_synth(args):
    noise = NoiseSpec(args.sigma, args.dropout, args.ghost_rate) if args.sigma is not None else None
    options = {"noise": noise, "height": args.height}
    if args.archetype != "stacked":
        options["tilt_deg"] = args.tilt
    model_id = None if args.model == "random" else args.model
    models = load_model_registry(args.models) if args.models else None
    written = generate_dataset(args.out, args.count, args.archetype, args.seed, model_id, models, **options)
    for paths in written:
        print(paths["cloud"])
    if args.scan_report:
        for paths in written:
            spec = load_scene_spec(paths["scene"])
            for entry in scan_pose_report(spec, models):
                print(f"{os.path.basename(paths['scene'])}: {entry['model_id']} in_range={entry['in_range']} "
                      f"visibility={entry['visibility']:.3f} density={entry['pixel_density']:.4f} px/mm^2")
    return config.Pipeline.EXIT_FOUND


# ---------------------------------------------------------------- refine

def _refine_stages(args):
    if args.stages:
        entries = _read_json(args.stages)
        if isinstance(entries, dict):
            entries = entries.get("stages", [])
    else:
        entries = []
        if args.z_band:
            entries.append({"stage": "z_band", "params": {"z_min": args.z_band[0], "z_max": args.z_band[1]}})
        if args.remove_planes:
            entries.append({"stage": "plane_removal", "params": {"remove_dist": args.remove_planes}})
        if args.outliers:
            entries.append({"stage": "outliers"})
        if args.voxel:
            entries.append({"stage": "voxel", "params": {"cell": args.voxel}})
    for entry in entries:
        name = entry.get("stage") if isinstance(entry, dict) else None
        if name not in REFINE_STAGES:
            raise ConfigValidationError(f"'{name}' is not a refinement stage", name)
    return entries


def cmd_refine(args):
    entries = _refine_stages(args)
    if not entries:
        raise ConfigValidationError(config.Messages.CONFIG_MISSING_FIELD.format(field="stages"))
    data = {"stages": entries, "inputs": [args.input], "seed": args.seed}
    if args.scene_frame:
        data["scene_frame"] = _read_transform(args.scene_frame).to_list()
    cfg = PipelineConfig.from_dict(data)
    cloud, depth_image, _ = load_input(args.input)
    frame = cfg.scene_frame
    if frame is None:
        frame = depth_image.cam_pose.inverse() if depth_image is not None and depth_image.cam_pose is not None \
            else RigidTransform.identity()
    ctx = PipelineContext(cloud, frame, builtin_models(), cfg.seed, depth_image=depth_image)
    for stage in cfg.stages:
        run_stage(ctx, stage.name, stage.params)
    for report in ctx.filters:
        print(f"{report.name:<18} {report.points_in:>8} -> {report.points_out:>8}  {report.duration:.3f} s")
    write_ply(ctx.cloud, args.output)
    print(f"{len(ctx.cloud)} points written to {args.output}")
    return config.Pipeline.EXIT_FOUND


# ---------------------------------------------------------------- match

def _match_config(args, stages):
    data = {"stages": stages, "inputs": [args.input], "seed": args.seed, "name": f"match {args.kind}"}
    if args.min_score is not None:
        data["min_score"] = args.min_score
    if args.models:
        data["models"] = args.models
    if args.report:
        data["output"] = args.report
    if args.scene_frame:
        data["scene_frame"] = _read_transform(args.scene_frame).to_list()
    return PipelineConfig.from_dict(data)


def cmd_match(args):
    model_ids = args.model or None
    stages = []
    if args.z_band:
        stages.append({"stage": "z_band", "params": {"z_min": args.z_band[0], "z_max": args.z_band[1]}})
    if args.kind == "surface":
        if args.remove_planes:
            stages.append({"stage": "plane_removal", "params": {"remove_dist": args.remove_planes}})
        stages.append({"stage": "normals"})
        stages.append({"stage": "surface_match", "params": {"models": model_ids}})
        if not args.no_icp:
            stages.append({"stage": "icp"})
    else:
        stages.append({"stage": "contrast_image", "params": {"mm_per_px": args.mm_per_px}})
        stages.append({"stage": "shape_match", "params": {"models": model_ids, "recognize": args.recognize}})
    report = run_pipeline(_match_config(args, stages))
    _print_report(report)
    return report.exit_code()


# ---------------------------------------------------------------- calibrate

def _load_plate(args):
    if args.plate:
        return BeaconPlate.from_dict(_read_json(args.plate))
    if args.session and os.path.exists(args.session):
        _, _, plate = load_session(args.session)
        if plate is not None:
            return plate
    raise ConfigValidationError("a beacon plate is required (--plate or a session holding one)")


def cmd_calibrate_detect(args):
    plate = _load_plate(args)
    img = read_depth_image(args.image)
    centroids = detect_beacons(img, plate, args.threshold)
    depths = beacon_depths(read_depth_image(args.depth), centroids) if args.depth else None
    cam_H_cal = plate_pose(centroids, plate, img.camera, depths)
    cal_H_scene = _read_transform(args.cal_H_scene) if args.cal_H_scene else RigidTransform.identity()
    cam_H_scene = scene_frame_from_plate(cam_H_cal, cal_H_scene)
    for k, (u, v) in enumerate(centroids):
        print(f"beacon {k}: ({u:.2f}, {v:.2f}) px")
    print(f"cam_H_cal translation: {cam_H_cal.translation.round(3).tolist()} mm")

    if args.out:
        _write_json(args.out, {"cam_H_cal": cam_H_cal.to_list(), "scene_frame": cam_H_scene.to_list(),
                               "centroids": centroids.tolist(), "plate": plate.to_dict()})
        log_info(f"Plate pose written: {args.out}")

    if args.session and args.robot_pose:
        samples, result, _ = load_session(args.session) if os.path.exists(args.session) else ([], None, None)
        samples.append(HandEyeSample(_read_transform(args.robot_pose), cam_H_cal, DateUtils.now_iso()))
        save_session(args.session, samples, result, plate)
        print(f"session {args.session}: {len(samples)} samples")
    return config.Pipeline.EXIT_FOUND


def cmd_calibrate_handeye(args):
    samples, _, plate = load_session(args.session)
    result = hand_eye_calibrate_detailed(samples, args.min_samples)
    save_session(args.out or args.session, samples, result, plate)
    print(f"tool_H_cam translation: {result.tool_H_cam.translation.round(3).tolist()} mm")
    print(f"base_H_cal translation: {result.base_H_cal.translation.round(3).tolist()} mm")
    print(f"residual: {result.residual:.4f} mm over {len(samples)} samples")
    return config.Pipeline.EXIT_FOUND


# ---------------------------------------------------------------- bench / pipeline

def cmd_bench(args):
    configs = [load_pipeline_config(path) for path in args.configs]
    labels = args.labels or [c.name or os.path.splitext(os.path.basename(p))[0]
                             for c, p in zip(configs, args.configs)]
    rows = bench(configs, args.repetitions, labels, args.inputs or None)
    print(format_table(rows))
    formats = [f.strip().lower() for f in args.formats.split(",") if f.strip()] if args.formats is not None else None
    for path in export_bench(rows, args.title, formats, args.out):
        print(path)
    return config.Pipeline.EXIT_FOUND


def cmd_pipeline_run(args):
    cfg = load_pipeline_config(args.config)
    if args.output:
        cfg = cfg.with_inputs(cfg.inputs, args.output)
    report = run_pipeline(cfg)
    _print_report(report)
    return report.exit_code()


def cmd_pipeline_stages(args):
    print(describe_stages())
    return config.Pipeline.EXIT_FOUND


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sheetloc", description=f"{config.App.NAME}: {config.App.TAGLINE}",
                                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.App.version()}")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("synth", help="render synthetic scenes with ground truth", formatter_class=fmt)
    p.add_argument("--archetype", choices=sorted(ARCHETYPES), default="framed_pallet")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", default="plate", help="model id, or 'random'")
    p.add_argument("--models", help="model registry JSON (built-in models when omitted)")
    p.add_argument("--out", default="scenes")
    p.add_argument("--sigma", type=float, default=None,
                   help=f"depth noise in mm (archetype default {DEFAULT_NOISE.depth_sigma})")
    p.add_argument("--dropout", type=float, default=DEFAULT_NOISE.dropout_rate)
    p.add_argument("--ghost-rate", type=float, default=DEFAULT_NOISE.ghost_rate)
    p.add_argument("--height", type=float, default=800.0, help="camera height above the support, mm")
    p.add_argument("--tilt", type=float, default=0.0, help="camera tilt about scene x, degrees")
    p.add_argument("--scan-report", action="store_true", help="print range/visibility checks per part")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("refine", help="run refinement stages and write the cleaned cloud", formatter_class=fmt)
    p.add_argument("input", help="PLY cloud or depth PGM")
    p.add_argument("output", help="PLY to write")
    p.add_argument("--stages", help="JSON list of stage entries (overrides the quick flags)")
    p.add_argument("--z-band", type=float, nargs=2, metavar=("Z_MIN", "Z_MAX"))
    p.add_argument("--remove-planes", type=float, metavar="DIST", help="plane removal distance, mm")
    p.add_argument("--outliers", action="store_true")
    p.add_argument("--voxel", type=float, metavar="CELL")
    p.add_argument("--scene-frame", help="JSON 4x4 cam_H_scene")
    p.add_argument("--seed", type=int, default=config.Ransac.SEED)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("match", help="locate parts by surface or shape matching", formatter_class=fmt)
    p.add_argument("kind", choices=["surface", "shape"])
    p.add_argument("input", help="PLY cloud or depth PGM")
    p.add_argument("--model", action="append", help="model id to search (repeatable; all when omitted)")
    p.add_argument("--models", help="model registry JSON")
    p.add_argument("--min-score", type=float, default=None, help="default from settings.ini")
    p.add_argument("--report", help="pose report JSON to write")
    p.add_argument("--scene-frame", help="JSON 4x4 cam_H_scene")
    p.add_argument("--z-band", type=float, nargs=2, metavar=("Z_MIN", "Z_MAX"))
    p.add_argument("--remove-planes", type=float, metavar="DIST")
    p.add_argument("--no-icp", action="store_true")
    p.add_argument("--mm-per-px", type=float, default=config.Shape.MM_PER_PX)
    p.add_argument("--recognize", action="store_true", help="report only the best model")
    p.add_argument("--seed", type=int, default=config.Ransac.SEED)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("calibrate", help="beacon-plate detection and hand-eye calibration")
    calib_sub = p.add_subparsers(dest="calib_command", required=True)
    d = calib_sub.add_parser("detect", help="plate pose from a beacon capture", formatter_class=fmt)
    d.add_argument("image", help="intensity PGM with camera model")
    d.add_argument("--plate", help="beacon plate JSON")
    d.add_argument("--depth", help="depth PGM of the same capture")
    d.add_argument("--threshold", type=float, default=None, help="relative blob threshold")
    d.add_argument("--cal-H-scene", dest="cal_H_scene", help="JSON 4x4 scene frame in plate coordinates")
    d.add_argument("--out", help="JSON with cam_H_cal and scene_frame")
    d.add_argument("--session", help="calibration session to append a sample to")
    d.add_argument("--robot-pose", help="JSON 4x4 base_H_tool at capture time")
    d.set_defaults(func=cmd_calibrate_detect)
    h = calib_sub.add_parser("handeye", help="solve tool_H_cam and base_H_cal", formatter_class=fmt)
    h.add_argument("session")
    h.add_argument("--out", help="session file to write (default: update in place)")
    h.add_argument("--min-samples", type=int, default=config.HandEye.MIN_SAMPLES)
    h.set_defaults(func=cmd_calibrate_handeye)

    p = sub.add_parser("bench", help="time pipeline configs (mean +/- SEM)", formatter_class=fmt)
    p.add_argument("configs", nargs="+", help="pipeline config JSON files")
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--inputs", nargs="+", help="inputs replacing every config's own")
    p.add_argument("--labels", nargs="+")
    p.add_argument("--title", default="bench")
    p.add_argument("--out", help="export folder (default from settings.ini)")
    p.add_argument("--formats", help="extra formats besides CSV, e.g. excel,pdf (default from settings.ini)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("pipeline", help="declarative pipelines")
    pipe_sub = p.add_subparsers(dest="pipeline_command", required=True)
    r = pipe_sub.add_parser("run", help="run a JSON pipeline config", formatter_class=fmt)
    r.add_argument("config")
    r.add_argument("--output", help="report path overriding the config's")
    r.set_defaults(func=cmd_pipeline_run)
    s = pipe_sub.add_parser("stages", help="list stages with parameters and defaults")
    s.set_defaults(func=cmd_pipeline_stages)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigValidationError as e:
        where = f" (stage '{e.stage}')" if e.stage else ""
        log_error(f"Invalid configuration{where}: {e}")
        print(f"error: {e}", file=sys.stderr)
    except (SheetLocError, OSError) as e:
        log_error(f"{args.command} failed", e)
        print(f"error: {e}", file=sys.stderr)
    except Exception as e:
        log_error(f"Unexpected error in {args.command}", e)
        print(f"error: unexpected {type(e).__name__}: {e}", file=sys.stderr)
    return config.Pipeline.EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
