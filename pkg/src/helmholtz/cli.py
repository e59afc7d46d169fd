"""Command-line entry point: ``helmholtz <subcommand> [flags]``.

Subcommands read and write the sequence folder produced by ``synth`` (see
:mod:`helmholtz.data.sequence_io`), so the pipeline can be run step by step::

    helmholtz --config configs/occluded_floor.yaml synth --scene occluded_floor --out run/
    helmholtz sgm --data run/
    helmholtz landmarks --data run/
    helmholtz refine --data run/ --out-dir run/refined
    helmholtz eval --pred run/refined/depth.pfm --gt run/frames/frame_0001/depth_left.pfm \\
        --initial run/sgm/sgm_0001.pfm
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any

import numpy as np

from helmholtz.data.pfm import read_pfm, write_pfm
from helmholtz.data.png import write_mask_png, write_png8
from helmholtz.data.sequence_io import read_sequence, write_sequence
from helmholtz.data.trajectory import read_trajectory
from helmholtz.evaluation.evaluator import (
    DepthEvaluator,
    format_table,
    rows_from_reports,
    write_metrics_csv,
)
from helmholtz.geometry.camera import (
    DepthMap,
    StereoRig,
    depth_to_normalized_disparity,
)
from helmholtz.landmarks.features import TrackerParams
from helmholtz.landmarks.sparse import rasterize, read_landmarks, write_landmarks
from helmholtz.landmarks.tracking import Landmark, triangulate_and_track
from helmholtz.losses.pyramid import TripletView, build_pyramid, disparity_pyramid
from helmholtz.losses.total import LossWeights, total_loss
from helmholtz.models.channel_exchange import DEMO_BRANCHES, ExchangeConfig, exchange_demo
from helmholtz.simulation.pattern import (
    BlobPattern,
    PatternParams,
    extract_pattern,
    synthesize_wall_capture,
)
from helmholtz.simulation.scene import Scene, load_scene
from helmholtz.simulation.scenes import BUILTIN_SCENES, builtin_scene
from helmholtz.simulation.sequence import (
    FrameTriplet,
    SyntheticSequence,
    generate_sequence,
    linear_trajectory,
)
from helmholtz.stereo.sgm import SgmParams, nearest_fill, sgm_depth
from helmholtz.trainers.ablation import DEFAULT_VARIANTS, run_ablation
from helmholtz.trainers.refiner import DepthRefiner
from helmholtz.utils.config import (
    get_section,
    load_config,
    load_json_overrides,
    merge_overrides,
    save_config,
)
from helmholtz.utils.logging import get_logger, log_stage, setup_logging

logger = get_logger(__name__)

DEFAULT_TRAJECTORY = {"start": [0.0, 0.0, 0.0], "target": [0.0, 0.0, 1.0], "step": [0.02, 0.0, 0.0]}


def resolve_scene(name_or_path: str) -> Scene:
    """A scene JSON file, or the name of a built-in scene."""
    if Path(name_or_path).is_file():
        return load_scene(name_or_path)
    if name_or_path in BUILTIN_SCENES:
        return builtin_scene(name_or_path)
    raise ValueError(
        f"'{name_or_path}' is neither a scene file nor one of {sorted(BUILTIN_SCENES)}"
    )


def pattern_section(config: dict[str, Any], scene: Scene | None = None) -> dict[str, Any]:
    """The config's ``pattern`` section with the scene's own projector settings on top."""
    section = dict(get_section(config, "pattern"))
    if scene is not None and scene.pattern:
        logger.info(f"Scene overrides projector settings: {sorted(scene.pattern)}")
        section.update(scene.pattern)
    return section


def build_pattern(rig: StereoRig, section: dict[str, Any], seed: int) -> BlobPattern:
    """Render a wall capture with the projector and recover the dot layout from it."""
    params = PatternParams.from_config(section)
    on, off, _ = synthesize_wall_capture(rig, params, seed)
    return extract_pattern(on, off, params)


def build_trajectory(config: dict[str, Any], frames: int | None, path: str | None) -> list:
    if path:
        _, poses = read_trajectory(path)
        return poses[:frames] if frames else poses
    section = {**DEFAULT_TRAJECTORY, **get_section(config, "trajectory")}
    count = frames or int(section.get("frames", 5))
    start, target, step = (np.array(section[k], dtype=float) for k in ("start", "target", "step"))
    return linear_trajectory(start, target, step, count)


def synthesize(
    config: dict[str, Any],
    scene: Scene,
    frames: int | None,
    trajectory: str | None,
    seed: int,
    workers: int,
) -> tuple[SyntheticSequence, StereoRig, BlobPattern]:
    rig = StereoRig.from_config(get_section(config, "rig"))
    section = pattern_section(config, scene)
    pattern = build_pattern(rig, section, seed)
    poses = build_trajectory(config, frames, trajectory)
    tolerance = float(section.get("depth_match_tol", 0.01))
    with log_stage(logger, f"Rendering {len(poses)} frames"):
        sequence = generate_sequence(
            scene, rig, poses, pattern, seed, tolerance, workers, progress=True
        )
    return sequence, rig, pattern


def compute_sgm(
    frame: Any, rig: StereoRig, config: dict[str, Any], workers: int, passive: bool = False
) -> DepthMap:
    params = SgmParams.from_config(get_section(config, "sgm"))
    left, right = frame.left, frame.right
    if passive:
        left, right = frame.passive_left, frame.passive_right
    with log_stage(logger, f"SGM on frame {frame.index}"):
        return sgm_depth(left, right, rig, params, workers)


def compute_landmarks(
    sequence: SyntheticSequence, rig: StereoRig, config: dict[str, Any], workers: int
) -> list[Landmark]:
    params = TrackerParams.from_config(get_section(config, "landmarks"))
    with log_stage(logger, "Landmark tracking"):
        landmarks = triangulate_and_track(sequence.passive_frames, rig, params, workers)
    logger.info(f"Tracked {len(landmarks)} landmarks over {len(sequence.passive_frames)} frames")
    return landmarks


def prepare_triplet(
    args: argparse.Namespace, config: dict[str, Any]
) -> tuple[FrameTriplet, StereoRig, DepthMap, list[Landmark]]:
    """Triplet, rig, SGM depth and landmarks from ``--data`` or synthesized from ``--scene``.

    Stored SGM maps and landmarks are reused when present, otherwise computed.
    """
    data = Path(args.data) if args.data else None
    if data is not None:
        sequence, rig, _ = read_sequence(data)
    elif args.scene:
        scene = resolve_scene(args.scene)
        sequence, rig, _ = synthesize(
            config, scene, args.frames, args.trajectory, args.seed, args.threads
        )
    else:
        raise ValueError("either --data or --scene is required")

    if not 0 <= args.triplet < len(sequence.triplets):
        raise ValueError(f"triplet {args.triplet} out of range [0, {len(sequence.triplets)})")
    triplet = sequence.triplets[args.triplet]

    sgm_path = data / "sgm" / f"sgm_{triplet.t.index:04d}.pfm" if data is not None else None
    if sgm_path is not None and sgm_path.exists():
        semi_dense = DepthMap.from_array(read_pfm(sgm_path))
    else:
        semi_dense = compute_sgm(triplet.t, rig, config, args.threads)

    landmark_path = data / "landmarks.json" if data is not None else None
    if args.landmarks:
        landmark_path = Path(args.landmarks)
    if landmark_path is not None and landmark_path.exists():
        landmarks = read_landmarks(landmark_path)
    else:
        landmarks = compute_landmarks(sequence, rig, config, args.threads)
    return triplet, rig, semi_dense, landmarks


def cmd_synth(args: argparse.Namespace, config: dict[str, Any]) -> int:
    scene = resolve_scene(args.scene)
    sequence, rig, pattern = synthesize(
        config, scene, args.frames, args.trajectory, args.seed, args.threads
    )
    write_sequence(args.out, sequence, rig, pattern, scene=scene)
    print(f"wrote {len(sequence.frames)} frames ({len(sequence.triplets)} triplets) to {args.out}")
    return 0


def cmd_sgm(args: argparse.Namespace, config: dict[str, Any]) -> int:
    sequence, rig, _ = read_sequence(args.data)
    out = Path(args.out) if args.out else Path(args.data) / "sgm"
    if args.frame is None:
        frames = [f for f in sequence.frames if f.active]
    else:
        frames = [sequence.frames[args.frame]]
    for frame in frames:
        depth = compute_sgm(frame, rig, config, args.threads, passive=args.passive)
        write_pfm(out / f"sgm_{frame.index:04d}.pfm", depth.image)
        print(f"frame {frame.index}: {depth.valid_fraction:.1%} valid")
    return 0


def cmd_landmarks(args: argparse.Namespace, config: dict[str, Any]) -> int:
    sequence, rig, _ = read_sequence(args.data)
    landmarks = compute_landmarks(sequence, rig, config, args.threads)
    out = Path(args.out) if args.out else Path(args.data) / "landmarks.json"
    write_landmarks(out, landmarks)
    print(f"{len(landmarks)} landmarks written to {out}")
    return 0


def cmd_refine(args: argparse.Namespace, config: dict[str, Any]) -> int:
    triplet, rig, semi_dense, landmarks = prepare_triplet(args, config)
    config.setdefault("scene", args.scene or Path(args.data).name)
    sparse = rasterize(landmarks, rig, triplet.t.pose)
    view = TripletView.from_triplet(triplet, rig, semi_dense, sparse.image)
    refiner = DepthRefiner(config=config)
    result = refiner.refine(view, progress=True)

    out = Path(args.out_dir)
    result.save(out)
    save_config(config, out / "config.yaml")
    write_pfm(out / "sgm.pfm", semi_dense.image)
    evaluator = DepthEvaluator(triplet.gt_depth, semi_dense)
    rows = rows_from_reports("refined", evaluator.evaluate(result.depth))
    if semi_dense.valid.any():
        baseline = evaluator.evaluate(nearest_fill(semi_dense))
        rows = rows_from_reports("sgm_nearest_fill", baseline) + rows
    write_metrics_csv(out / "metrics.csv", rows)
    print(format_table(rows))
    return 0


def cmd_loss_map(args: argparse.Namespace, config: dict[str, Any]) -> int:
    triplet, rig, semi_dense, landmarks = prepare_triplet(args, config)
    weights = LossWeights.from_config(get_section(config, "losses"))
    depth = DepthMap.from_array(read_pfm(args.depth)) if args.depth else triplet.gt_depth
    if depth.shape != rig.intrinsics.shape:
        raise ValueError(f"depth {depth.shape} vs rig {rig.intrinsics.shape}")
    d_hat = depth_to_normalized_disparity(nearest_fill(depth).image, weights.d_min, weights.d_max)

    sparse = rasterize(landmarks, rig, triplet.t.pose)
    view = TripletView.from_triplet(triplet, rig, semi_dense, sparse.image)
    views = build_pyramid(view, weights.n_scales)
    breakdown = total_loss(views, disparity_pyramid(d_hat, weights.n_scales), weights)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, loss_map in breakdown.maps.items():
        write_pfm(out / f"{name}.pfm", loss_map)
        write_png8(out / f"{name}.png", loss_map)
    for name, mask in breakdown.masks.items():
        write_mask_png(out / f"mask_{name}.png", mask)
    with open(out / "loss_components.json", "w") as f:
        json.dump(breakdown.components(), f, indent=2)
    for name, value in breakdown.components().items():
        print(f"{name:14s} {value:.6g}")
    return 0


def demo_images(args: argparse.Namespace, config: dict[str, Any]) -> dict[str, np.ndarray]:
    """Disparity, infrared and sparse images of a stored triplet, or seeded toy images."""
    if args.data:
        sequence, rig, _ = read_sequence(args.data)
        triplet = sequence.triplets[args.triplet]
        gt = triplet.gt_depth
        disparity = depth_to_normalized_disparity(nearest_fill(gt).image)
        landmark_path = Path(args.data) / "landmarks.json"
        if landmark_path.exists():
            sparse = rasterize(read_landmarks(landmark_path), rig, triplet.t.pose).image
        else:
            sparse = np.zeros(gt.shape)
        present = sparse > 0
        sparse_disparity = np.where(
            present, depth_to_normalized_disparity(np.where(present, sparse, 1.0)), 0.0
        )
        return {"disparity": disparity, "ir": triplet.t.left, "sparse": sparse_disparity}
    rng = np.random.default_rng(args.seed)
    height, width = 24, 32
    ramp = np.linspace(0.2, 0.8, width)[None, :].repeat(height, axis=0)
    sparse = np.where(rng.random((height, width)) < 0.05, ramp, 0.0)
    return {"disparity": ramp, "ir": rng.random((height, width)), "sparse": sparse}


def cmd_exchange_demo(args: argparse.Namespace, config: dict[str, Any]) -> int:
    flags = {"theta": args.theta, "mode": args.mode}
    section = get_section(merge_overrides(config, "exchange", flags), "exchange")
    exchange_config = ExchangeConfig.from_config(section)
    overrides = {}
    for branch in args.low or []:
        overrides[branch] = np.full(args.channels, exchange_config.theta / 4.0)
    for branch in args.high or []:
        if branch in overrides:
            raise ValueError(f"branch '{branch}' forced both low and high")
        overrides[branch] = np.full(args.channels, 1.0)
    images = demo_images(args, config)
    routing, result = exchange_demo(images, exchange_config, args.channels, args.seed, overrides)
    routing.save(args.out)
    print(f"{result.exchanged_fraction:.1%} of channels exchanged ({exchange_config.mode})")
    return 0


def cmd_eval(args: argparse.Namespace, config: dict[str, Any]) -> int:
    pred = DepthMap.from_array(read_pfm(args.pred))
    gt = DepthMap.from_array(read_pfm(args.gt))
    initial = DepthMap.empty(gt.shape)
    if args.initial:
        initial = DepthMap.from_array(read_pfm(args.initial))
    rows = rows_from_reports(args.method, DepthEvaluator(gt, initial).evaluate(pred))
    print(format_table(rows))
    csv_path = Path(args.csv) if args.csv else Path(args.pred).with_name("metrics.csv")
    write_metrics_csv(csv_path, rows)
    logger.info(f"Metrics written to {csv_path}")
    return 0


def cmd_ablate(args: argparse.Namespace, config: dict[str, Any]) -> int:
    triplet, rig, semi_dense, landmarks = prepare_triplet(args, config)
    rows, results = run_ablation(
        triplet,
        rig,
        semi_dense,
        landmarks,
        DepthRefiner(config=config),
        args.variants,
        args.seed,
        args.far_threshold,
        progress=True,
    )
    out = Path(args.out_dir)
    for name, result in results.items():
        write_pfm(out / f"{name}.pfm", result.depth.image)
    write_metrics_csv(out / "ablation.csv", rows)
    print(format_table(rows))
    return 0


def _add_triplet_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", type=str, default=None, help="Sequence folder written by 'synth'")
    parser.add_argument(
        "--scene", type=str, default=None,
        help="Scene JSON or built-in name (synthesized in memory)",
    )
    parser.add_argument(
        "--trajectory", type=str, default=None,
        help="Trajectory text file for --scene",
    )
    parser.add_argument("--frames", type=int, default=None, help="Number of frames for --scene")
    parser.add_argument("--triplet", type=int, default=0, help="Index of the triplet to use")
    parser.add_argument(
        "--landmarks", type=str, default=None,
        help="Landmark JSON (default: <data>/landmarks.json)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="helmholtz", description="Active-stereo depth completion lab"
    )
    parser.add_argument("--config", type=str, default=None, help="YAML config (supports _extends)")
    parser.add_argument("--seed", type=int, default=None, help="Random seed (overrides config)")
    parser.add_argument(
        "--threads", type=int, default=1,
        help="Worker threads for rendering, SGM and tracking",
    )
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="Render an interleaved active/passive sequence")
    p.add_argument("--scene", type=str, required=True, help="Scene JSON or built-in name")
    p.add_argument("--frames", type=int, default=None, help="Number of frames")
    p.add_argument("--trajectory", type=str, default=None, help="Trajectory text file")
    p.add_argument("--out", type=str, required=True, help="Output folder")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sgm", help="Semi-dense SGM depth for the active frames")
    p.add_argument("--data", type=str, required=True, help="Sequence folder")
    p.add_argument(
        "--frame", type=int, default=None,
        help="Single frame index (default: all active frames)",
    )
    p.add_argument("--passive", action="store_true", help="Match the projector-off images instead")
    p.add_argument("--out", type=str, default=None, help="Output folder (default: <data>/sgm)")
    p.set_defaults(func=cmd_sgm)

    p = sub.add_parser("landmarks", help="Track and triangulate landmarks over the passive frames")
    p.add_argument("--data", type=str, required=True, help="Sequence folder")
    p.add_argument(
        "--out", type=str, default=None,
        help="Output JSON (default: <data>/landmarks.json)",
    )
    p.set_defaults(func=cmd_landmarks)

    p = sub.add_parser("refine", help="Complete the depth of one triplet")
    _add_triplet_source(p)
    p.add_argument(
        "--iters-per-scale", type=int, nargs="+", default=None,
        help="Iterations per scale, coarse to fine",
    )
    p.add_argument("--weights", type=str, default=None, help="Loss weights JSON")
    p.add_argument("--out-dir", type=str, required=True, help="Output folder")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("loss-map", help="Per-pixel loss maps and masks for a depth map")
    _add_triplet_source(p)
    p.add_argument(
        "--depth", type=str, default=None,
        help="Depth PFM to score (default: ground truth)",
    )
    p.add_argument("--weights", type=str, default=None, help="Loss weights JSON")
    p.add_argument("--out-dir", type=str, required=True, help="Output folder")
    p.set_defaults(func=cmd_loss_map)

    p = sub.add_parser("exchange-demo", help="Channel-exchange routing raster for a toy stack")
    p.add_argument(
        "--data", type=str, default=None,
        help="Sequence folder (default: seeded toy images)",
    )
    p.add_argument("--triplet", type=int, default=0, help="Triplet index with --data")
    p.add_argument("--mode", choices=["mean", "max"], default=None, help="Exchange mode")
    p.add_argument("--theta", type=float, default=None, help="Exchange threshold")
    p.add_argument("--channels", type=int, default=4, help="Channels per branch")
    p.add_argument("--low", choices=DEMO_BRANCHES, nargs="*", help="Branches forced below theta")
    p.add_argument(
        "--high", choices=DEMO_BRANCHES, nargs="*",
        help="Branches forced well above theta",
    )
    p.add_argument("--out", type=str, required=True, help="Routing PNG (legend written next to it)")
    p.set_defaults(func=cmd_exchange_demo)

    p = sub.add_parser("eval", help="Three-region metrics of a predicted depth map")
    p.add_argument("--pred", type=str, required=True, help="Predicted depth PFM")
    p.add_argument("--gt", type=str, required=True, help="Ground-truth depth PFM (0 = invalid)")
    p.add_argument(
        "--initial", type=str, default=None,
        help="Initial (SGM) depth PFM (0 = invalid)",
    )
    p.add_argument("--method", type=str, default="pred", help="Label for the table and CSV")
    p.add_argument(
        "--csv", type=str, default=None,
        help="Metrics CSV output (default: metrics.csv next to --pred)",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="Refine one triplet under several loss configurations")
    _add_triplet_source(p)
    p.add_argument(
        "--variants",
        nargs="+",
        default=list(DEFAULT_VARIANTS),
        help="full, no_sparse, no_temporal, sparse_fraction_<p>",
    )
    p.add_argument(
        "--far-threshold", type=float, default=5.0,
        help="Depth beyond which pixels count as far (m)",
    )
    p.add_argument(
        "--iters-per-scale", type=int, nargs="+", default=None,
        help="Iterations per scale, coarse to fine",
    )
    p.add_argument("--weights", type=str, default=None, help="Loss weights JSON")
    p.add_argument("--out-dir", type=str, required=True, help="Output folder")
    p.set_defaults(func=cmd_ablate)
    return parser


def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    """Config file, then the weights JSON, then command-line flags."""
    config = load_config(args.config) if args.config else {}
    if args.seed is None:
        args.seed = int(config.get("seed", 0))
    config["seed"] = args.seed
    if getattr(args, "weights", None):
        config = merge_overrides(config, "losses", load_json_overrides(args.weights))
    if getattr(args, "iters_per_scale", None):
        config = merge_overrides(config, "refine", {"iters_per_scale": list(args.iters_per_scale)})
    if args.threads < 1:
        raise ValueError(f"--threads must be >= 1, got {args.threads}")
    return config


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging("DEBUG" if args.verbose else "INFO")
    try:
        config = resolve_config(args)
        return args.func(args, config)
    except (ValueError, RuntimeError, OSError) as exc:
        logger.error(f"{args.command} failed: {exc}")
        if args.verbose:
            logger.debug("traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
