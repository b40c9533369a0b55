"""Command-line interface.

Subcommands: init, step, run-trajectory, render, complete, bench, gen-gt,
serve. Sessions live in directories (see pipeline persistence); poses are
row-major 12-number [R | t] arrays, inline as comma-separated values or in
JSON files holding a list of such arrays.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .gaussians import load_ply
from .geometry import Intrinsics, Pose
from .imaging import (
    DepthMap,
    Mask,
    read_pfm,
    read_png,
    write_pfm,
    write_png,
)
from .completion import CompletionInput, complete_depth, inpaint_color
from .pipeline import (
    REFERENCE_GPU_SECONDS,
    PipelineConfig,
    StepTiming,
    init_session,
    load_session,
    run_trajectory,
    save_session,
    step,
)
from .renderer import render_view
from .testkit import build_synthetic_scene, render_ground_truth, standard_trajectories

CONFIG_FLAGS = (
    ("n_d", int), ("a", float), ("n_v", int), ("temperature", float),
    ("delta", float), ("tau", float), ("k_scale", float),
    ("bootstrap_depth", float), ("rotation_weight", float),
    ("max_memory_entries", int), ("threads", int),
)


def _add_config_flags(parser):
    for name, typ in CONFIG_FLAGS:
        parser.add_argument(f"--{name.replace('_', '-')}", type=typ, default=None)
    parser.add_argument("--decode-holes-only", action="store_true", default=None)
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config file; flags override its values")


def _config_from(args, width, height) -> PipelineConfig:
    values = {}
    if args.config is not None:
        values.update(json.loads(Path(args.config).read_text()))
    for name, _ in CONFIG_FLAGS:
        flag = getattr(args, name)
        if flag is not None:
            values[name] = flag
    if args.decode_holes_only:
        values["decode_holes_only"] = True
    values["width"] = width
    values["height"] = height
    cfg = PipelineConfig(**values)
    cfg.validate()
    return cfg


def _add_intr_flags(parser):
    parser.add_argument("--fx", type=float, default=None)
    parser.add_argument("--fy", type=float, default=None)
    parser.add_argument("--cx", type=float, default=None)
    parser.add_argument("--cy", type=float, default=None)


def _intr_from(args, width, height) -> Intrinsics:
    fx = args.fx if args.fx is not None else width / 2.0
    fy = args.fy if args.fy is not None else fx
    cx = args.cx if args.cx is not None else width / 2.0
    cy = args.cy if args.cy is not None else height / 2.0
    return Intrinsics(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height)


def _parse_pose(text: str) -> Pose:
    return Pose.from_array12([float(v) for v in text.split(",")])


def _load_poses(path) -> list:
    return [Pose.from_array12(row) for row in json.loads(Path(path).read_text())]


def cmd_init(args):
    image = read_png(args.image)
    if args.depth is not None:
        depth = DepthMap(read_pfm(args.depth))
    else:
        depth = DepthMap(np.full((image.height, image.width),
                                 args.const_depth, dtype=np.float32))
    intr = _intr_from(args, image.width, image.height)
    pose = _parse_pose(args.pose) if args.pose else Pose.identity()
    config = _config_from(args, image.width, image.height)
    state = init_session(image, depth, pose, intr, config)
    save_session(args.session, state)
    print(f"session initialized at {args.session}: "
          f"{len(state.global_gaussians)} gaussians")


def cmd_step(args):
    state = load_session(args.session)
    pose = _parse_pose(args.pose)
    state, render, timing = step(state, pose, prompt=args.prompt,
                                 debug_dir=args.dump_cost_volumes)
    save_session(args.session, state)
    if args.frame is not None:
        write_png(args.frame, render.color)
    print(f"step {state.step_count - 1}: "
          f"{len(state.global_gaussians)} gaussians, total {timing.total_ms:.1f} ms")
    for k in StepTiming.FIELDS[:-1]:
        print(f"  {k:14s} {getattr(timing, k):8.1f}")


def cmd_run_trajectory(args):
    state = load_session(args.session)
    poses = _load_poses(args.poses)
    prompts = None
    if args.prompts is not None:
        prompts = json.loads(Path(args.prompts).read_text())
    results = run_trajectory(state, poses, prompts, output_dir=args.out)
    save_session(args.session, state)
    total = sum(t.total_ms for _, t in results)
    print(f"{len(results)} steps, {len(state.global_gaussians)} gaussians, "
          f"{total / 1000.0:.2f} s total")


def cmd_render(args):
    g = load_ply(args.ply)
    poses = _load_poses(args.poses)
    intr = _intr_from(args, args.width, args.height)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, pose in enumerate(poses):
        result = render_view(g, pose, intr, tau=args.tau, threads=args.threads or 1)
        write_png(out / f"frame_{k:04d}.png", result.color)
        write_pfm(out / f"frame_{k:04d}.pfm", result.depth.data)
    print(f"rendered {len(poses)} frames to {out}")


def cmd_complete(args):
    rgb = read_png(args.image)
    depth = read_pfm(args.depth)
    if args.mask is not None:
        mask_img = read_png(args.mask)
        known = mask_img.data.mean(axis=2) > 0.5
        depth = np.where(known, depth, 0.0).astype(np.float32)
    depth_map = DepthMap(depth)
    inp = CompletionInput(rgb, depth_map, Mask(depth_map.valid_mask()))
    filled_rgb = inpaint_color(inp)
    filled_depth = complete_depth(inp, bootstrap_depth=args.bootstrap_depth)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_png(out / "filled.png", filled_rgb)
    write_pfm(out / "filled.pfm", filled_depth.data)
    print(f"wrote {out / 'filled.png'} and {out / 'filled.pfm'}")


def cmd_gen_gt(args):
    scene = build_synthetic_scene(args.seed, args.kind)
    intr = _intr_from(args, args.width, args.height)
    poses = standard_trajectories(args.trajectory, args.n)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, pose in enumerate(poses):
        img, depth = render_ground_truth(scene, pose, intr)
        write_png(out / f"gt_{k:04d}.png", img)
        write_pfm(out / f"gt_{k:04d}.pfm", depth.data)
    with open(out / "poses.json", "w") as fh:
        json.dump([p.to_array12() for p in poses], fh, indent=2)
    print(f"wrote {len(poses)} ground-truth views to {out}")


def cmd_bench(args):
    intr = Intrinsics(fx=args.width / 2.0, fy=args.width / 2.0,
                      cx=args.width / 2.0, cy=args.height / 2.0,
                      width=args.width, height=args.height)
    config = _config_from(args, args.width, args.height)
    scene = build_synthetic_scene(args.seed, "room")
    poses = standard_trajectories("panorama", max(args.steps + 1, 8))
    img, depth = render_ground_truth(scene, poses[0], intr)

    t0 = time.perf_counter()
    state = init_session(img, depth, poses[0], intr, config)
    init_s = time.perf_counter() - t0

    timings = []
    for pose in poses[1:args.steps + 1]:
        state, _, timing = step(state, pose)
        timings.append(timing)

    print(f"bench: {args.width}x{args.height}, n_d={config.n_d}, "
          f"n_v={config.n_v}, threads={config.threads}")
    print(f"  init: {init_s * 1000.0:8.1f} ms ({len(state.global_gaussians)} gaussians now)")
    header = "  " + " ".join(f"{k[:-3]:>10}" for k in StepTiming.FIELDS)
    print(header)
    for i, t in enumerate(timings):
        print("  " + " ".join(f"{getattr(t, k):10.1f}" for k in StepTiming.FIELDS)
              + f"   # step {i + 1}")
    mean_total = sum(t.total_ms for t in timings) / len(timings)
    print(f"  mean step total: {mean_total:.1f} ms")
    ref = REFERENCE_GPU_SECONDS
    print(f"  reference (trained-model GPU system, reported): "
          f"geometry {ref['geometry']:.2f} s, appearance {ref['appearance']:.2f} s, "
          f"total {ref['total']:.2f} s per step")
    if args.csv is not None:
        with open(args.csv, "w") as fh:
            fh.write(",".join(StepTiming.FIELDS) + "\n")
            for t in timings:
                fh.write(",".join(f"{getattr(t, k):.3f}" for k in StepTiming.FIELDS) + "\n")
        print(f"  timing CSV written to {args.csv}")


def cmd_serve(args):
    from .service import serve

    serve(bind=args.bind)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splatforge",
        description="incremental feed-forward 3D Gaussian scene engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="start a session from an RGB(-D) view")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--depth", type=Path, default=None, help="PFM depth map")
    p.add_argument("--const-depth", type=float, default=2.0,
                   help="constant depth when no --depth is given")
    p.add_argument("--pose", type=str, default=None, help="12 comma-separated values")
    p.add_argument("--session", type=Path, required=True)
    _add_intr_flags(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("step", help="advance a session by one pose")
    p.add_argument("--session", type=Path, required=True)
    p.add_argument("--pose", type=str, required=True)
    p.add_argument("--prompt", type=str, default="")
    p.add_argument("--frame", type=Path, default=None, help="write the returned view here")
    p.add_argument("--dump-cost-volumes", type=Path, default=None,
                   help="write this step's cost volume as PFM slices")
    p.set_defaults(func=cmd_step)

    p = sub.add_parser("run-trajectory", help="run a pose list through a session")
    p.add_argument("--session", type=Path, required=True)
    p.add_argument("--poses", type=Path, required=True, help="JSON list of 12-number poses")
    p.add_argument("--prompts", type=Path, default=None, help="JSON list of strings")
    p.add_argument("--out", type=Path, required=True, help="frames + timings.csv")
    p.set_defaults(func=cmd_run_trajectory)

    p = sub.add_parser("render", help="render a PLY scene along a pose list")
    p.add_argument("--ply", type=Path, required=True)
    p.add_argument("--poses", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--threads", type=int, default=1)
    _add_intr_flags(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("complete", help="fill holes in an RGB + depth pair")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--depth", type=Path, required=True, help="PFM with 0 = unknown")
    p.add_argument("--mask", type=Path, default=None,
                   help="optional PNG; dark pixels mark unknown regardless of depth")
    p.add_argument("--bootstrap-depth", type=float, default=2.0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("gen-gt", help="emit synthetic ground-truth views")
    p.add_argument("--kind", choices=("room", "corridor", "plane_field"), default="room")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trajectory", choices=("panorama", "walk_forward", "orbit"),
                   default="panorama")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--out", type=Path, required=True)
    _add_intr_flags(p)
    p.set_defaults(func=cmd_gen_gt)

    p = sub.add_parser("bench", help="time pipeline steps on a synthetic room")
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--steps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", type=Path, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--bind", type=str, default=None, help="host:port")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
