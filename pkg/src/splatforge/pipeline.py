"""The interaction loop: render, fill holes, complete depth, sweep, fuse.

Each step at a user pose runs exactly:

  1. render the global scene from the pose
  2. derive the hole mask from accumulated alpha (< tau = hole)
  3. fill hole color (push-pull)            -> target image
  4. fill hole depth (harmonic, rendered depth is the known set)
                                            -> target depth
  5. extract matching features; query the feature memory; with at least
     one neighbor, build the depth-guided cost volume and regress
     depth + confidence (otherwise the target depth passes through)
  6. decode one Gaussian per pixel
  7. fuse: add only locals without a same-pixel global within the
     relative depth tolerance
  8. insert the features into memory, bump the step counter

The returned render is the pre-fusion view (what the user saw when they
committed the pose); render again after the step for the post-fusion
scene. Steps of one session are strictly sequential; the whole loop is
deterministic, so identical inputs give bit-identical scenes.

Sessions persist as a directory: config + metadata JSON, the global set
as PLY, and memory entries as PFM feature stacks plus a pose table. All
rasters are float32 and JSON carries exact float64 reprs, so
save/load/continue is bit-equal to an uninterrupted run.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .completion import CompletionInput, complete_depth, inpaint_color, make_hole_mask
from .costvolume import (
    build_cost_volume,
    downsample_depth_to_features,
    make_depth_candidates,
    regress_depth_and_confidence,
)
from .errors import (
    IncompleteDepthError,
    SessionSchemaError,
    SizeMismatchError,
    StageError,
)
from .features import FEATURE_SCALE, FeatureMap, extract_features
from .gaussians import FusionParams, GaussianSet, decode_gaussians, fuse_incremental, load_ply, save_ply
from .geometry import Intrinsics, Pose
from .imaging import DepthMap, ImageRGB, Mask, read_pfm, write_pfm, write_png
from .memory import FeatureMemory
from .renderer import render_view

# Reported per-step stage timings of the trained-model GPU system whose
# interaction contract this engine mirrors; printed next to measured
# values for context, never asserted against.
REFERENCE_GPU_SECONDS = {"geometry": 0.50, "appearance": 0.22, "total": 0.72}


@dataclass
class PipelineConfig:
    n_d: int = 16                 # depth candidates per pixel
    a: float = 0.25               # candidate range: (1 +/- a) * guide depth
    n_v: int = 2                  # neighbor views per sweep
    temperature: float = 0.05     # softmax sharpness for depth regression
    delta: float = 0.05           # fusion relative depth tolerance
    tau: float = 0.5              # alpha coverage threshold (holes below)
    k_scale: float = 1.0          # splat footprint in pixels at its depth
    bootstrap_depth: float = 2.0  # fill when a frame has no known depth
    rotation_weight: float = 1.0  # rotation block weight in pose distance
    decode_holes_only: bool = False
    max_memory_entries: int | None = None
    width: int = 128
    height: int = 128
    threads: int = 1              # renderer tile parallelism

    def validate(self) -> None:
        if self.n_d < 2:
            raise ValueError("n_d must be >= 2")
        if not 0 < self.a < 1:
            raise ValueError("a must be in (0, 1)")
        if self.n_v < 1:
            raise ValueError("n_v must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 0 <= self.delta < 1:
            raise ValueError("delta must be in [0, 1)")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must be in (0, 1]")
        if self.k_scale <= 0:
            raise ValueError("k_scale must be positive")
        if self.bootstrap_depth <= 0:
            raise ValueError("bootstrap_depth must be positive")
        if self.rotation_weight < 0:
            raise ValueError("rotation_weight must be non-negative")
        if self.max_memory_entries is not None and self.max_memory_entries < 1:
            raise ValueError("max_memory_entries must be >= 1 or None")
        if self.width % FEATURE_SCALE or self.height % FEATURE_SCALE:
            raise ValueError(f"image size must be divisible by {FEATURE_SCALE}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "PipelineConfig":
        cfg = PipelineConfig(**d)
        cfg.validate()
        return cfg


@dataclass
class StepTiming:
    render_ms: float = 0.0
    inpaint_ms: float = 0.0
    depth_ms: float = 0.0
    stepsplat_ms: float = 0.0
    fuse_ms: float = 0.0
    total_ms: float = 0.0

    FIELDS = ("render_ms", "inpaint_ms", "depth_ms", "stepsplat_ms", "fuse_ms", "total_ms")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}

    def aggregate(self) -> dict:
        """Coarse geometry/appearance split used in timing reports."""
        return {
            "geometry_ms": self.depth_ms + self.stepsplat_ms + self.fuse_ms,
            "appearance_ms": self.inpaint_ms,
            "render_ms": self.render_ms,
            "total_ms": self.total_ms,
        }


@dataclass
class SessionState:
    global_gaussians: GaussianSet
    memory: FeatureMemory
    config: PipelineConfig
    intrinsics: Intrinsics
    step_count: int = 0
    prompts: list = field(default_factory=list)


class _StageClock:
    def __init__(self):
        self.t0 = time.perf_counter()

    def lap(self) -> float:
        now = time.perf_counter()
        ms = (now - self.t0) * 1000.0
        self.t0 = now
        return ms


def init_session(rgb: ImageRGB, depth: DepthMap, pose: Pose, intr: Intrinsics,
                 config: PipelineConfig | None = None) -> SessionState:
    """Start a session from one fully known RGB-D view.

    The first frame's depth is caller-supplied (ground truth in tests, a
    constant via the CLI), because this engine does not estimate
    single-view depth. Decoded with confidence 1.0 into an empty scene.
    """
    config = config or PipelineConfig()
    config.validate()
    if np.any(depth.data == 0):
        raise IncompleteDepthError("initial depth must be fully valid")
    if rgb.data.shape[:2] != depth.data.shape:
        raise SizeMismatchError(f"image {rgb.data.shape[:2]} vs depth {depth.data.shape}")
    if rgb.width % FEATURE_SCALE or rgb.height % FEATURE_SCALE:
        raise SizeMismatchError(
            f"image dims {rgb.width}x{rgb.height} not divisible by {FEATURE_SCALE}")
    if intr.width != rgb.width or intr.height != rgb.height:
        raise SizeMismatchError("intrinsics size disagrees with the image")

    f_m, _ = extract_features(rgb)
    memory = FeatureMemory(max_entries=config.max_memory_entries)
    memory.insert_entry(pose, f_m, 0)

    local = decode_gaussians(rgb, depth, np.ones(depth.data.shape), pose, intr,
                             step=0, k_scale=config.k_scale)
    global_set = fuse_incremental(
        GaussianSet.empty(), local, pose, intr, FusionParams(config.delta))
    return SessionState(
        global_gaussians=global_set,
        memory=memory,
        config=config,
        intrinsics=intr,
        step_count=1,
    )


def step(state: SessionState, pose: Pose, prompt: str = "",
         debug_dir=None) -> tuple:
    """Advance the scene by one interaction at `pose`.

    Returns (state, pre_fusion_render, timing); the state object is
    updated in place. debug_dir, when set, receives the step's cost
    volume as one PFM per depth slice.
    """
    cfg = state.config
    intr = state.intrinsics
    clock = _StageClock()
    total0 = time.perf_counter()
    timing = StepTiming()

    def run(stage, fn):
        try:
            result = fn()
        except Exception as exc:
            raise StageError(stage, exc) from exc
        return result

    render = run("render", lambda: render_view(
        state.global_gaussians, pose, intr, tau=cfg.tau, threads=cfg.threads))
    timing.render_ms = clock.lap()

    known = run("render", lambda: make_hole_mask(render, cfg.tau))

    def inpaint():
        # Rendered color is premultiplied by accumulated alpha; dividing it
        # out at covered pixels stops partially-covered boundary rings from
        # seeding ever-darker fill content on multi-step loops.
        alpha_safe = np.maximum(render.alpha.astype(np.float64), cfg.tau)[..., None]
        unpremult = ImageRGB(
            np.clip(render.color.data / alpha_safe, 0.0, 1.0).astype(np.float32))
        return inpaint_color(CompletionInput(unpremult, render.depth, known))

    target_img = run("inpaint", inpaint)
    timing.inpaint_ms = clock.lap()

    target_depth = run("depth", lambda: complete_depth(
        CompletionInput(target_img, render.depth, known),
        bootstrap_depth=cfg.bootstrap_depth))
    timing.depth_ms = clock.lap()

    def stepsplat():
        f_m, _ = extract_features(target_img)
        neighbors = state.memory.query_nearest(pose, cfg.n_v, cfg.rotation_weight)
        if neighbors:
            guide = downsample_depth_to_features(target_depth)
            candidates = make_depth_candidates(guide, cfg.a, cfg.n_d)
            volume = build_cost_volume(
                f_m, [(e.pose, e.features) for e in neighbors], pose,
                intr.scaled(1.0 / FEATURE_SCALE), candidates)
            if debug_dir is not None:
                dump = Path(debug_dir)
                dump.mkdir(parents=True, exist_ok=True)
                for s in range(volume.scores.shape[0]):
                    write_pfm(dump / f"cost_{state.step_count:04d}_s{s:02d}.pfm",
                              volume.scores[s].astype(np.float32))
            depth, confidence = regress_depth_and_confidence(
                volume, candidates, cfg.temperature)
        else:
            depth, confidence = target_depth, np.ones(target_depth.data.shape, dtype=np.float32)
        restrict = Mask(~known.data) if cfg.decode_holes_only else None
        local = decode_gaussians(target_img, depth, confidence, pose, intr,
                                 step=state.step_count, k_scale=cfg.k_scale,
                                 restrict_to=restrict)
        return f_m, local

    f_m, local = run("stepsplat", stepsplat)
    timing.stepsplat_ms = clock.lap()

    state.global_gaussians = run("fuse", lambda: fuse_incremental(
        state.global_gaussians, local, pose, intr, FusionParams(cfg.delta)))
    timing.fuse_ms = clock.lap()

    state.memory.insert_entry(pose, f_m, state.step_count)
    state.prompts.append(prompt)
    state.step_count += 1
    timing.total_ms = (time.perf_counter() - total0) * 1000.0
    return state, render, timing


def run_trajectory(state: SessionState, poses, prompts=None, output_dir=None) -> list:
    """Run sequential steps; optionally write frames and a timing CSV."""
    prompts = [""] * len(poses) if prompts is None else list(prompts)
    if len(prompts) != len(poses):
        raise ValueError(f"{len(poses)} poses vs {len(prompts)} prompts")
    out = None
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)

    results = []
    for i, (pose, prompt) in enumerate(zip(poses, prompts)):
        _, render, timing = step(state, pose, prompt)
        results.append((render, timing))
        if out is not None:
            write_png(out / f"frame_{i:04d}.png", render.color)
    if out is not None:
        with open(out / "timings.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(StepTiming.FIELDS)
            for _, timing in results:
                writer.writerow([f"{getattr(timing, k):.3f}" for k in StepTiming.FIELDS])
    return results


# ---------------------------------------------------------------------------
# Session persistence
# ---------------------------------------------------------------------------

def save_session(path, state: SessionState) -> None:
    """Write the session directory (config, metadata, scene PLY, memory)."""
    root = Path(path)
    (root / "memory").mkdir(parents=True, exist_ok=True)

    with open(root / "config.json", "w") as fh:
        json.dump(state.config.to_dict(), fh, indent=2)

    feature_dims = None
    entries = []
    for i, entry in enumerate(state.memory.entries):
        fmap = entry.features
        feature_dims = {"height": fmap.height, "width": fmap.width,
                        "channels": fmap.channels}
        stack = fmap.data.transpose(2, 0, 1).reshape(
            fmap.channels * fmap.height, fmap.width)
        write_pfm(root / "memory" / f"features_{i:05d}.pfm", stack)
        entries.append({"step_index": entry.step_index, "pose": entry.pose.to_array12()})
    with open(root / "memory" / "poses.json", "w") as fh:
        json.dump(entries, fh, indent=2)

    save_ply(root / "global.ply", state.global_gaussians)
    with open(root / "metadata.json", "w") as fh:
        json.dump({
            "step_count": state.step_count,
            "prompts": state.prompts,
            "intrinsics": state.intrinsics.to_dict(),
            "feature_dims": feature_dims,
        }, fh, indent=2)


def _require(path: Path, component: str) -> Path:
    if not path.exists():
        raise SessionSchemaError(f"missing session component: {component}")
    return path


def load_session(path) -> SessionState:
    """Load a session directory; bit-equal to the state that was saved."""
    root = Path(path)
    try:
        with open(_require(root / "config.json", "config.json")) as fh:
            config = PipelineConfig.from_dict(json.load(fh))
        with open(_require(root / "metadata.json", "metadata.json")) as fh:
            meta = json.load(fh)
        intr = Intrinsics.from_dict(meta["intrinsics"])
        dims = meta["feature_dims"]
        with open(_require(root / "memory" / "poses.json", "memory/poses.json")) as fh:
            entries = json.load(fh)
    except SessionSchemaError:
        raise
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise SessionSchemaError(f"corrupt session metadata: {exc}") from exc

    memory = FeatureMemory(max_entries=config.max_memory_entries)
    for i, rec in enumerate(entries):
        pfm_path = _require(root / "memory" / f"features_{i:05d}.pfm",
                            f"memory/features_{i:05d}.pfm")
        stack = read_pfm(pfm_path)
        c, h, w = dims["channels"], dims["height"], dims["width"]
        if stack.shape != (c * h, w):
            raise SessionSchemaError(
                f"feature stack {i} has shape {stack.shape}, expected {(c * h, w)}")
        data = stack.reshape(c, h, w).transpose(1, 2, 0)
        memory.insert_entry(Pose.from_array12(rec["pose"]),
                            FeatureMap(data, normalized=True), int(rec["step_index"]))

    global_set = load_ply(_require(root / "global.ply", "global.ply"))
    return SessionState(
        global_gaussians=global_set,
        memory=memory,
        config=config,
        intrinsics=intr,
        step_count=int(meta["step_count"]),
        prompts=list(meta["prompts"]),
    )
