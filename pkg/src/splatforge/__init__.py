"""splatforge: incremental feed-forward 3D Gaussian scene engine.

Core loop: render the current scene from a user pose, fill revealed
holes in color and depth, infer new Gaussians with a depth-guided
plane-sweep cost volume, and fuse them into the growing global scene.
"""

from .costvolume import (
    CostVolume,
    DepthCandidates,
    build_cost_volume,
    make_depth_candidates,
    regress_depth_and_confidence,
    warp_feature_to_view,
)
from .completion import CompletionInput, complete_depth, inpaint_color, make_hole_mask
from .features import FeatureMap, extract_features
from .gaussians import (
    FusionParams,
    GaussianSet,
    LocalGaussians,
    decode_gaussians,
    fuse_incremental,
    load_ply,
    save_ply,
)
from .geometry import (
    Intrinsics,
    Pose,
    pose_distance,
    project_point,
    relative_pose,
    unproject_pixel,
)
from .imaging import DepthMap, ImageRGB, Mask, bilinear_sample, psnr, resize_half
from .memory import FeatureMemory, MemoryEntry
from .pipeline import (
    PipelineConfig,
    SessionState,
    StepTiming,
    init_session,
    load_session,
    run_trajectory,
    save_session,
    step,
)
from .renderer import RenderOutput, render_view
from .testkit import SyntheticScene, build_synthetic_scene, render_ground_truth, standard_trajectories

__version__ = "0.1.0"

__all__ = [
    "CompletionInput", "CostVolume", "DepthCandidates", "DepthMap",
    "FeatureMap", "FeatureMemory", "FusionParams", "GaussianSet",
    "ImageRGB", "Intrinsics", "LocalGaussians", "Mask", "MemoryEntry",
    "PipelineConfig", "Pose", "RenderOutput", "SessionState", "StepTiming",
    "SyntheticScene", "bilinear_sample", "build_cost_volume",
    "build_synthetic_scene", "complete_depth", "decode_gaussians",
    "extract_features", "fuse_incremental", "init_session", "inpaint_color",
    "load_ply", "load_session", "make_depth_candidates", "make_hole_mask",
    "pose_distance", "project_point", "psnr", "regress_depth_and_confidence",
    "relative_pose", "render_ground_truth", "render_view", "resize_half",
    "run_trajectory", "save_ply", "save_session", "standard_trajectories",
    "step", "unproject_pixel", "warp_feature_to_view",
]
