"""Depth-guided plane-sweep cost volume and softmax depth regression.

Per current-view feature pixel, N_d depth candidates are spread uniformly
over [(1-a)*D, (1+a)*D] around the guide depth D. Neighbor matching
features are warped onto each candidate plane (unproject at the candidate
depth, transform, project, bilinear sample), re-normalized per pixel, and
correlated against the current features by dot product (both operands are
unit vectors, so scores are cosines in [-1, 1]), averaged over the
neighbors that warp in-bounds, and smoothed per depth slice with a fixed
3x3 box (the refinement stand-in; smoothing the volume rather than the
depths keeps regression a convex combination of candidates). Regressed depth is the
softmax-weighted average of the candidates; confidence is the max softmax
probability. Both are upsampled x4 back to input resolution.

Pixels where no neighbor lands in-bounds score 0 at every candidate, so
regression returns the candidate mean — the guide depth passes through
untouched exactly where the sweep has no evidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyNeighborsError, IncompleteGuideError
from .features import FEATURE_SCALE, FeatureMap
from .geometry import Intrinsics, Pose, project_points
from .imaging import DepthMap, Mask, bilinear_sample_many, box_downsample2, box_filter_mean


@dataclass
class DepthCandidates:
    """Per-pixel candidate depths, shape (n_d, H_f, W_f), strictly increasing."""

    values: np.ndarray
    offset_fraction: float
    n_d: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[0] != self.n_d:
            raise ValueError(f"expected ({self.n_d}, H, W) array, got {v.shape}")
        if self.n_d >= 2 and not np.all(v[1:] > v[:-1]):
            raise ValueError("candidates must be strictly increasing per pixel")
        self.values = v


@dataclass
class CostVolume:
    """Correlation scores, shape (n_d, H_f, W_f).

    `evidence` marks pixels where at least one neighbor sample landed
    in-bounds for at least one candidate. Pixels without evidence carry
    flat zero scores; regression treats them as a full no-op (guide depth
    passes through at bypass confidence 1), mirroring the empty-memory
    branch of the pipeline.
    """

    scores: np.ndarray
    evidence: np.ndarray | None = None

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 3:
            raise ValueError(f"expected (n_d, H, W) array, got {s.shape}")
        if not np.isfinite(s).all():
            raise ValueError("cost volume contains non-finite scores")
        self.scores = s
        if self.evidence is not None:
            e = np.asarray(self.evidence, dtype=bool)
            if e.shape != s.shape[1:]:
                raise ValueError(f"evidence shape {e.shape} vs scores {s.shape[1:]}")
            self.evidence = e


def downsample_depth_to_features(depth: DepthMap) -> DepthMap:
    """4x4 box average onto the feature grid; guide must be fully valid."""
    if np.any(depth.data == 0):
        raise IncompleteGuideError("guide depth has sentinel pixels")
    quarter = box_downsample2(box_downsample2(depth.data.astype(np.float64)))
    return DepthMap(quarter.astype(np.float32))


def make_depth_candidates(d_guide: DepthMap, a: float, n_d: int) -> DepthCandidates:
    """n_d uniform depths spanning [(1-a)*D, (1+a)*D] per guide pixel."""
    if n_d < 2:
        raise ValueError(f"n_d must be >= 2, got {n_d}")
    if not 0 < a < 1:
        raise ValueError(f"offset fraction must be in (0, 1), got {a}")
    guide = d_guide.data.astype(np.float64)
    if np.any(guide == 0):
        raise IncompleteGuideError("guide depth has sentinel pixels")
    steps = np.linspace(1.0 - a, 1.0 + a, n_d)
    values = steps[:, None, None] * guide[None, :, :]
    return DepthCandidates(values, offset_fraction=a, n_d=n_d)


def warp_feature_to_view(f_src: FeatureMap, pose_src: Pose, pose_cur: Pose,
                         intr_feat: Intrinsics, d_s) -> tuple[FeatureMap, Mask]:
    """Warp a source feature map onto a depth plane of the current view.

    d_s is a scalar plane depth or an (H_f, W_f) per-pixel candidate
    slice. Each current pixel center is unprojected at its depth,
    projected into the source view, and bilinearly sampled; samples that
    fall outside the source image (or behind its camera) are zero-filled
    and marked invalid in the mask.
    """
    h, w = f_src.height, f_src.width
    depth = np.broadcast_to(np.asarray(d_s, dtype=np.float64), (h, w))

    uu, vv = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    xc = np.stack([
        (uu - intr_feat.cx) / intr_feat.fx * depth,
        (vv - intr_feat.cy) / intr_feat.fy * depth,
        depth,
    ], axis=-1)
    world = pose_cur.camera_to_world(xc.reshape(-1, 3))
    u_src, v_src, _, in_front = project_points(pose_src, intr_feat, world)

    values, in_bounds = bilinear_sample_many(
        f_src.data, u_src - 0.5, v_src - 0.5)
    valid = (in_front & in_bounds).reshape(h, w)
    warped = np.where(valid.reshape(-1)[:, None], values, 0.0).reshape(h, w, -1)
    return (
        FeatureMap(warped.astype(np.float32), normalized=f_src.normalized),
        Mask(valid),
    )


def build_cost_volume(f_m_cur: FeatureMap, neighbors, pose_cur: Pose,
                      intr_feat: Intrinsics, candidates: DepthCandidates,
                      refine: bool = True) -> CostVolume:
    """Correlation volume over candidate depths, averaged across neighbors.

    neighbors: list of (Pose, FeatureMap) from the feature memory. Per
    (slice, pixel) the score is the mean dot product against the warped
    neighbor features, counting only neighbors valid at that pixel, then
    box-smoothed 3x3 within the slice (refine=False skips the smoothing,
    for inspection and raw-correlation tests).
    """
    if not neighbors:
        raise EmptyNeighborsError("cost volume needs at least one neighbor view")
    cur = f_m_cur.data.astype(np.float64)
    n_d = candidates.n_d
    h, w = f_m_cur.height, f_m_cur.width
    scores = np.zeros((n_d, h, w), dtype=np.float64)
    evidence = np.zeros((h, w), dtype=bool)
    for s in range(n_d):
        acc = np.zeros((h, w), dtype=np.float64)
        count = np.zeros((h, w), dtype=np.float64)
        for pose_n, feat_n in neighbors:
            warped, valid = warp_feature_to_view(
                feat_n, pose_n, pose_cur, intr_feat, candidates.values[s])
            # Re-normalize after interpolation: bilinear sampling shrinks
            # vector norms by a subpixel-phase-dependent factor, which would
            # otherwise bias scores toward integer-disparity candidates
            # instead of photoconsistent ones. The cosine is phase-clean.
            wd = warped.data.astype(np.float64)
            norms = np.linalg.norm(wd, axis=2, keepdims=True)
            wd = wd / (norms + 1e-8)
            dot = np.einsum("hwc,hwc->hw", cur, wd)
            acc += np.where(valid.data, dot, 0.0)
            count += valid.data
        evidence |= count > 0
        mean = np.divide(acc, count, out=np.zeros_like(acc), where=count > 0)
        scores[s] = box_filter_mean(mean, 1) if refine else mean
    return CostVolume(scores, evidence=evidence)


def softmax_over_depth(scores: np.ndarray, temperature: float) -> np.ndarray:
    """Temperature softmax along axis 0, numerically stabilized."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = scores / temperature
    z = z - z.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


def regress_depth_feature_res(volume: CostVolume, candidates: DepthCandidates,
                              temperature: float):
    """Softmax-weighted candidate average and max-probability confidence.

    Pixels the sweep never saw (volume.evidence False) behave exactly
    like the no-neighbor bypass: the flat zero scores already average the
    candidates back to the guide depth, and confidence is forced to 1.
    Returns float64 (H_f, W_f) arrays at feature resolution.
    """
    probs = softmax_over_depth(volume.scores, temperature)
    depth = np.sum(probs * candidates.values, axis=0)
    confidence = probs.max(axis=0)
    if volume.evidence is not None:
        confidence = np.where(volume.evidence, confidence, 1.0)
    return depth, confidence


def upsample_bilinear4(arr: np.ndarray) -> np.ndarray:
    """Bilinear x4 upsampling with clamp-to-edge sampling.

    Output pixel centers map back to (i + 0.5) / 4 on the source grid, so
    source and output pixel footprints stay aligned.
    """
    a = np.asarray(arr, dtype=np.float64)
    h, w = a.shape[:2]
    out_h, out_w = h * FEATURE_SCALE, w * FEATURE_SCALE
    u = (np.arange(out_w) + 0.5) / FEATURE_SCALE - 0.5
    v = (np.arange(out_h) + 0.5) / FEATURE_SCALE - 0.5
    uu, vv = np.meshgrid(np.clip(u, 0.0, w - 1.0), np.clip(v, 0.0, h - 1.0))
    values, _ = bilinear_sample_many(a, uu, vv)
    return values


def regress_depth_and_confidence(volume: CostVolume, candidates: DepthCandidates,
                                 temperature: float) -> tuple[DepthMap, np.ndarray]:
    """Full-resolution regressed depth and per-pixel confidence in [0, 1]."""
    depth_f, conf_f = regress_depth_feature_res(volume, candidates, temperature)
    depth = upsample_bilinear4(depth_f).astype(np.float32)
    confidence = np.clip(upsample_bilinear4(conf_f), 0.0, 1.0).astype(np.float32)
    return DepthMap(depth), confidence
