"""Synthetic ground truth: textured axis-aligned scenes ray-cast to RGB-D.

Scenes are finite axis-aligned planes with procedural textures (checker,
gradient, solid) so every expected value has a closed form. Ray casting
through pixel centers returns exact analytic camera-frame depth;
background pixels get a finite far depth so downstream candidate math
stays well-posed. Everything is double precision and deterministic.

Texture contrast is kept moderate on generated scenes: re-render quality
gates measure the engine's blur, and a hard black/white checker would
measure the texture instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Intrinsics, Pose, yaw_pitch_pose
from .imaging import DepthMap, ImageRGB

BACKGROUND_DEPTH = 100.0
_EPS = 1e-9


@dataclass(frozen=True)
class Texture:
    """Procedural plane texture.

    kind "checker": color_a/color_b tiles of `period` scene units over the
    plane's two in-plane axes. kind "gradient": linear blend from color_a
    to color_b along in-plane axis `axis` (0 or 1) across the plane
    bounds. kind "solid": color_a everywhere.
    """

    kind: str
    color_a: tuple
    color_b: tuple = (0.0, 0.0, 0.0)
    period: float = 0.5
    axis: int = 0

    def __post_init__(self):
        if self.kind not in ("checker", "gradient", "solid"):
            raise ValueError(f"unknown texture kind {self.kind!r}")
        if self.kind == "checker" and self.period <= 0:
            raise ValueError("checker period must be positive")


@dataclass(frozen=True)
class TexturedPlane:
    """Axis-aligned finite plane: {x[normal_axis] = offset, bounds on the rest}.

    bounds_u / bounds_v are (lo, hi) along the two in-plane axes, which
    are the world axes other than normal_axis, in ascending index order.
    """

    normal_axis: int  # 0=x, 1=y, 2=z
    offset: float
    bounds_u: tuple
    bounds_v: tuple
    texture: Texture

    def __post_init__(self):
        if self.normal_axis not in (0, 1, 2):
            raise ValueError(f"normal_axis must be 0, 1 or 2, got {self.normal_axis}")
        if not (self.bounds_u[0] < self.bounds_u[1] and self.bounds_v[0] < self.bounds_v[1]):
            raise ValueError("plane bounds must have positive extent")

    @property
    def in_plane_axes(self) -> tuple:
        return tuple(a for a in (0, 1, 2) if a != self.normal_axis)


@dataclass
class SyntheticScene:
    planes: list
    background_color: tuple = (0.35, 0.4, 0.45)
    background_depth: float = BACKGROUND_DEPTH

    def __post_init__(self):
        if not self.planes:
            raise ValueError("scene needs at least one plane")


def _texture_colors(tex: Texture, pu: np.ndarray, pv: np.ndarray,
                    bounds_u, bounds_v) -> np.ndarray:
    ca = np.asarray(tex.color_a, dtype=np.float64)
    cb = np.asarray(tex.color_b, dtype=np.float64)
    if tex.kind == "solid":
        return np.broadcast_to(ca, pu.shape + (3,)).copy()
    if tex.kind == "checker":
        par = (np.floor(pu / tex.period) + np.floor(pv / tex.period)) % 2 == 0
        return np.where(par[..., None], ca, cb)
    lo, hi = (bounds_u if tex.axis == 0 else bounds_v)
    coord = pu if tex.axis == 0 else pv
    t = np.clip((coord - lo) / (hi - lo), 0.0, 1.0)
    return ca + (cb - ca) * t[..., None]


def render_ground_truth(scene: SyntheticScene, pose: Pose,
                        intr: Intrinsics) -> tuple[ImageRGB, DepthMap]:
    """Nearest-hit ray cast through pixel centers; exact analytic Z depth."""
    w, h = intr.width, intr.height
    uu, vv = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    dirs_cam = np.stack([
        (uu - intr.cx) / intr.fx,
        (vv - intr.cy) / intr.fy,
        np.ones_like(uu),
    ], axis=-1)
    dirs = dirs_cam.reshape(-1, 3) @ pose.rotation.T  # camera z=1 scaling: t == depth
    origin = pose.translation

    best_z = np.full(h * w, scene.background_depth, dtype=np.float64)
    color = np.tile(np.asarray(scene.background_color, dtype=np.float64), (h * w, 1))

    for plane in scene.planes:
        k = plane.normal_axis
        dk = dirs[:, k]
        safe = np.where(np.abs(dk) > _EPS, dk, _EPS)
        z = (plane.offset - origin[k]) / safe
        au, av = plane.in_plane_axes
        pu = origin[au] + z * dirs[:, au]
        pv = origin[av] + z * dirs[:, av]
        hit = (
            (np.abs(dk) > _EPS) & (z > _EPS)
            & (pu >= plane.bounds_u[0]) & (pu <= plane.bounds_u[1])
            & (pv >= plane.bounds_v[0]) & (pv <= plane.bounds_v[1])
            & (z < best_z)
        )
        if hit.any():
            tex = _texture_colors(plane.texture, pu[hit], pv[hit],
                                  plane.bounds_u, plane.bounds_v)
            color[hit] = tex
            best_z[hit] = z[hit]

    img = ImageRGB(np.clip(color.reshape(h, w, 3), 0.0, 1.0).astype(np.float32))
    depth = DepthMap(best_z.reshape(h, w).astype(np.float32))
    return img, depth


def _soft_palette(rng: np.random.Generator, scene_base: np.ndarray) -> tuple:
    base = np.clip(scene_base + rng.uniform(-0.05, 0.05, 3), 0.1, 0.9)
    delta = 0.03 + 0.05 * rng.random()
    ca = np.clip(base - delta, 0.0, 1.0)
    cb = np.clip(base + delta, 0.0, 1.0)
    return tuple(ca), tuple(cb)


def _random_texture(rng: np.random.Generator, scene_base: np.ndarray) -> Texture:
    # surfaces share one scene palette (coherently decorated interiors);
    # per-plane jitter and tile contrast stay small relative to it
    ca, cb = _soft_palette(rng, scene_base)
    if rng.random() < 0.5:
        return Texture("checker", ca, cb, period=float(0.8 + 0.7 * rng.random()))
    return Texture("gradient", ca, cb, axis=int(rng.integers(0, 2)))


def build_synthetic_scene(seed: int, kind: str) -> SyntheticScene:
    """Deterministic toy scene per (seed, kind).

    kinds: "room" (enclosing box around the origin), "corridor" (long box
    along +z), "plane_field" (staggered fronto-parallel planes plus a
    backdrop).
    """
    rng = np.random.default_rng(seed)
    base = 0.35 + 0.3 * rng.random(3)
    planes = []
    if kind == "room":
        half, ytop, ybot = 2.0, -1.5, 1.5
        # y is down: floor at +y, ceiling at -y
        planes.append(TexturedPlane(1, ybot, (-half, half), (-half, half), _random_texture(rng, base)))
        planes.append(TexturedPlane(1, ytop, (-half, half), (-half, half), _random_texture(rng, base)))
        for offset in (-half, half):
            planes.append(TexturedPlane(0, offset, (ytop, ybot), (-half, half), _random_texture(rng, base)))
            planes.append(TexturedPlane(2, offset, (-half, half), (ytop, ybot), _random_texture(rng, base)))
    elif kind == "corridor":
        length = 8.0
        planes.append(TexturedPlane(1, 1.0, (-1.0, 1.0), (-1.0, length), _random_texture(rng, base)))
        planes.append(TexturedPlane(1, -1.0, (-1.0, 1.0), (-1.0, length), _random_texture(rng, base)))
        planes.append(TexturedPlane(0, 1.0, (-1.0, 1.0), (-1.0, length), _random_texture(rng, base)))
        planes.append(TexturedPlane(0, -1.0, (-1.0, 1.0), (-1.0, length), _random_texture(rng, base)))
        planes.append(TexturedPlane(2, length, (-1.0, 1.0), (-1.0, 1.0), _random_texture(rng, base)))
    elif kind == "plane_field":
        for i in range(4):
            z = 1.5 + 0.9 * i + 0.3 * rng.random()
            cx_, cy_ = rng.uniform(-0.8, 0.8, size=2)
            half = 0.5 + 0.4 * rng.random()
            planes.append(TexturedPlane(
                2, float(z), (cx_ - half, cx_ + half), (cy_ - half, cy_ + half),
                _random_texture(rng, base)))
        planes.append(TexturedPlane(2, 6.0, (-6.0, 6.0), (-6.0, 6.0), _random_texture(rng, base)))
    else:
        raise ValueError(f"unknown scene kind {kind!r}")
    return SyntheticScene(planes)


def standard_trajectories(kind: str, n: int, center=(0.0, 0.0, 0.0),
                          radius: float = 2.0, step: float = 0.2) -> list:
    """Deterministic pose sequences: "panorama", "walk_forward", "orbit"."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    center = np.asarray(center, dtype=np.float64)
    poses = []
    if kind == "panorama":
        for i in range(n):
            poses.append(yaw_pitch_pose(center, 360.0 * i / n))
    elif kind == "walk_forward":
        for i in range(n):
            poses.append(Pose(np.eye(3), center + np.array([0.0, 0.0, step * i])))
    elif kind == "orbit":
        for i in range(n):
            theta = 360.0 * i / n
            rad = np.deg2rad(theta)
            position = center + radius * np.array([np.sin(rad), 0.0, np.cos(rad)])
            poses.append(yaw_pitch_pose(position, theta + 180.0))
    else:
        raise ValueError(f"unknown trajectory kind {kind!r}")
    return poses
