"""Gaussian scene set, per-pixel decoding, and depth-constrained fusion.

Decoding is closed-form: one isotropic Gaussian per pixel, centered at the
unprojected pixel center, colored by the image, scaled to a one-pixel
footprint at its depth (scale = depth * k_scale / fx), identity rotation,
opacity from clamped confidence. Each rule lives here so a learned
parameter head can replace it without touching callers.

Fusion adds only those new Gaussians whose pixel lacks an existing global
Gaussian within relative depth tolerance delta: global centers are
projected into the current view, bucketed by their floored pixel, and a
local Gaussian at (x, y, d) is dropped iff some bucketed global satisfies
|d - d_g| < delta * d. Existing globals are never moved or removed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompleteDepthError, PlySchemaError, SizeMismatchError
from .geometry import Intrinsics, Pose, project_points, unproject_grid
from .imaging import DepthMap, ImageRGB, Mask

OPACITY_FLOOR = 0.1
OPACITY_CEIL = 0.95


@dataclass
class GaussianSet:
    """Structure-of-arrays scene; float32 params, int32 source step."""

    center: np.ndarray    # (N, 3) world
    scale: np.ndarray     # (N,) isotropic radius, scene units
    rotation: np.ndarray  # (N, 4) unit quaternion (w, x, y, z)
    opacity: np.ndarray   # (N,) in (0, 1]
    color: np.ndarray     # (N, 3) RGB in [0, 1]
    source_step: np.ndarray  # (N,) int32

    def __post_init__(self):
        self.center = np.ascontiguousarray(self.center, dtype=np.float32).reshape(-1, 3)
        n = len(self.center)
        self.scale = np.ascontiguousarray(self.scale, dtype=np.float32).reshape(n)
        self.rotation = np.ascontiguousarray(self.rotation, dtype=np.float32).reshape(n, 4)
        self.opacity = np.ascontiguousarray(self.opacity, dtype=np.float32).reshape(n)
        self.color = np.ascontiguousarray(self.color, dtype=np.float32).reshape(n, 3)
        self.source_step = np.ascontiguousarray(self.source_step, dtype=np.int32).reshape(n)

    def __len__(self) -> int:
        return len(self.center)

    @staticmethod
    def empty() -> "GaussianSet":
        return GaussianSet(
            np.zeros((0, 3)), np.zeros(0), np.zeros((0, 4)),
            np.zeros(0), np.zeros((0, 3)), np.zeros(0, dtype=np.int32))

    def validate(self) -> None:
        if not np.isfinite(self.center).all():
            raise ValueError("non-finite Gaussian center")
        if len(self) and (self.scale <= 0).any():
            raise ValueError("non-positive Gaussian scale")
        if len(self) and ((self.opacity <= 0) | (self.opacity > 1)).any():
            raise ValueError("opacity outside (0, 1]")
        if len(self):
            norms = np.linalg.norm(self.rotation.astype(np.float64), axis=1)
            if np.abs(norms - 1.0).max() > 1e-5:
                raise ValueError("non-unit quaternion")

    def concat(self, other: "GaussianSet") -> "GaussianSet":
        return GaussianSet(
            np.concatenate([self.center, other.center]),
            np.concatenate([self.scale, other.scale]),
            np.concatenate([self.rotation, other.rotation]),
            np.concatenate([self.opacity, other.opacity]),
            np.concatenate([self.color, other.color]),
            np.concatenate([self.source_step, other.source_step]),
        )

    def select(self, index) -> "GaussianSet":
        return GaussianSet(
            self.center[index], self.scale[index], self.rotation[index],
            self.opacity[index], self.color[index], self.source_step[index])

    def equals_bitwise(self, other: "GaussianSet") -> bool:
        return (
            len(self) == len(other)
            and self.center.tobytes() == other.center.tobytes()
            and self.scale.tobytes() == other.scale.tobytes()
            and self.rotation.tobytes() == other.rotation.tobytes()
            and self.opacity.tobytes() == other.opacity.tobytes()
            and self.color.tobytes() == other.color.tobytes()
            and self.source_step.tobytes() == other.source_step.tobytes()
        )


@dataclass(frozen=True)
class FusionParams:
    """Relative depth tolerance for redundancy pruning."""

    delta: float

    def __post_init__(self):
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must be in [0, 1), got {self.delta}")


@dataclass
class LocalGaussians:
    """Freshly decoded Gaussians plus their originating pixels and depths."""

    gaussians: GaussianSet
    pixel_x: np.ndarray  # (N,) int32 column
    pixel_y: np.ndarray  # (N,) int32 row
    depth: np.ndarray    # (N,) float32 camera depth at decode time

    def __post_init__(self):
        n = len(self.gaussians)
        self.pixel_x = np.ascontiguousarray(self.pixel_x, dtype=np.int32).reshape(n)
        self.pixel_y = np.ascontiguousarray(self.pixel_y, dtype=np.int32).reshape(n)
        self.depth = np.ascontiguousarray(self.depth, dtype=np.float32).reshape(n)

    def __len__(self) -> int:
        return len(self.gaussians)


def decode_gaussians(image: ImageRGB, depth: DepthMap, confidence: np.ndarray,
                     pose: Pose, intr: Intrinsics, step: int,
                     k_scale: float = 1.0,
                     restrict_to: Mask | None = None) -> LocalGaussians:
    """One Gaussian per pixel (or per True pixel of restrict_to)."""
    if np.any(depth.data == 0):
        raise IncompleteDepthError("decode requires a fully valid depth map")
    if image.data.shape[:2] != depth.data.shape:
        raise SizeMismatchError(
            f"image {image.data.shape[:2]} vs depth {depth.data.shape}")
    h, w = depth.data.shape
    conf = np.broadcast_to(np.asarray(confidence, dtype=np.float64), (h, w))

    centers = unproject_grid(pose, intr, depth.data)
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    keep = np.ones((h, w), dtype=bool) if restrict_to is None else restrict_to.data
    keep_flat = keep.reshape(-1)

    n = int(keep_flat.sum())
    d_flat = depth.data.reshape(-1)[keep_flat]
    gset = GaussianSet(
        center=centers.reshape(-1, 3)[keep_flat].astype(np.float32),
        scale=(d_flat.astype(np.float64) * k_scale / intr.fx).astype(np.float32),
        rotation=np.tile(np.array([1.0, 0.0, 0.0, 0.0], dtype=np.float32), (n, 1)),
        opacity=np.clip(conf.reshape(-1)[keep_flat], OPACITY_FLOOR, OPACITY_CEIL).astype(np.float32),
        color=image.data.reshape(-1, 3)[keep_flat],
        source_step=np.full(n, step, dtype=np.int32),
    )
    return LocalGaussians(
        gaussians=gset,
        pixel_x=xx.reshape(-1)[keep_flat],
        pixel_y=yy.reshape(-1)[keep_flat],
        depth=d_flat,
    )


def fuse_incremental(g_global: GaussianSet, local: LocalGaussians, pose: Pose,
                     intr: Intrinsics, params: FusionParams) -> GaussianSet:
    """Merge non-redundant locals into the global set.

    Returns a new set; the global arrays are never mutated. With
    delta = 0 the strict inequality never fires and every local is added.
    """
    if len(local) and (
            local.pixel_x.max() >= intr.width or local.pixel_y.max() >= intr.height
            or local.pixel_x.min() < 0 or local.pixel_y.min() < 0):
        raise SizeMismatchError("local pixel coordinates outside the image grid")
    if len(g_global) == 0 or len(local) == 0:
        return g_global.concat(local.gaussians)

    u, v, z, in_front = project_points(pose, intr, g_global.center.astype(np.float64))
    xg = np.floor(u).astype(np.int64)
    yg = np.floor(v).astype(np.int64)
    visible = in_front & (xg >= 0) & (xg < intr.width) & (yg >= 0) & (yg < intr.height)

    # Bucket visible globals by pixel: one sort, then per-local range lookup.
    pix_g = yg[visible] * intr.width + xg[visible]
    depth_g = z[visible]
    order = np.argsort(pix_g, kind="stable")
    pix_g = pix_g[order]
    depth_g = depth_g[order]

    pix_l = local.pixel_y.astype(np.int64) * intr.width + local.pixel_x.astype(np.int64)
    d_l = local.depth.astype(np.float64)
    lo = np.searchsorted(pix_g, pix_l, side="left")
    hi = np.searchsorted(pix_g, pix_l, side="right")

    # Flatten every (local, same-pixel global) pair and test
    # |d_local - d_global| < delta * d_local in one shot.
    counts = hi - lo
    total = int(counts.sum())
    redundant = np.zeros(len(local), dtype=bool)
    if total:
        idx_local = np.repeat(np.arange(len(local)), counts)
        offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
        flat = (np.arange(total) - np.repeat(offsets, counts)
                + np.repeat(lo, counts))
        close = np.abs(d_l[idx_local] - depth_g[flat]) < params.delta * d_l[idx_local]
        redundant[idx_local[close]] = True

    return g_global.concat(local.gaussians.select(~redundant))


# ---------------------------------------------------------------------------
# PLY codec (binary little-endian, fixed vertex schema)
# ---------------------------------------------------------------------------

PLY_PROPERTIES = [
    ("x", "float"), ("y", "float"), ("z", "float"),
    ("scale", "float"),
    ("qw", "float"), ("qx", "float"), ("qy", "float"), ("qz", "float"),
    ("opacity", "float"),
    ("red", "float"), ("green", "float"), ("blue", "float"),
    ("source_step", "int"),
]

_PLY_TYPE_MAP = {
    "float": ("<f4", 4), "float32": ("<f4", 4),
    "int": ("<i4", 4), "int32": ("<i4", 4),
    "uint": ("<u4", 4), "uint32": ("<u4", 4),
    "double": ("<f8", 8), "float64": ("<f8", 8),
    "uchar": ("<u1", 1), "uint8": ("<u1", 1),
    "char": ("<i1", 1), "int8": ("<i1", 1),
    "short": ("<i2", 2), "int16": ("<i2", 2),
    "ushort": ("<u2", 2), "uint16": ("<u2", 2),
}


def encode_ply(g: GaussianSet) -> bytes:
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {len(g)}"]
    header += [f"property {t} {name}" for name, t in PLY_PROPERTIES]
    header.append("end_header")
    packed = np.zeros(len(g), dtype=[(name, "<f4" if t == "float" else "<i4")
                                     for name, t in PLY_PROPERTIES])
    packed["x"], packed["y"], packed["z"] = g.center[:, 0], g.center[:, 1], g.center[:, 2]
    packed["scale"] = g.scale
    packed["qw"], packed["qx"] = g.rotation[:, 0], g.rotation[:, 1]
    packed["qy"], packed["qz"] = g.rotation[:, 2], g.rotation[:, 3]
    packed["opacity"] = g.opacity
    packed["red"], packed["green"], packed["blue"] = g.color[:, 0], g.color[:, 1], g.color[:, 2]
    packed["source_step"] = g.source_step
    return ("\n".join(header) + "\n").encode("ascii") + packed.tobytes()


def decode_ply(blob: bytes) -> GaussianSet:
    end = blob.find(b"end_header\n")
    if end < 0:
        raise PlySchemaError("missing end_header")
    header_lines = blob[:end].decode("ascii", errors="replace").splitlines()
    body = blob[end + len(b"end_header\n"):]

    if not header_lines or header_lines[0].strip() != "ply":
        raise PlySchemaError("not a PLY file")
    count = None
    props = []  # (name, numpy dtype, size)
    in_vertex = False
    for line in header_lines[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            if parts[1] != "binary_little_endian":
                raise PlySchemaError(f"unsupported format {parts[1]}")
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                count = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            if parts[1] == "list":
                raise PlySchemaError("list properties not supported in vertex element")
            if parts[1] not in _PLY_TYPE_MAP:
                raise PlySchemaError(f"unknown property type {parts[1]}")
            dt, size = _PLY_TYPE_MAP[parts[1]]
            props.append((parts[2], dt, size))
    if count is None:
        raise PlySchemaError("missing vertex element")

    names = [p[0] for p in props]
    color_names = ["red", "green", "blue"]
    required = ["x", "y", "z", "scale", "qw", "qx", "qy", "qz", "opacity",
                *color_names, "source_step"]
    for name in required:
        if name not in names:
            raise PlySchemaError(f"missing vertex property '{name}'")

    rec = np.dtype([(name, dt) for name, dt, _ in props])
    need = rec.itemsize * count
    if len(body) < need:
        raise PlySchemaError(
            f"vertex payload truncated ({len(body)} of {need} bytes)")
    table = np.frombuffer(body[:need], dtype=rec)

    def col(name, dtype):
        return table[name].astype(dtype)

    return GaussianSet(
        center=np.stack([col("x", np.float32), col("y", np.float32),
                         col("z", np.float32)], axis=1),
        scale=col("scale", np.float32),
        rotation=np.stack([col("qw", np.float32), col("qx", np.float32),
                           col("qy", np.float32), col("qz", np.float32)], axis=1),
        opacity=col("opacity", np.float32),
        color=np.stack([col("red", np.float32), col("green", np.float32),
                        col("blue", np.float32)], axis=1),
        source_step=col("source_step", np.int32),
    )


def save_ply(path, g: GaussianSet) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_ply(g))


def load_ply(path) -> GaussianSet:
    with open(path, "rb") as fh:
        return decode_ply(fh.read())
