"""Camera models, rigid transforms, and the pose-distance metric.

Coordinate conventions (fixed; every module inherits them):

  World / camera frames (right-handed):
    - Pose stores a camera-to-world transform: x_world = R @ x_cam + t.
    - The camera looks down its local +Z axis; +X is right, +Y is down
      (matching the image v axis).

  Image frame:
    - Pixel origin at the top-left corner, u right, v down, in pixels.
    - Continuous pixel coordinates: integer pixel (i, j) spans
      u in [j, j+1), v in [i, i+1) and has its center at (j+0.5, i+0.5).
    - Projection of a camera-frame point (X, Y, Z), Z > 0:
        u = fx * X / Z + cx,   v = fy * Y / Z + cy,   depth = Z.

Pose distance is the Frobenius norm of the difference of the two 4x4
homogeneous camera-to-world matrices. Rotation entries are dimensionless
while translation carries scene units, so a `rotation_weight` factor
scales the rotation block (default 1.0 keeps the literal matrix norm).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BehindCameraError, InvalidDepthError

_ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole parameters. Focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (0 < self.cx < self.width):
            raise ValueError(f"cx={self.cx} outside (0, {self.width})")
        if not (0 < self.cy < self.height):
            raise ValueError(f"cy={self.cy} outside (0, {self.height})")

    def scaled(self, factor: float) -> "Intrinsics":
        """Intrinsics of the same camera at a resampled resolution."""
        return Intrinsics(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=self.cx * factor,
            cy=self.cy * factor,
            width=int(round(self.width * factor)),
            height=int(round(self.height * factor)),
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
        }

    @staticmethod
    def from_dict(d: dict) -> "Intrinsics":
        return Intrinsics(
            fx=float(d["fx"]), fy=float(d["fy"]), cx=float(d["cx"]), cy=float(d["cy"]),
            width=int(d["width"]), height=int(d["height"]),
        )


@dataclass(frozen=True)
class Pose:
    """Camera-to-world rigid transform."""

    rotation: np.ndarray  # (3, 3) orthonormal, det +1
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err > _ORTHO_TOL:
            raise ValueError(f"rotation not orthonormal (max |R^T R - I| = {err:.2e})")
        det = np.linalg.det(r)
        if abs(det - 1.0) > _ORTHO_TOL:
            raise ValueError(f"rotation determinant {det:.8f} != +1")

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous camera-to-world matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "Pose") -> "Pose":
        """This pose followed by `other` expressed in this pose's frame."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        """Transform (..., 3) world points into the camera frame."""
        p = np.asarray(points, dtype=np.float64)
        return (p - self.translation) @ self.rotation

    def camera_to_world(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def to_array12(self) -> list:
        """Row-major 3x4 [R | t] serialization used in session files and the API."""
        m = np.concatenate([self.rotation, self.translation.reshape(3, 1)], axis=1)
        return [float(v) for v in m.reshape(-1)]

    @staticmethod
    def from_array12(values) -> "Pose":
        a = np.asarray(values, dtype=np.float64).reshape(3, 4)
        return Pose(a[:, :3], a[:, 3])


def project_point(pose: Pose, intr: Intrinsics, x_world) -> tuple[float, float, float]:
    """Project one world point; returns continuous (u, v) and camera depth.

    Out-of-image (u, v) is a valid result. A point at or behind the camera
    plane raises BehindCameraError.
    """
    xc = pose.world_to_camera(np.asarray(x_world, dtype=np.float64).reshape(3))
    z = xc[2]
    if z <= 0:
        raise BehindCameraError(f"point has camera depth {z}")
    u = intr.fx * xc[0] / z + intr.cx
    v = intr.fy * xc[1] / z + intr.cy
    return float(u), float(v), float(z)


def project_points(pose: Pose, intr: Intrinsics, points: np.ndarray):
    """Vectorized projection of (N, 3) world points.

    Returns (u, v, depth, in_front) arrays; u/v are only meaningful where
    in_front is True (depth > 0).
    """
    xc = pose.world_to_camera(points)
    z = xc[..., 2]
    in_front = z > 0
    safe_z = np.where(in_front, z, 1.0)
    u = intr.fx * xc[..., 0] / safe_z + intr.cx
    v = intr.fy * xc[..., 1] / safe_z + intr.cy
    return u, v, z, in_front


def unproject_pixel(pose: Pose, intr: Intrinsics, u: float, v: float, d: float) -> np.ndarray:
    """Lift a continuous pixel coordinate at camera depth d to a world point."""
    if d <= 0:
        raise InvalidDepthError(f"depth must be positive, got {d}")
    xc = np.array([
        (u - intr.cx) / intr.fx * d,
        (v - intr.cy) / intr.fy * d,
        d,
    ])
    return pose.camera_to_world(xc)


def unproject_grid(pose: Pose, intr: Intrinsics, depth: np.ndarray) -> np.ndarray:
    """Unproject every pixel center of an (H, W) depth array to world points.

    Returns (H, W, 3). All depths must be positive.
    """
    d = np.asarray(depth, dtype=np.float64)
    if np.any(d <= 0):
        raise InvalidDepthError("depth grid contains non-positive values")
    h, w = d.shape
    u = np.arange(w, dtype=np.float64) + 0.5
    v = np.arange(h, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(u, v)
    xc = np.stack([
        (uu - intr.cx) / intr.fx * d,
        (vv - intr.cy) / intr.fy * d,
        d,
    ], axis=-1)
    return pose.camera_to_world(xc)


def relative_pose(a: Pose, b: Pose) -> Pose:
    """Pose of b expressed in a's frame: a.compose(result) == b."""
    r = a.rotation.T @ b.rotation
    t = a.rotation.T @ (b.translation - a.translation)
    # Re-orthonormalize against accumulated roundoff so the result always
    # passes the Pose invariant.
    u, _, vt = np.linalg.svd(r)
    r = u @ vt
    return Pose(r, t)


def pose_distance(a: Pose, b: Pose, rotation_weight: float = 1.0) -> float:
    """Frobenius norm of the 4x4 homogeneous matrix difference.

    rotation_weight scales the rotation block before taking the norm.
    """
    dr = a.rotation - b.rotation
    dt = a.translation - b.translation
    sq = (rotation_weight ** 2) * float(np.sum(dr * dr)) + float(np.sum(dt * dt))
    return float(np.sqrt(sq))


def yaw_pitch_pose(position, yaw_deg: float, pitch_deg: float = 0.0) -> Pose:
    """Camera-to-world pose from a position and yaw/pitch angles.

    Yaw rotates about the world -Y (up) axis; yaw 0 faces +Z, positive yaw
    turns toward +X. Pitch rotates about the camera's local X axis; positive
    pitch looks up (image up = -Y world).
    """
    y = np.deg2rad(yaw_deg)
    p = np.deg2rad(pitch_deg)
    ry = np.array([
        [np.cos(y), 0.0, np.sin(y)],
        [0.0, 1.0, 0.0],
        [-np.sin(y), 0.0, np.cos(y)],
    ])
    rx = np.array([
        [1.0, 0.0, 0.0],
        [0.0, np.cos(p), -np.sin(p)],
        [0.0, np.sin(p), np.cos(p)],
    ])
    return Pose(ry @ rx, np.asarray(position, dtype=np.float64))
