"""Pinhole cameras, rigid transforms and RGB-D back-projection.

Conventions: camera frame is x right, y down, z forward. Pixel (u, v) is
column u, row v, with pixel centers at integer coordinates. Depth is metric
distance along the camera z-axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InputError(ValueError):
    """Rejected input: bad shapes, out-of-range values, mismatched sizes."""


class BehindCameraError(InputError):
    """A point lies at or behind the camera plane."""


Z_MIN = 1e-6


@dataclass(frozen=True, eq=False)
class Camera:
    fx: float
    fy: float
    cu: float
    cv: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        tr = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)
        if not (self.fx > 0 and self.fy > 0):
            raise InputError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 < self.cu < self.width and 0 < self.cv < self.height):
            raise InputError(
                f"principal point ({self.cu}, {self.cv}) outside image {self.width}x{self.height}"
            )
        if not (np.all(np.isfinite(rot)) and np.all(np.isfinite(tr))):
            raise InputError("camera pose must be finite")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > 1e-9 or abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise InputError("pose rotation must be orthonormal with determinant +1")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cu], [0.0, self.fy, self.cv], [0.0, 0.0, 1.0]])

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        """Map world points (..., 3) into the camera frame."""
        return (np.asarray(points, dtype=np.float64) - self.translation) @ self.rotation

    def camera_to_world(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def with_pose(self, rotation, translation) -> "Camera":
        return Camera(self.fx, self.fy, self.cu, self.cv, self.width, self.height, rotation, translation)


def look_camera(position, yaw: float, width: int, height: int, fov_deg: float = 90.0) -> Camera:
    """Level camera at `position` looking along heading `yaw` (radians, world z up)."""
    f = 0.5 * width / np.tan(np.radians(fov_deg) / 2.0)
    forward = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    right = np.array([np.sin(yaw), -np.cos(yaw), 0.0])
    down = np.array([0.0, 0.0, -1.0])
    rot = np.stack([right, down, forward], axis=1)
    return Camera(f, f, (width - 1) / 2.0, (height - 1) / 2.0, width, height, rot, np.asarray(position, float))


@dataclass
class PointCloud:
    points: np.ndarray
    colors: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        n = len(self.points)
        if len(self.colors) != n or len(self.labels) != n:
            raise InputError(
                f"points/colors/labels length mismatch: {n}/{len(self.colors)}/{len(self.labels)}"
            )
        if not np.all(np.isfinite(self.points)):
            raise InputError("point coordinates must be finite")

    def __len__(self) -> int:
        return len(self.points)

    @staticmethod
    def concatenate(clouds: list["PointCloud"]) -> "PointCloud":
        if not clouds:
            return PointCloud(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0, dtype=np.int64))
        return PointCloud(
            np.concatenate([c.points for c in clouds]),
            np.concatenate([c.colors for c in clouds]),
            np.concatenate([c.labels for c in clouds]),
        )


def back_project(u, v, depth, cam: Camera) -> np.ndarray:
    """Lift pixel (u, v) with metric depth into the camera frame.

    Accepts scalars or equal-length arrays; returns (..., 3).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    z = np.asarray(depth, dtype=np.float64)
    if not np.all(np.isfinite(z)) or np.any(z <= 0):
        raise InputError("depth must be positive and finite")
    if np.any(u < -0.5) or np.any(u > cam.width - 0.5) or np.any(v < -0.5) or np.any(v > cam.height - 0.5):
        raise InputError("pixel outside image bounds")
    x = (u - cam.cu) * z / cam.fx
    y = (v - cam.cv) * z / cam.fy
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def project(points, cam: Camera) -> np.ndarray:
    """Project world points to (u, v, z_cam). Raises if any point is behind the camera."""
    pc = cam.world_to_camera(points)
    z = pc[..., 2]
    if np.any(z <= Z_MIN):
        raise BehindCameraError("point at or behind camera plane")
    u = cam.fx * pc[..., 0] / z + cam.cu
    v = cam.fy * pc[..., 1] / z + cam.cv
    return np.stack([u, v, z], axis=-1)


def frame_to_cloud(rgb, depth, labels, cam: Camera, stride: int = 2) -> PointCloud:
    """Back-project every `stride`-th pixel with positive depth into world coordinates."""
    rgb = np.asarray(rgb, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    labels = np.asarray(labels)
    h, w = cam.height, cam.width
    if rgb.shape != (h, w, 3) or depth.shape != (h, w) or labels.shape != (h, w):
        raise InputError(
            f"image dimensions {rgb.shape}/{depth.shape}/{labels.shape} do not match camera {h}x{w}"
        )
    if stride < 1:
        raise InputError("stride must be >= 1")
    vv, uu = np.mgrid[0:h:stride, 0:w:stride]
    d = depth[vv, uu]
    keep = np.isfinite(d) & (d > 0)
    uu, vv, d = uu[keep], vv[keep], d[keep]
    if len(d) == 0:
        return PointCloud.concatenate([])
    pts = cam.camera_to_world(back_project(uu, vv, d, cam))
    return PointCloud(pts, rgb[vv, uu], labels[vv, uu].astype(np.int64))
