"""Pin-hole depth camera model and depth-space conversions.

A depth image stores, per pixel, the z coordinate (not the ray length) of
the nearest surface in the camera frame, in meters, with +inf marking no
return.  Pixel x grows with the image column, pixel y with the row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

# Kinect-like defaults: 512 x 424 grid, ~365 px focal length.
DEFAULT_WIDTH = 512
DEFAULT_HEIGHT = 424
DEFAULT_FOCAL = 0.00365          # m
DEFAULT_DENSITY = 1.0e5          # px / m


class DepthPoint(NamedTuple):
    """Continuous depth-space coordinates: pixel x, pixel y, depth [m]."""

    px: float
    py: float
    depth: float


@dataclass
class CameraModel:
    """Intrinsics plus the rigid transform from arm base to camera frame."""

    focal_length: float = DEFAULT_FOCAL
    density_x: float = DEFAULT_DENSITY
    density_y: float = DEFAULT_DENSITY
    principal_x: float = DEFAULT_WIDTH / 2.0
    principal_y: float = DEFAULT_HEIGHT / 2.0
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.focal_length <= 0.0 or self.density_x <= 0.0 or self.density_y <= 0.0:
            raise ValueError("focal length and pixel densities must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1 x 1")
        if not (0.0 <= self.principal_x < self.width and 0.0 <= self.principal_y < self.height):
            raise ValueError("principal point must lie inside the image")
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        if np.abs(self.rotation @ self.rotation.T - np.eye(3)).max() > 1e-9:
            raise ValueError("rotation must be orthonormal")
        if abs(np.linalg.det(self.rotation) - 1.0) > 1e-9:
            raise ValueError("rotation must be proper (det +1)")

    @property
    def fx(self) -> float:
        """Focal length in pixels along x."""
        return self.focal_length * self.density_x

    @property
    def fy(self) -> float:
        return self.focal_length * self.density_y

    def to_camera(self, point_base) -> np.ndarray:
        return self.rotation @ np.asarray(point_base, dtype=float) + self.translation

    def to_base(self, point_camera) -> np.ndarray:
        return self.rotation.T @ (np.asarray(point_camera, dtype=float) - self.translation)

    @classmethod
    def looking_at(cls, position, target, up=(0.0, 0.0, 1.0), **kwargs) -> "CameraModel":
        """Camera at ``position`` with the optical axis toward ``target``.

        ``up`` fixes the roll: image rows grow opposite to it.
        """
        position = np.asarray(position, dtype=float)
        z_cam = np.asarray(target, dtype=float) - position
        norm = np.linalg.norm(z_cam)
        if norm < 1e-12:
            raise ValueError("camera position and target coincide")
        z_cam = z_cam / norm
        up = np.asarray(up, dtype=float)
        x_cam = np.cross(z_cam, up)
        x_norm = np.linalg.norm(x_cam)
        if x_norm < 1e-12:
            raise ValueError("up direction parallel to the view axis")
        x_cam = x_cam / x_norm
        y_cam = np.cross(z_cam, x_cam)  # image y points opposite to up
        rotation = np.stack([x_cam, y_cam, z_cam])  # rows: camera axes in base
        translation = -rotation @ position
        return cls(rotation=rotation, translation=translation, **kwargs)


def depth_to_cartesian(point: DepthPoint, camera: CameraModel) -> np.ndarray:
    """Back-project a depth-space point to camera-frame Cartesian [m]."""
    if point.depth <= 0.0:
        raise ValueError("depth must be positive")
    x = (point.px - camera.principal_x) * point.depth / camera.fx
    y = (point.py - camera.principal_y) * point.depth / camera.fy
    return np.array([x, y, point.depth])


def project_to_depth(point_camera, camera: CameraModel) -> DepthPoint:
    """Project a camera-frame point to continuous depth-space coordinates."""
    point_camera = np.asarray(point_camera, dtype=float)
    z = float(point_camera[2])
    if z <= 0.0:
        raise ValueError("point lies at or behind the camera plane")
    px = camera.principal_x + camera.fx * point_camera[0] / z
    py = camera.principal_y + camera.fy * point_camera[1] / z
    return DepthPoint(px, py, z)


def distance_vector(point: DepthPoint, obstacle: DepthPoint, camera: CameraModel) -> np.ndarray:
    """Cartesian difference obstacle - point, straight from depth space.

    Algebraically identical to back-projecting both points and
    subtracting, but in one step per component.
    """
    vx = ((obstacle.px - camera.principal_x) * obstacle.depth
          - (point.px - camera.principal_x) * point.depth) / camera.fx
    vy = ((obstacle.py - camera.principal_y) * obstacle.depth
          - (point.py - camera.principal_y) * point.depth) / camera.fy
    vz = obstacle.depth - point.depth
    return np.array([vx, vy, vz])


@dataclass
class DepthImage:
    """Per-pixel depth grid plus the camera that produced it."""

    values: np.ndarray
    camera: CameraModel

    def __post_init__(self):
        # Contiguous float64 is what the compiled kernels expect.
        self.values = np.ascontiguousarray(self.values, dtype=float)
        expected = (self.camera.height, self.camera.width)
        if self.values.shape != expected:
            raise ValueError(f"depth grid shape {self.values.shape} != {expected}")

    @classmethod
    def empty(cls, camera: CameraModel) -> "DepthImage":
        return cls(np.full((camera.height, camera.width), np.inf), camera)
