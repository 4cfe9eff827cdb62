"""Geometric primitives for synthetic depth rendering and exact distances.

All primitives are described in the arm base frame; the render path
converts them to the camera frame first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(3)
        if self.radius <= 0.0:
            raise ValueError("sphere radius must be positive")


@dataclass
class Box:
    """Oriented box: rotation columns are the local axes in the parent frame."""

    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(3)
        self.half_extents = np.asarray(self.half_extents, dtype=float).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        if np.any(self.half_extents <= 0.0):
            raise ValueError("box half extents must be positive")
        if np.abs(self.rotation @ self.rotation.T - np.eye(3)).max() > 1e-9:
            raise ValueError("box rotation must be orthonormal")

    def contains(self, point, margin: float = 0.0) -> bool:
        local = self.rotation.T @ (np.asarray(point, dtype=float) - self.center)
        return bool(np.all(np.abs(local) <= self.half_extents + margin))


@dataclass
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)


def closest_surface_point(primitive, point) -> np.ndarray:
    """Point of the primitive closest to ``point`` (surface for solids)."""
    point = np.asarray(point, dtype=float)
    if isinstance(primitive, Sphere):
        offset = point - primitive.center
        norm = np.linalg.norm(offset)
        if norm < 1e-12:
            # Query at the center: any surface point is closest, pick +x.
            return primitive.center + np.array([primitive.radius, 0.0, 0.0])
        return primitive.center + offset * (primitive.radius / norm)
    if isinstance(primitive, Box):
        local = primitive.rotation.T @ (point - primitive.center)
        clamped = np.clip(local, -primitive.half_extents, primitive.half_extents)
        if np.any(clamped != local):
            return primitive.rotation @ clamped + primitive.center
        # Inside: push out through the nearest face.
        gap = primitive.half_extents - np.abs(local)
        k = int(np.argmin(gap))
        sign = 1.0 if local[k] >= 0.0 else -1.0
        clamped[k] = sign * primitive.half_extents[k]
        return primitive.rotation @ clamped + primitive.center
    if isinstance(primitive, PointCloud):
        if primitive.points.shape[0] == 0:
            raise ValueError("empty point cloud has no closest point")
        d2 = np.sum((primitive.points - point) ** 2, axis=1)
        return primitive.points[int(np.argmin(d2))].copy()
    raise TypeError(f"unsupported primitive {type(primitive).__name__}")
