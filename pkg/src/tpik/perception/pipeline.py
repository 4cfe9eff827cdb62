"""Depth-space perception pipeline.

Render a synthetic depth image of the scene, blank out the pixels the arm
itself occupies, then find the nearest remaining return around each
monitored control point.  All heavy per-pixel work happens in the kernel
backend; this module does frame changes, packing, and bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..kinematics import ArmModel, Chain
from . import backend
from .camera import CameraModel, DepthImage
from .primitives import Box, PointCloud, Sphere

# Links are carved out of the image with grown boxes so edge pixels of the
# arm cannot masquerade as obstacles.
DEFAULT_REMOVAL_INFLATION = 0.05


@dataclass
class SurveillanceRegion:
    """Cube of interest: inf-norm ball of radius rho around a base-frame point."""

    target_base: np.ndarray
    rho: float = 0.5
    label: str = ""

    def __post_init__(self):
        self.target_base = np.asarray(self.target_base, dtype=float).reshape(3)
        if self.rho <= 0.0:
            raise ValueError("region radius must be positive")


@dataclass
class DistanceResult:
    """Minimum-distance measurement for one surveillance region."""

    valid: bool
    label: str = ""
    distance: float = np.inf
    closest_base: Optional[np.ndarray] = None
    vector_base: Optional[np.ndarray] = None   # obstacle - target
    pixel: Optional[tuple] = None              # (row, col)


def _pack_scene(primitives, camera: CameraModel):
    spheres = []
    boxes = []
    points = []
    for prim in primitives:
        if isinstance(prim, Sphere):
            spheres.append(np.append(camera.to_camera(prim.center), prim.radius))
        elif isinstance(prim, Box):
            rot = camera.rotation @ prim.rotation
            row = np.empty(15)
            row[0:3] = camera.to_camera(prim.center)
            row[3:12] = rot.reshape(-1)
            row[12:15] = prim.half_extents
            boxes.append(row)
        elif isinstance(prim, PointCloud):
            points.append(prim.points @ camera.rotation.T + camera.translation)
        else:
            raise TypeError(f"cannot render {type(prim).__name__}")
    sphere_arr = np.array(spheres, dtype=float).reshape(-1, 4)
    box_arr = np.array(boxes, dtype=float).reshape(-1, 15)
    point_arr = (np.vstack(points) if points else np.zeros((0, 3)))
    return sphere_arr, box_arr, np.ascontiguousarray(point_arr, dtype=float)


def render_depth(primitives, camera: CameraModel, quantize_mm: bool = False,
                 kernel_backend=None) -> DepthImage:
    """Z-buffer render of the scene into a depth image.

    ``quantize_mm`` snaps finite depths to a 1 mm grid, imitating the
    integer output of a real sensor.
    """
    kern = backend.get_kernels(kernel_backend)
    spheres, boxes, points = _pack_scene(primitives, camera)
    values = kern.render(camera.width, camera.height, camera.fx, camera.fy,
                         camera.principal_x, camera.principal_y,
                         spheres, boxes, points)
    if quantize_mm:
        finite = np.isfinite(values)
        values = np.where(finite, np.round(values * 1000.0) / 1000.0, values)
    return DepthImage(values, camera)


def robot_link_boxes(model: ArmModel, q, inflation: float = 0.0) -> list:
    """Oriented boxes covering each link segment at configuration ``q``."""
    chain = Chain(model, q)
    radius = model.link_radius + inflation
    out = []
    for i in range(1, model.n + 1):
        start = chain.origins[i - 1]
        end = chain.origins[i]
        seg = end - start
        length = np.linalg.norm(seg)
        if length < 1e-9:
            out.append(Box(end, (radius, radius, radius)))
            continue
        axis = seg / length
        helper = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        x_axis = np.cross(helper, axis)
        x_axis = x_axis / np.linalg.norm(x_axis)
        y_axis = np.cross(axis, x_axis)
        rot = np.column_stack([x_axis, y_axis, axis])
        out.append(Box((start + end) / 2.0,
                       (radius, radius, length / 2.0 + radius), rot))
    return out


def remove_robot(image: DepthImage, model: ArmModel, q,
                 inflation: float = DEFAULT_REMOVAL_INFLATION,
                 kernel_backend=None) -> DepthImage:
    """Blank out pixels whose back-projection falls inside any link box."""
    kern = backend.get_kernels(kernel_backend)
    camera = image.camera
    _, boxes, _ = _pack_scene(robot_link_boxes(model, q, inflation), camera)
    mask = kern.removal_mask(image.values, camera.fx, camera.fy,
                             camera.principal_x, camera.principal_y, boxes)
    values = np.where(np.asarray(mask, dtype=bool), np.inf, image.values)
    return DepthImage(values, camera)


def _region_rect(target_cam, rho, camera: CameraModel):
    """Pixel rect covering the projected cube, or None when empty.

    If any cube corner reaches the camera plane the projection is
    unbounded and the whole image is scanned.
    """
    corners = target_cam + rho * np.array(
        [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)])
    if np.any(corners[:, 2] <= 1e-12):
        return 0, camera.height - 1, 0, camera.width - 1
    u = camera.principal_x + camera.fx * corners[:, 0] / corners[:, 2]
    v = camera.principal_y + camera.fy * corners[:, 1] / corners[:, 2]
    col0 = np.floor(u.min())
    col1 = np.ceil(u.max())
    row0 = np.floor(v.min())
    row1 = np.ceil(v.max())
    if col1 < 0 or row1 < 0 or col0 > camera.width - 1 or row0 > camera.height - 1:
        return None
    return (int(max(row0, 0)), int(min(row1, camera.height - 1)),
            int(max(col0, 0)), int(min(col1, camera.width - 1)))


def min_distance_search(image: DepthImage, regions: Sequence[SurveillanceRegion],
                        kernel_backend=None) -> list:
    """Nearest obstacle return around each region's control point.

    Candidate pixels are restricted to a bounding rect of the projected
    cube (a pure speedup, never dropping members), back-projected, and
    kept when within ``rho`` of the target in the inf norm.  The closest
    by 2-norm wins; ties keep the first pixel in row-major order.
    """
    kern = backend.get_kernels(kernel_backend)
    camera = image.camera
    results = []
    for region in regions:
        target_cam = camera.to_camera(region.target_base)
        rect = _region_rect(target_cam, region.rho, camera)
        if rect is None:
            results.append(DistanceResult(False, region.label))
            continue
        found, row, col, vx, vy, vz, d2 = kern.min_search(
            image.values, camera.fx, camera.fy,
            camera.principal_x, camera.principal_y,
            np.ascontiguousarray(target_cam), region.rho, rect)
        if not found:
            results.append(DistanceResult(False, region.label))
            continue
        vector_cam = np.array([vx, vy, vz])
        closest_base = camera.to_base(target_cam + vector_cam)
        results.append(DistanceResult(
            True, region.label, float(np.sqrt(d2)),
            closest_base, camera.rotation.T @ vector_cam, (row, col)))
    return results


def write_pgm(image: DepthImage, path) -> None:
    """16-bit ASCII PGM, depth in millimeters, 0 where there is no return."""
    finite = np.isfinite(image.values)
    mm = np.where(finite, np.round(image.values * 1000.0), 0.0)
    mm = np.clip(mm, 0, 65535).astype(int)
    with open(path, "w") as fh:
        fh.write(f"P2\n{image.camera.width} {image.camera.height}\n65535\n")
        for row in mm:
            fh.write(" ".join(str(v) for v in row))
            fh.write("\n")


def read_pgm(path) -> np.ndarray:
    """Inverse of write_pgm, returning depths in meters (+inf for 0)."""
    with open(path) as fh:
        tokens = []
        for line in fh:
            hash_pos = line.find("#")
            if hash_pos >= 0:
                line = line[:hash_pos]
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise ValueError("not an ASCII PGM file")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array(tokens[4:4 + width * height], dtype=float).reshape(height, width)
    if maxval <= 0 or data.size != width * height:
        raise ValueError("malformed PGM payload")
    return np.where(data > 0, data / 1000.0, np.inf)
