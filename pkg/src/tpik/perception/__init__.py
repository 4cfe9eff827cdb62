"""Depth-camera simulation and minimum-distance extraction."""

from .backend import active_backend, available_backends, get_kernels
from .camera import (CameraModel, DepthImage, DepthPoint, depth_to_cartesian,
                     distance_vector, project_to_depth)
from .pipeline import (DEFAULT_REMOVAL_INFLATION, DistanceResult,
                       SurveillanceRegion, min_distance_search, read_pgm,
                       remove_robot, render_depth, robot_link_boxes, write_pgm)
from .primitives import Box, PointCloud, Sphere, closest_surface_point

__all__ = [
    "CameraModel", "DepthImage", "DepthPoint", "depth_to_cartesian",
    "project_to_depth", "distance_vector", "Sphere", "Box", "PointCloud",
    "closest_surface_point", "SurveillanceRegion", "DistanceResult",
    "render_depth", "remove_robot", "robot_link_boxes", "min_distance_search",
    "write_pgm", "read_pgm", "active_backend", "available_backends",
    "get_kernels", "DEFAULT_REMOVAL_INFLATION",
]
