"""Set-based task-priority inverse kinematics for redundant arms.

The library covers the full loop of a velocity-level controller: forward
kinematics and Jacobians, equality and set-based tasks with activation
thresholds, a singularity-robust null-space solver, a depth-image obstacle
pipeline with a synthetic camera, and a deterministic two-rate scenario
runner with a command-line front end.
"""

__version__ = "0.1.0"

from tpik.kinematics import (
    ArmModel,
    ControlPoint,
    Pose,
    default_arm,
    forward_kinematics,
    geometric_jacobian,
    positional_jacobian_truncated,
)

__all__ = [
    "ArmModel",
    "ControlPoint",
    "Pose",
    "default_arm",
    "forward_kinematics",
    "geometric_jacobian",
    "positional_jacobian_truncated",
    "__version__",
]
