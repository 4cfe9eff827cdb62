"""Task definitions for the priority hierarchy.

Equality tasks (end-effector position or full configuration) are always
part of the hierarchy.  Set-based tasks (joint limits, obstacle distances,
virtual walls) are scalar and only join the hierarchy while their value
sits at a boundary of the valid set; the solver owns that bookkeeping and
uses the predicates defined here.

Threshold layout for a scalar set-based task, low to high:

    physical_lower < safety_lower < activation_lower
                   <= activation_upper < safety_upper < physical_upper

with activation_lower = safety_lower + epsilon and activation_upper =
safety_upper - epsilon.  The epsilon gap is what keeps activation from
chattering.  One-sided tasks leave the unused side at +-inf.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from tpik.kinematics import ArmModel, Chain, Pose, geometric_jacobian, orientation_error

TASK_KINDS = ("ee_position", "ee_configuration", "joint_limit", "obstacle_avoidance", "virtual_wall")
EQUALITY_KINDS = ("ee_position", "ee_configuration")
SET_BASED_KINDS = ("joint_limit", "obstacle_avoidance", "virtual_wall")
PRIORITY_GROUPS = ("safety", "operational", "optimization")
WALL_AXES = ("x", "y", "z")

# Distances below this are treated as a measurement or scripting fault, not
# a value the avoidance task could still control.
DEGENERATE_DISTANCE = 1e-6

DEFAULT_GAINS = {"safety": 1.0, "operational": 0.8, "optimization": 1.0}


class DegenerateDistanceError(RuntimeError):
    """Obstacle distance collapsed below the controllable range."""


def _finite(value) -> bool:
    return np.isfinite(value)


@dataclass(frozen=True)
class SetBasedThresholds:
    """Boundaries of the valid set of a scalar set-based task."""

    safety_lower: float = -np.inf
    safety_upper: float = np.inf
    physical_lower: float = -np.inf
    physical_upper: float = np.inf
    epsilon: float = 0.05

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise ValueError("epsilon must be a positive finite number")
        if not (_finite(self.safety_lower) or _finite(self.safety_upper)):
            raise ValueError("at least one safety bound must be finite")
        if _finite(self.safety_lower):
            if not self.physical_lower < self.safety_lower:
                raise ValueError("physical_lower must sit below safety_lower")
        elif _finite(self.physical_lower):
            raise ValueError("physical_lower given without a finite safety_lower")
        if _finite(self.safety_upper):
            if not self.safety_upper < self.physical_upper:
                raise ValueError("physical_upper must sit above safety_upper")
        elif _finite(self.physical_upper):
            raise ValueError("physical_upper given without a finite safety_upper")
        if _finite(self.safety_lower) and _finite(self.safety_upper):
            if self.activation_lower > self.activation_upper:
                raise ValueError(
                    "activation bands overlap: need safety_lower + epsilon "
                    "<= safety_upper - epsilon"
                )

    @property
    def activation_lower(self) -> float:
        return self.safety_lower + self.epsilon

    @property
    def activation_upper(self) -> float:
        return self.safety_upper - self.epsilon

    def in_valid_set(self, sigma: float) -> bool:
        return self.safety_lower <= sigma <= self.safety_upper

    def beyond_activation(self, sigma: float) -> bool:
        """True when sigma has entered one of the activation bands."""
        return sigma <= self.activation_lower or sigma >= self.activation_upper


def set_based_desired(sigma: float, thresholds: SetBasedThresholds):
    """Boundary value an active task is steered to, or None when inside.

    At or beyond the upper activation threshold the task holds the upper
    safety bound; symmetrically for the lower side.  Strictly inside both
    bands there is no boundary to hold, hence None.
    """
    if sigma >= thresholds.activation_upper:
        return thresholds.safety_upper
    if sigma <= thresholds.activation_lower:
        return thresholds.safety_lower
    return None


def may_deactivate(sigma: float, jacobian_row: np.ndarray, qdot: np.ndarray,
                   thresholds: SetBasedThresholds) -> bool:
    """Whether a candidate solution lets the task drop out of the hierarchy.

    The projection J qdot is the rate the task value would take under the
    candidate velocity.  Deactivation needs it to point strictly back into
    the valid set; a zero projection keeps the task active.
    """
    projection = float(np.asarray(jacobian_row).ravel() @ np.asarray(qdot).ravel())
    if sigma >= thresholds.activation_upper and projection < 0.0:
        return True
    if sigma <= thresholds.activation_lower and projection > 0.0:
        return True
    return False


def wall_thresholds(side: str, offset: float, epsilon: float = 0.05) -> SetBasedThresholds:
    """One-sided thresholds for a virtual wall at ``offset`` along an axis."""
    if side == "min":
        return SetBasedThresholds(safety_lower=offset, epsilon=epsilon)
    if side == "max":
        return SetBasedThresholds(safety_upper=offset, epsilon=epsilon)
    raise ValueError(f"wall side must be 'min' or 'max', got {side!r}")


@dataclass
class TaskSpec:
    """Declaration of one task in the hierarchy.

    ``gain`` of None picks the group default (1.0 for safety and
    optimization, 0.8 for operational).  ``joint`` and ``control_point``
    are 1-based; ``control_point`` indexes the arm model's control points.
    """

    kind: str
    group: str
    mode: str = ""
    gain: float | None = None
    thresholds: SetBasedThresholds | None = None
    joint: int | None = None
    control_point: int | None = None
    axis: str | None = None
    side: str | None = None
    offset: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.group not in PRIORITY_GROUPS:
            raise ValueError(f"unknown priority group {self.group!r}")
        if not self.mode:
            self.mode = "equality" if self.kind in EQUALITY_KINDS else "set_based"
        if self.kind in EQUALITY_KINDS and self.mode != "equality":
            raise ValueError(f"{self.kind} tasks are equality tasks")
        if self.kind in SET_BASED_KINDS and self.mode != "set_based":
            raise ValueError(f"{self.kind} tasks are set-based tasks")
        if self.mode == "set_based" and self.thresholds is None:
            if self.kind == "virtual_wall":
                if self.side is None or self.offset is None:
                    raise ValueError("virtual_wall needs side and offset")
                self.thresholds = wall_thresholds(self.side, self.offset)
            else:
                raise ValueError(f"{self.kind} task needs thresholds")
        if self.kind == "joint_limit" and self.joint is None:
            raise ValueError("joint_limit task needs a joint index")
        if self.kind == "obstacle_avoidance" and self.control_point is None:
            raise ValueError("obstacle_avoidance task needs a control point index")
        if self.kind == "virtual_wall":
            if self.axis not in WALL_AXES:
                raise ValueError(f"virtual_wall axis must be one of {WALL_AXES}")
            if self.side not in ("min", "max"):
                raise ValueError("virtual_wall side must be 'min' or 'max'")
        if self.gain is not None and self.gain <= 0.0:
            raise ValueError("gain must be positive")
        if not self.label:
            self.label = self._default_label()

    def _default_label(self) -> str:
        if self.kind == "joint_limit":
            return f"jl{self.joint}"
        if self.kind == "obstacle_avoidance":
            return f"oa{self.control_point}"
        if self.kind == "virtual_wall":
            return f"wall_{self.axis}_{self.side}"
        return {"ee_position": "ee_pos", "ee_configuration": "ee_conf"}[self.kind]

    @property
    def is_set_based(self) -> bool:
        return self.mode == "set_based"

    @property
    def gain_value(self) -> float:
        return self.gain if self.gain is not None else DEFAULT_GAINS[self.group]


@dataclass
class TaskEvaluation:
    """Current value, Jacobian and reference of one task.

    For set-based tasks sigma_d equals sigma until the solver pins the task
    to a boundary.  For the configuration task the orientation block of
    sigma is zero by convention and sigma_d carries the orientation error,
    so sigma_d - sigma is always the task error.
    """

    sigma: np.ndarray
    jacobian: np.ndarray
    sigma_d: np.ndarray
    sigma_d_dot: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        self.jacobian = np.atleast_2d(np.asarray(self.jacobian, dtype=float))
        self.sigma_d = np.atleast_1d(np.asarray(self.sigma_d, dtype=float))
        if self.sigma_d_dot is None:
            self.sigma_d_dot = np.zeros_like(self.sigma)
        else:
            self.sigma_d_dot = np.atleast_1d(np.asarray(self.sigma_d_dot, dtype=float))
        m = self.sigma.shape[0]
        if self.jacobian.shape[0] != m or self.sigma_d.shape[0] != m:
            raise ValueError("sigma, sigma_d and jacobian row count must agree")

    @property
    def error(self) -> np.ndarray:
        return self.sigma_d - self.sigma


@dataclass
class Measurements:
    """Per-tick inputs the task evaluations need beyond the joint state."""

    target_position: np.ndarray | None = None
    target_pose: Pose | None = None
    distances: Sequence = ()  # one DistanceResult (or None) per control point


def eval_ee_position(model: ArmModel, q, target, chain: Chain | None = None) -> TaskEvaluation:
    """End-effector position task: sigma is the frame-n origin."""
    chain = chain or Chain(model, q)
    jac = np.empty((3, model.n))
    ee = chain.origins[model.n]
    for i in range(model.n):
        jac[:, i] = np.cross(chain.z_axes[i], ee - chain.origins[i])
    return TaskEvaluation(sigma=ee, jacobian=jac, sigma_d=np.asarray(target, dtype=float))


def eval_ee_configuration(model: ArmModel, q, target: Pose, chain: Chain | None = None) -> TaskEvaluation:
    """Six-dimensional pose task; see TaskEvaluation for the error layout."""
    chain = chain or Chain(model, q)
    pose = chain.pose(model.n)
    jac = geometric_jacobian(model, chain.q)
    sigma = np.concatenate([pose.position, np.zeros(3)])
    sigma_d = np.concatenate([target.position, orientation_error(target, pose)])
    return TaskEvaluation(sigma=sigma, jacobian=jac, sigma_d=sigma_d)


def eval_joint_limit(q, joint: int, n_joints: int | None = None) -> TaskEvaluation:
    """Joint position as a scalar task; Jacobian is the matching unit row."""
    q = np.asarray(q, dtype=float)
    n = n_joints if n_joints is not None else q.size
    if not 1 <= joint <= n:
        raise ValueError(f"joint {joint} outside 1..{n}")
    jac = np.zeros((1, n))
    jac[0, joint - 1] = 1.0
    sigma = np.array([q[joint - 1]])
    return TaskEvaluation(sigma=sigma, jacobian=jac, sigma_d=sigma.copy())


def eval_obstacle_avoidance(control_point: np.ndarray, closest: np.ndarray,
                            truncated_jacobian: np.ndarray) -> TaskEvaluation:
    """Distance task between a control point and its nearest obstacle point.

    sigma = |O - P|; the Jacobian projects joint motion of the control
    point onto the (inverted) obstacle direction, so positive task motion
    means moving away.
    """
    control_point = np.asarray(control_point, dtype=float).reshape(3)
    closest = np.asarray(closest, dtype=float).reshape(3)
    diff = closest - control_point
    distance = float(np.linalg.norm(diff))
    if distance < DEGENERATE_DISTANCE:
        raise DegenerateDistanceError(
            f"obstacle distance {distance:.2e} m below controllable range"
        )
    jac = -(diff / distance)[None, :] @ np.asarray(truncated_jacobian, dtype=float)
    sigma = np.array([distance])
    return TaskEvaluation(sigma=sigma, jacobian=jac, sigma_d=sigma.copy())


def eval_virtual_wall(model: ArmModel, q, axis: str, chain: Chain | None = None) -> TaskEvaluation:
    """One coordinate of the end-effector position as a scalar task."""
    if axis not in WALL_AXES:
        raise ValueError(f"axis must be one of {WALL_AXES}")
    chain = chain or Chain(model, q)
    idx = WALL_AXES.index(axis)
    ee = chain.origins[model.n]
    jac = np.empty((1, model.n))
    for i in range(model.n):
        jac[0, i] = np.cross(chain.z_axes[i], ee - chain.origins[i])[idx]
    sigma = np.array([ee[idx]])
    return TaskEvaluation(sigma=sigma, jacobian=jac, sigma_d=sigma.copy())


def evaluate_task(spec: TaskSpec, model: ArmModel, q, measurements: Measurements,
                  chain: Chain | None = None) -> TaskEvaluation | None:
    """Evaluate one task spec against the current state.

    Returns None for an obstacle task without a usable distance measurement
    (treated as sigma = +inf by the solver, i.e. forced inactive).
    """
    chain = chain or Chain(model, q)
    if spec.kind == "ee_position":
        if measurements.target_position is None:
            raise ValueError("ee_position task needs measurements.target_position")
        return eval_ee_position(model, q, measurements.target_position, chain=chain)
    if spec.kind == "ee_configuration":
        if measurements.target_pose is None:
            raise ValueError("ee_configuration task needs measurements.target_pose")
        return eval_ee_configuration(model, q, measurements.target_pose, chain=chain)
    if spec.kind == "joint_limit":
        return eval_joint_limit(chain.q, spec.joint, model.n)
    if spec.kind == "obstacle_avoidance":
        idx = spec.control_point - 1
        if not 0 <= idx < len(model.control_points):
            raise ValueError(f"control point index {spec.control_point} out of range")
        result = measurements.distances[idx] if idx < len(measurements.distances) else None
        if result is None or not result.valid:
            return None
        cp = model.control_points[idx]
        point = chain.joint_position(cp.joint, cp.offset)
        jac = chain.point_jacobian(point, cp.joint - 1)
        return eval_obstacle_avoidance(point, result.closest_base, jac)
    if spec.kind == "virtual_wall":
        return eval_virtual_wall(model, q, spec.axis, chain=chain)
    raise ValueError(f"unknown task kind {spec.kind!r}")
