"""Forward kinematics and Jacobians for serial revolute arms.

The chain is described by standard Denavit-Hartenberg rows (a, alpha, d,
theta_offset), one per joint, with frame 0 fixed to the arm base.  Joint j
rotates about the z axis of frame j-1, so the physical location of joint j
is the origin of frame j-1.  All public functions return quantities in the
arm base frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation


@dataclass
class Pose:
    """Position plus orientation as a scalar-last unit quaternion [x, y, z, w]."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.orientation = np.asarray(self.orientation, dtype=float).reshape(4)
        if abs(np.linalg.norm(self.orientation) - 1.0) > 1e-9:
            raise ValueError("orientation quaternion must have unit norm")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]))

    @classmethod
    def from_matrix(cls, transform: np.ndarray) -> "Pose":
        quat = Rotation.from_matrix(transform[:3, :3]).as_quat()
        if quat[3] < 0.0:  # keep a deterministic hemisphere for logging
            quat = -quat
        return cls(transform[:3, 3].copy(), quat)

    def rotation_matrix(self) -> np.ndarray:
        return Rotation.from_quat(self.orientation).as_matrix()


@dataclass
class ControlPoint:
    """A point monitored for collisions, rigidly attached to a joint.

    ``joint`` is the 1-based joint index; the point sits at that joint's
    location (origin of frame joint-1) plus ``offset`` expressed in that
    frame.  Joints >= ``joint`` cannot move the point when the offset is
    zero, which is what the truncated Jacobian encodes.
    """

    joint: int
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    label: str = ""

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=float).reshape(3)
        if not self.label:
            self.label = f"cp{self.joint}"


@dataclass
class ArmModel:
    """Kinematic description of a serial revolute arm.

    dh rows are (a [m], alpha [rad], d [m], theta_offset [rad]), standard
    convention.  joint_limits rows are (min, max) in radians.
    """

    dh: np.ndarray
    joint_limits: np.ndarray
    base_frame: Pose = field(default_factory=Pose.identity)
    control_points: list[ControlPoint] = field(default_factory=list)
    link_radius: float = 0.05

    def __post_init__(self):
        self.dh = np.asarray(self.dh, dtype=float)
        if self.dh.ndim != 2 or self.dh.shape[1] != 4 or self.dh.shape[0] < 1:
            raise ValueError("dh must be an (n, 4) array with n >= 1")
        if not np.isfinite(self.dh).all():
            raise ValueError("dh entries must be finite")
        self.joint_limits = np.asarray(self.joint_limits, dtype=float)
        if self.joint_limits.shape != (self.n, 2):
            raise ValueError("joint_limits must be an (n, 2) array")
        if not (self.joint_limits[:, 0] < self.joint_limits[:, 1]).all():
            raise ValueError("each joint limit row needs min < max")
        for cp in self.control_points:
            if not 1 <= cp.joint <= self.n:
                raise ValueError(f"control point joint {cp.joint} outside 1..{self.n}")
        if self.link_radius <= 0.0:
            raise ValueError("link_radius must be positive")

    @property
    def n(self) -> int:
        return self.dh.shape[0]


def dh_transform(a: float, alpha: float, d: float, theta: float) -> np.ndarray:
    """Homogeneous transform of one standard DH row: Rz(theta) Tz(d) Tx(a) Rx(alpha)."""
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


class Chain:
    """One forward pass over the chain, shared by FK and every Jacobian.

    origins[k] is the position of frame k, z_axes[k] its z axis, both in
    base coordinates, for k = 0..n.  transforms[k] is the full 4x4 pose of
    frame k.
    """

    def __init__(self, model: ArmModel, q: np.ndarray):
        q = np.asarray(q, dtype=float).reshape(model.n)
        n = model.n
        self.model = model
        self.q = q
        self.transforms = np.empty((n + 1, 4, 4))
        self.transforms[0] = np.eye(4)
        current = np.eye(4)
        for i in range(n):
            a, alpha, d, theta0 = model.dh[i]
            current = current @ dh_transform(a, alpha, d, theta0 + q[i])
            self.transforms[i + 1] = current
        self.origins = self.transforms[:, :3, 3]
        self.z_axes = self.transforms[:, :3, 2]

    def pose(self, link_index: int) -> Pose:
        return Pose.from_matrix(self.transforms[link_index])

    def joint_position(self, joint: int, offset: np.ndarray | None = None) -> np.ndarray:
        """Location of joint ``joint`` (1-based): origin of frame joint-1 plus offset."""
        base = self.origins[joint - 1]
        if offset is None or not np.any(offset):
            return base.copy()
        return base + self.transforms[joint - 1, :3, :3] @ offset

    def point_jacobian(self, point: np.ndarray, last_joint: int) -> np.ndarray:
        """Positional Jacobian of ``point`` moved by joints 1..last_joint only.

        Columns for joints past last_joint are exactly zero; when the point
        lies on joint last_joint+1's axis this truncation loses nothing.
        """
        jac = np.zeros((3, self.model.n))
        for i in range(last_joint):
            jac[:, i] = np.cross(self.z_axes[i], point - self.origins[i])
        return jac


def forward_kinematics(model: ArmModel, q, link_index: int) -> Pose:
    """Pose of frame ``link_index`` (1..n) in the arm base frame."""
    if not 1 <= link_index <= model.n:
        raise ValueError(f"link_index {link_index} outside 1..{model.n}")
    return Chain(model, q).pose(link_index)


def geometric_jacobian(model: ArmModel, q) -> np.ndarray:
    """6xn Jacobian of the end-effector frame: linear rows stacked over angular."""
    chain = Chain(model, q)
    n = model.n
    ee = chain.origins[n]
    jac = np.empty((6, n))
    for i in range(n):
        z = chain.z_axes[i]
        jac[:3, i] = np.cross(z, ee - chain.origins[i])
        jac[3:, i] = z
    return jac


def positional_jacobian_truncated(model: ArmModel, q, j: int, offset=None) -> np.ndarray:
    """3xn Jacobian of the control point at joint ``j``, truncated at column j.

    The point is the location of joint j (origin of frame j-1, plus the
    optional frame-local offset).  Columns j..n are exactly zero: with a
    zero offset the point sits on joint j's own axis, so no downstream
    joint can move it.
    """
    if not 1 <= j <= model.n:
        raise ValueError(f"joint index {j} outside 1..{model.n}")
    chain = Chain(model, q)
    if offset is not None:
        offset = np.asarray(offset, dtype=float).reshape(3)
    point = chain.joint_position(j, offset)
    return chain.point_jacobian(point, j - 1)


def orientation_error(target: Pose, current: Pose) -> np.ndarray:
    """Rotation error as the vector part of q_target * q_current^-1.

    The sign is flipped when the scalar part is negative so that the error
    always points along the short way around.
    """
    r_err = Rotation.from_quat(target.orientation) * Rotation.from_quat(current.orientation).inv()
    quat = r_err.as_quat()
    if quat[3] < 0.0:
        quat = -quat
    return quat[:3]


def default_arm() -> ArmModel:
    """Seven-joint anthropomorphic arm used by the built-in scenarios.

    Shoulder at 0.36 m, upper arm 0.42 m, forearm 0.40 m, hand segment
    0.10 m, so the hand reaches about 0.92 m from the shoulder.  The last
    row carries no offsets: frame 7 shares the hand point, making the hand
    control point coincide with the end-effector position.
    """
    half_pi = np.pi / 2.0
    dh = np.array(
        [
            [0.0, -half_pi, 0.36, 0.0],
            [0.0, half_pi, 0.0, 0.0],
            [0.0, half_pi, 0.42, 0.0],
            [0.0, -half_pi, 0.0, 0.0],
            [0.0, -half_pi, 0.40, 0.0],
            [0.0, half_pi, 0.10, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ]
    )
    joint_limits = np.array(
        [
            [-2.96, 2.96],
            [-2.09, 2.09],
            [-2.96, 2.96],
            [-2.09, 2.09],
            [-2.96, 2.96],
            [-2.09, 2.09],
            [-3.05, 3.05],
        ]
    )
    control_points = [
        ControlPoint(4, label="elbow"),
        ControlPoint(6, label="wrist"),
        ControlPoint(7, label="hand"),
    ]
    return ArmModel(dh=dh, joint_limits=joint_limits, control_points=control_points)
