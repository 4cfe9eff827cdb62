"""Deterministic two-rate scenario runner.

The arm integrates under the solver output at the control rate while the
distance pipeline refreshes at the slower perception rate; between
refreshes the control ticks consume the last published measurement
(latest wins, never blocking).  Obstacles follow scripted piecewise-linear
trajectories, so a scenario is a pure function of its description and two
runs produce identical logs byte for byte.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .kinematics import ArmModel, Chain, default_arm
from .perception import (CameraModel, DistanceResult, SurveillanceRegion,
                         closest_surface_point, min_distance_search,
                         remove_robot, render_depth, robot_link_boxes)
from .perception.pipeline import DEFAULT_REMOVAL_INFLATION
from .solver import SolverParams, SolverState, solve_tick
from .tasks import Measurements, TaskSpec

PERCEPTION_MODES = ("exact_geometry", "synthetic_camera")

# Scripted stand-ins for a person keep reproducible, bounded motion.
MAX_OBSTACLE_SPEED = 1.5
PERSON_HALF_EXTENTS = (0.12, 0.12, 0.45)


@dataclass
class ObstacleScript:
    """A primitive whose center follows piecewise-linear waypoints.

    Before the first time the obstacle holds the first position, after the
    last it holds the last; orientation never changes.
    """

    primitive: object
    times: np.ndarray
    positions: np.ndarray
    label: str = "obstacle"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if self.times.size == 0 or self.times.size != self.positions.shape[0]:
            raise ValueError("need one position per time sample")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0.0):
            raise ValueError("trajectory times must be strictly increasing")
        if self.times.size > 1:
            speeds = (np.linalg.norm(np.diff(self.positions, axis=0), axis=1)
                      / np.diff(self.times))
            if speeds.max() > MAX_OBSTACLE_SPEED + 1e-12:
                raise ValueError(
                    f"obstacle speed {speeds.max():.3g} m/s exceeds the "
                    f"{MAX_OBSTACLE_SPEED} m/s cap")
        if not hasattr(self.primitive, "center"):
            raise TypeError("obstacle primitive needs a movable center")

    def position(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.positions[:, k])
                         for k in range(3)])

    def primitive_at(self, t: float):
        return dataclasses.replace(self.primitive, center=self.position(t))


def person_proxy(times, positions, half_extents=PERSON_HALF_EXTENTS,
                 label: str = "person") -> ObstacleScript:
    """Vertical box standing in for a person walking through the cell."""
    from .perception import Box
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    return ObstacleScript(Box(positions[0], half_extents), times, positions, label)


@dataclass
class Waypoint:
    position: np.ndarray
    tolerance: float = 0.01
    time: Optional[float] = None  # do not target before this instant

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        if self.tolerance <= 0.0:
            raise ValueError("waypoint tolerance must be positive")


@dataclass
class Scenario:
    tasks: list
    duration: float
    model: ArmModel = field(default_factory=default_arm)
    q0: np.ndarray = None  # type: ignore[assignment]
    waypoints: list = field(default_factory=list)
    obstacles: list = field(default_factory=list)
    camera: CameraModel = None  # type: ignore[assignment]
    control_hz: float = 100.0
    perception_hz: float = 30.0
    perception_mode: str = "exact_geometry"
    rho: float = 0.5
    removal_inflation: float = DEFAULT_REMOVAL_INFLATION
    quantize_mm: bool = False
    loop_waypoints: bool = False
    solver: SolverParams = field(default_factory=SolverParams)
    name: str = "scenario"

    def __post_init__(self):
        if not self.tasks:
            raise ValueError("hierarchy must be non-empty")
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        if not (self.control_hz >= self.perception_hz > 0.0):
            raise ValueError("need control_hz >= perception_hz > 0")
        if self.perception_mode not in PERCEPTION_MODES:
            raise ValueError(f"perception_mode must be one of {PERCEPTION_MODES}")
        if self.rho <= 0.0:
            raise ValueError("surveillance radius must be positive")
        if self.q0 is None:
            self.q0 = np.zeros(self.model.n)
        self.q0 = np.asarray(self.q0, dtype=float).reshape(self.model.n)
        if self.camera is None:
            # Side-mounted view of the default workcell.
            self.camera = CameraModel.looking_at((0.0, -1.6, 0.7), (0.0, 0.0, 0.7))
        order = [("safety", "operational", "optimization").index(t.group)
                 for t in self.tasks]
        if order != sorted(order):
            raise ValueError(
                "task groups must be ordered safety > operational > optimization")
        if any(t.kind == "ee_configuration" for t in self.tasks):
            raise ValueError(
                "scenarios drive position targets only; ee_configuration is "
                "available through the solver API")
        needs_target = any(t.kind == "ee_position" for t in self.tasks)
        if needs_target and not self.waypoints:
            raise ValueError("ee_position task needs at least one waypoint")
        if self.loop_waypoints and len(self.waypoints) < 2:
            raise ValueError("looping the waypoint list needs at least two waypoints")
        for t in self.tasks:
            if t.kind == "obstacle_avoidance":
                if not 1 <= t.control_point <= len(self.model.control_points):
                    raise ValueError(
                        f"task {t.label}: control point {t.control_point} "
                        f"not in the arm model")

    @property
    def ticks(self) -> int:
        return int(round(self.duration * self.control_hz))

    @property
    def refresh_every(self) -> int:
        return int(self.control_hz // self.perception_hz)


def measure_exact(scenario: Scenario, chain: Chain, t: float) -> list:
    """Analytic nearest obstacle point per control point.

    Validity follows the same inf-norm cube as the camera pipeline so the
    two modes agree on when a measurement exists.
    """
    results = []
    for cp in scenario.model.control_points:
        point = chain.joint_position(cp.joint, cp.offset)
        best = None
        for script in scenario.obstacles:
            closest = closest_surface_point(script.primitive_at(t), point)
            dist = float(np.linalg.norm(closest - point))
            if best is None or dist < best[0]:
                best = (dist, closest)
        if best is None or np.abs(best[1] - point).max() > scenario.rho:
            results.append(DistanceResult(False, cp.label))
            continue
        dist, closest = best
        results.append(DistanceResult(True, cp.label, dist, closest, closest - point))
    return results


def measure_camera(scenario: Scenario, chain: Chain, t: float) -> list:
    """Full pipeline: render, carve out the arm, search around each point."""
    prims = [s.primitive_at(t) for s in scenario.obstacles]
    prims += robot_link_boxes(scenario.model, chain.q)
    img = render_depth(prims, scenario.camera, quantize_mm=scenario.quantize_mm)
    cleaned = remove_robot(img, scenario.model, chain.q,
                           inflation=scenario.removal_inflation)
    regions = [SurveillanceRegion(chain.joint_position(cp.joint, cp.offset),
                                  scenario.rho, cp.label)
               for cp in scenario.model.control_points]
    return min_distance_search(cleaned, regions)


@dataclass
class ScenarioLog:
    header: list
    rows: list
    task_labels: list
    cp_labels: list

    def column(self, name: str) -> np.ndarray:
        idx = self.header.index(name)
        return np.array([row[idx] for row in self.rows], dtype=float)

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.header))
            fh.write("\n")
            for row in self.rows:
                fh.write(",".join(_fmt(v) for v in row))
                fh.write("\n")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".9g")


def log_header(scenario: Scenario) -> list:
    """CSV column set; a pure function of the task list and control points."""
    n = scenario.model.n
    cols = ["t"]
    cols += [f"q{j}" for j in range(1, n + 1)]
    cols += [f"qd{j}" for j in range(1, n + 1)]
    cols += ["ee_x", "ee_y", "ee_z", "ee_qx", "ee_qy", "ee_qz", "ee_qw"]
    cols += ["err_pos", "wp"]
    for spec in scenario.tasks:
        prefix = "sig" if spec.is_set_based else "err"
        cols += [f"{prefix}_{spec.label}", f"act_{spec.label}", f"lam_{spec.label}"]
    for cp in scenario.model.control_points:
        # ox/oy/oz hold the published closest obstacle point; together with
        # q they reconstruct the avoidance direction at any tick.
        cols += [f"d_{cp.label}", f"valid_{cp.label}",
                 f"ox_{cp.label}", f"oy_{cp.label}", f"oz_{cp.label}"]
    cols.append("emerg")
    return cols


def run(scenario: Scenario) -> ScenarioLog:
    """Simulate the scenario and return the per-tick log."""
    model = scenario.model
    dt = 1.0 / scenario.control_hz
    refresh_every = scenario.refresh_every
    measure = (measure_exact if scenario.perception_mode == "exact_geometry"
               else measure_camera)

    q = scenario.q0.copy()
    state = SolverState()
    distances = [None] * len(model.control_points)
    wp_index = 0
    rows = []
    lower = model.joint_limits[:, 0]
    upper = model.joint_limits[:, 1]

    for tick in range(scenario.ticks):
        t = tick / scenario.control_hz
        chain = Chain(model, q)

        if scenario.obstacles and tick % refresh_every == 0:
            distances = measure(scenario, chain, t)

        target = None
        if scenario.waypoints:
            target = scenario.waypoints[wp_index].position
        measurements = Measurements(target_position=target, distances=distances)

        out = solve_tick(scenario.tasks, model, q, measurements,
                         state=state, params=scenario.solver)

        ee_pose = chain.pose(model.n)
        err_pos = (np.linalg.norm(target - ee_pose.position)
                   if target is not None else np.nan)

        row = [t]
        row += list(q)
        row += list(out.qdot)
        row += list(ee_pose.position)
        row += list(ee_pose.orientation)
        row += [err_pos, wp_index]
        for i, spec in enumerate(scenario.tasks):
            sigma = out.sigmas[i]
            if sigma is None:
                value = np.nan
            elif spec.is_set_based:
                value = float(sigma[0])
            else:
                ref = (target if spec.kind == "ee_position" else None)
                value = (float(np.linalg.norm(ref - sigma)) if ref is not None
                         else np.nan)
            row += [value, bool(out.active[i]), out.lambdas[i]]
        for j, cp in enumerate(model.control_points):
            res = distances[j]
            if res is None or not res.valid:
                row += [np.nan, False, np.nan, np.nan, np.nan]
            else:
                row += [res.distance, True,
                        res.closest_base[0], res.closest_base[1], res.closest_base[2]]
        row.append(bool(out.emergency_stop))
        rows.append(row)

        q = np.clip(q + out.qdot * dt, lower, upper)

        if scenario.waypoints and err_pos < scenario.waypoints[wp_index].tolerance:
            # A looping list patrols forever; otherwise the last waypoint is
            # a terminal hold.
            if wp_index + 1 < len(scenario.waypoints):
                nxt = wp_index + 1
            elif scenario.loop_waypoints:
                nxt = 0
            else:
                nxt = None
            if nxt is not None:
                gate = scenario.waypoints[nxt].time
                if gate is None or t >= gate:
                    wp_index = nxt

    return ScenarioLog(log_header(scenario), rows,
                       [s.label for s in scenario.tasks],
                       [cp.label for cp in model.control_points])
