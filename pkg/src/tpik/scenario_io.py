"""Scenario files: TOML in, validated Scenario out.

Every diagnostic names the section and key that failed so a scenario can
be fixed without reading this module.  ``validate`` in the CLI is exactly
this loader, which is why a scenario that validates also runs.
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from importlib import resources

import numpy as np

from .kinematics import ArmModel, ControlPoint, default_arm
from .perception import Box, CameraModel, Sphere
from .sim import (PERSON_HALF_EXTENTS, ObstacleScript, Scenario, Waypoint,
                  person_proxy)
from .solver import SolverParams
from .tasks import SetBasedThresholds, TaskSpec


class ScenarioLoadError(ValueError):
    """Scenario file rejected; the message carries section and key."""


def _fail(where: str, message: str):
    raise ScenarioLoadError(f"{where}: {message}")


def _take(table: dict, where: str, known: tuple):
    unknown = set(table) - set(known)
    if unknown:
        _fail(where, f"unknown key(s) {sorted(unknown)}; expected from {sorted(known)}")


def _number(table: dict, key: str, where: str, default=None, required=False):
    if key not in table:
        if required:
            _fail(where, f"missing required key '{key}'")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(where, f"key '{key}' must be a number, got {value!r}")
    return float(value)


def _integer(table: dict, key: str, where: str, default=None, required=False):
    if key not in table:
        if required:
            _fail(where, f"missing required key '{key}'")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(where, f"key '{key}' must be an integer, got {value!r}")
    return value


def _string(table: dict, key: str, where: str, default=None, required=False):
    if key not in table:
        if required:
            _fail(where, f"missing required key '{key}'")
        return default
    value = table[key]
    if not isinstance(value, str):
        _fail(where, f"key '{key}' must be a string, got {value!r}")
    return value


def _vector(table: dict, key: str, where: str, length: int, default=None,
            required=False):
    if key not in table:
        if required:
            _fail(where, f"missing required key '{key}'")
        return default
    value = table[key]
    if (not isinstance(value, list) or len(value) != length
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)):
        _fail(where, f"key '{key}' must be a list of {length} numbers")
    return np.asarray(value, dtype=float)


def _matrix(table: dict, key: str, where: str, cols: int, default=None):
    if key not in table:
        return default
    value = table[key]
    if not isinstance(value, list) or not value:
        _fail(where, f"key '{key}' must be a non-empty list of rows")
    rows = []
    for i, row in enumerate(value):
        if (not isinstance(row, list) or len(row) != cols
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in row)):
            _fail(where, f"key '{key}' row {i + 1} must hold {cols} numbers")
        rows.append([float(v) for v in row])
    return np.asarray(rows)


def _parse_arm(table: dict) -> ArmModel:
    where = "section [arm]"
    _take(table, where, ("q0", "dh", "joint_limits", "link_radius", "control_points"))
    dh = _matrix(table, "dh", where, 4)
    limits = _matrix(table, "joint_limits", where, 2)
    radius = _number(table, "link_radius", where)
    cps_raw = table.get("control_points")
    if dh is None and limits is None and radius is None and cps_raw is None:
        return default_arm()
    base = default_arm()
    if dh is None:
        dh = base.dh
    if limits is None:
        limits = base.joint_limits if len(dh) == base.n else None
    if limits is None or len(limits) != len(dh):
        _fail(where, "joint_limits must provide one [min, max] row per DH row")
    control_points = base.control_points if cps_raw is None else []
    if cps_raw is not None:
        if not isinstance(cps_raw, list):
            _fail(where, "control_points must be an array of tables")
        for i, entry in enumerate(cps_raw):
            cp_where = f"section [arm] control point {i + 1}"
            if not isinstance(entry, dict):
                _fail(cp_where, "must be a table")
            _take(entry, cp_where, ("joint", "offset", "label"))
            joint = _integer(entry, "joint", cp_where, required=True)
            offset = _vector(entry, "offset", cp_where, 3,
                             default=np.zeros(3))
            label = _string(entry, "label", cp_where, default="")
            control_points.append(ControlPoint(joint, offset, label))
    try:
        return ArmModel(dh=dh, joint_limits=limits,
                        control_points=control_points,
                        link_radius=radius if radius is not None else base.link_radius)
    except ValueError as exc:
        _fail(where, str(exc))


def _parse_camera(table: dict) -> CameraModel:
    where = "section [camera]"
    _take(table, where, ("position", "target", "up", "width", "height",
                         "focal_length", "density_x", "density_y",
                         "principal_x", "principal_y"))
    position = _vector(table, "position", where, 3, required=True)
    target = _vector(table, "target", where, 3, required=True)
    up = _vector(table, "up", where, 3, default=np.array([0.0, 0.0, 1.0]))
    extras = {}
    for key in ("focal_length", "density_x", "density_y", "principal_x", "principal_y"):
        value = _number(table, key, where)
        if value is not None:
            extras[key] = value
    for key in ("width", "height"):
        value = _integer(table, key, where)
        if value is not None:
            extras[key] = value
    try:
        return CameraModel.looking_at(position, target, up=up, **extras)
    except ValueError as exc:
        _fail(where, str(exc))


def _parse_thresholds(table: dict, where: str, model: ArmModel, kind: str,
                      joint) -> SetBasedThresholds:
    kwargs = {}
    for key in ("safety_lower", "safety_upper", "physical_lower",
                "physical_upper", "epsilon"):
        value = _number(table, key, where)
        if value is not None:
            kwargs[key] = value
    if kind == "joint_limit":
        # Physical bounds default to the arm's hard limits.
        lo, hi = model.joint_limits[joint - 1]
        if "safety_lower" in kwargs and "physical_lower" not in kwargs:
            kwargs["physical_lower"] = lo
        if "safety_upper" in kwargs and "physical_upper" not in kwargs:
            kwargs["physical_upper"] = hi
    if "safety_lower" not in kwargs and "safety_upper" not in kwargs:
        _fail(where, "set-based task needs safety_lower and/or safety_upper")
    try:
        return SetBasedThresholds(**kwargs)
    except ValueError as exc:
        _fail(where, f"threshold chain invalid: {exc}")


_TASK_KEYS = ("kind", "group", "gain", "label", "joint", "control_point",
              "axis", "side", "offset", "safety_lower", "safety_upper",
              "physical_lower", "physical_upper", "epsilon")


def _parse_task(table: dict, index: int, model: ArmModel) -> TaskSpec:
    where = f"section [[tasks]] entry {index + 1}"
    if not isinstance(table, dict):
        _fail(where, "must be a table")
    _take(table, where, _TASK_KEYS)
    kind = _string(table, "kind", where, required=True)
    group = _string(table, "group", where, required=True)
    kwargs = dict(
        gain=_number(table, "gain", where),
        label=_string(table, "label", where, default=""),
    )
    if kind == "joint_limit":
        joint = _integer(table, "joint", where, required=True)
        if not 1 <= joint <= model.n:
            _fail(where, f"joint {joint} outside 1..{model.n}")
        kwargs["joint"] = joint
        kwargs["thresholds"] = _parse_thresholds(table, where, model, kind, joint)
    elif kind == "obstacle_avoidance":
        kwargs["control_point"] = _integer(table, "control_point", where, required=True)
        kwargs["thresholds"] = _parse_thresholds(table, where, model, kind, None)
    elif kind == "virtual_wall":
        kwargs["axis"] = _string(table, "axis", where, required=True)
        kwargs["side"] = _string(table, "side", where, required=True)
        kwargs["offset"] = _number(table, "offset", where, required=True)
        epsilon = _number(table, "epsilon", where)
        if epsilon is not None:
            side = kwargs["side"]
            if side == "min":
                kwargs["thresholds"] = SetBasedThresholds(
                    safety_lower=kwargs["offset"], epsilon=epsilon)
            elif side == "max":
                kwargs["thresholds"] = SetBasedThresholds(
                    safety_upper=kwargs["offset"], epsilon=epsilon)
    elif kind not in ("ee_position", "ee_configuration"):
        _fail(where, f"unknown task kind {kind!r}")
    try:
        return TaskSpec(kind=kind, group=group, **kwargs)
    except ValueError as exc:
        _fail(where, str(exc))


def _parse_waypoint(table: dict, index: int) -> Waypoint:
    where = f"section [[waypoints]] entry {index + 1}"
    if not isinstance(table, dict):
        _fail(where, "must be a table")
    _take(table, where, ("position", "tolerance", "time"))
    position = _vector(table, "position", where, 3, required=True)
    tolerance = _number(table, "tolerance", where, default=0.01)
    gate = _number(table, "time", where)
    try:
        return Waypoint(position, tolerance, gate)
    except ValueError as exc:
        _fail(where, str(exc))


def _parse_obstacle(table: dict, index: int) -> ObstacleScript:
    where = f"section [[obstacles]] entry {index + 1}"
    if not isinstance(table, dict):
        _fail(where, "must be a table")
    _take(table, where, ("type", "times", "positions", "radius",
                         "half_extents", "label"))
    kind = _string(table, "type", where, required=True)
    times = table.get("times")
    if (not isinstance(times, list) or not times
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in times)):
        _fail(where, "key 'times' must be a non-empty list of numbers")
    positions = _matrix(table, "positions", where, 3)
    if positions is None:
        _fail(where, "missing required key 'positions'")
    label = _string(table, "label", where, default=f"obstacle{index + 1}")
    try:
        if kind == "person":
            half = _vector(table, "half_extents", where, 3,
                           default=np.asarray(PERSON_HALF_EXTENTS))
            return person_proxy(times, positions, half_extents=half, label=label)
        if kind == "sphere":
            radius = _number(table, "radius", where, required=True)
            return ObstacleScript(Sphere(positions[0], radius), times, positions, label)
        if kind == "box":
            half = _vector(table, "half_extents", where, 3, required=True)
            return ObstacleScript(Box(positions[0], half), times, positions, label)
    except ScenarioLoadError:
        raise
    except ValueError as exc:
        _fail(where, str(exc))
    _fail(where, f"unknown obstacle type {kind!r}; use person, sphere, or box")


_RUN_KEYS = ("duration", "control_hz", "perception_hz", "perception_mode",
             "rho", "removal_inflation", "quantize_mm", "loop_waypoints",
             "qdot_max")
_TOP_KEYS = ("name", "run", "arm", "camera", "tasks", "waypoints", "obstacles")


def parse_scenario_dict(data: dict, name: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioLoadError("top level: scenario must be a table")
    _take(data, "top level", _TOP_KEYS)
    name = data.get("name", name)
    if not isinstance(name, str):
        _fail("top level", "key 'name' must be a string")

    run_table = data.get("run")
    if not isinstance(run_table, dict):
        _fail("top level", "missing required section [run]")
    where = "section [run]"
    _take(run_table, where, _RUN_KEYS)
    duration = _number(run_table, "duration", where, required=True)
    control_hz = _number(run_table, "control_hz", where, default=100.0)
    perception_hz = _number(run_table, "perception_hz", where, default=30.0)
    mode = _string(run_table, "perception_mode", where, default="exact_geometry")
    rho = _number(run_table, "rho", where, default=0.5)
    inflation = _number(run_table, "removal_inflation", where, default=0.05)
    quantize = run_table.get("quantize_mm", False)
    if not isinstance(quantize, bool):
        _fail(where, "key 'quantize_mm' must be a boolean")
    loop = run_table.get("loop_waypoints", False)
    if not isinstance(loop, bool):
        _fail(where, "key 'loop_waypoints' must be a boolean")
    qdot_max = _number(run_table, "qdot_max", where)

    arm_table = data.get("arm", {})
    if not isinstance(arm_table, dict):
        _fail("top level", "section [arm] must be a table")
    model = _parse_arm({k: v for k, v in arm_table.items() if k != "q0"})
    q0 = _vector(arm_table, "q0", "section [arm]", model.n,
                 default=np.zeros(model.n))

    camera = None
    if "camera" in data:
        if not isinstance(data["camera"], dict):
            _fail("top level", "section [camera] must be a table")
        camera = _parse_camera(data["camera"])

    tasks_raw = data.get("tasks", [])
    if not isinstance(tasks_raw, list):
        _fail("top level", "section [[tasks]] must be an array of tables")
    if not tasks_raw:
        _fail("section [[tasks]]", "hierarchy must be non-empty")
    tasks = [_parse_task(entry, i, model) for i, entry in enumerate(tasks_raw)]

    waypoints_raw = data.get("waypoints", [])
    if not isinstance(waypoints_raw, list):
        _fail("top level", "section [[waypoints]] must be an array of tables")
    waypoints = [_parse_waypoint(entry, i) for i, entry in enumerate(waypoints_raw)]

    obstacles_raw = data.get("obstacles", [])
    if not isinstance(obstacles_raw, list):
        _fail("top level", "section [[obstacles]] must be an array of tables")
    obstacles = [_parse_obstacle(entry, i) for i, entry in enumerate(obstacles_raw)]

    solver = SolverParams(qdot_max=qdot_max) if qdot_max is not None else SolverParams()
    try:
        return Scenario(tasks=tasks, duration=duration, model=model, q0=q0,
                        waypoints=waypoints, obstacles=obstacles, camera=camera,
                        control_hz=control_hz, perception_hz=perception_hz,
                        perception_mode=mode, rho=rho,
                        removal_inflation=inflation, quantize_mm=quantize,
                        loop_waypoints=loop, solver=solver, name=name)
    except ValueError as exc:
        raise ScenarioLoadError(f"scenario invalid: {exc}") from exc


def parse_scenario_text(text: str, name: str = "scenario") -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioLoadError(f"TOML syntax error: {exc}") from exc
    return parse_scenario_dict(data, name=name)


def load_scenario(path) -> Scenario:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ScenarioLoadError(f"cannot read {path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioLoadError(f"{path}: TOML syntax error: {exc}") from exc
    import os
    name = os.path.splitext(os.path.basename(str(path)))[0]
    return parse_scenario_dict(data, name=name)


def builtin_names() -> list:
    root = resources.files("tpik") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_builtin(name: str) -> Scenario:
    path = resources.files("tpik") / "scenarios" / f"{name}.toml"
    if not path.is_file():
        raise ScenarioLoadError(
            f"no built-in scenario {name!r}; available: {builtin_names()}")
    return parse_scenario_text(path.read_text(), name=name)
