"""Scenario file loader tests: schema coverage and diagnostics."""

import numpy as np
import pytest

from tpik.perception import Box, Sphere
from tpik.scenario_io import (
    ScenarioLoadError,
    builtin_names,
    load_builtin,
    load_scenario,
    parse_scenario_text,
)

FULL_TOML = """
name = "kitchen_sink"

[run]
duration = 2.0
control_hz = 100
perception_hz = 30
perception_mode = "synthetic_camera"
rho = 0.8
removal_inflation = 0.04
quantize_mm = true
loop_waypoints = true
qdot_max = 1.2

[arm]
q0 = [0.0, 0.3, 0.0, -1.2, 0.0, 0.8, 0.0]

[camera]
position = [0.0, -1.5, 0.9]
target = [0.1, 0.0, 0.6]

[[tasks]]
kind = "virtual_wall"
group = "safety"
axis = "z"
side = "min"
offset = 0.1
gain = 12.0
label = "floor"

[[tasks]]
kind = "obstacle_avoidance"
group = "safety"
control_point = 3
safety_lower = 0.3
gain = 6.0

[[tasks]]
kind = "joint_limit"
group = "safety"
joint = 4
safety_lower = -2.0
safety_upper = 2.0
gain = 8.0

[[tasks]]
kind = "ee_position"
group = "operational"
gain = 1.5

[[waypoints]]
position = [0.5, 0.0, 0.6]
tolerance = 0.02

[[waypoints]]
position = [0.3, 0.2, 0.7]
time = 1.0

[[obstacles]]
type = "sphere"
radius = 0.12
times = [0.0, 1.0]
positions = [[1.0, 0.0, 0.6], [0.4, 0.0, 0.6]]
label = "ball"

[[obstacles]]
type = "box"
half_extents = [0.1, 0.1, 0.2]
times = [0.0]
positions = [[0.0, 1.0, 0.6]]

[[obstacles]]
type = "person"
times = [0.0, 2.0]
positions = [[1.5, 1.5, 0.9], [1.0, 1.0, 0.9]]
"""


def load(text: str):
    return parse_scenario_text(text)


def fails_with(text: str, fragment: str):
    with pytest.raises(ScenarioLoadError, match=fragment):
        load(text)


class TestFullDocument:
    def test_round_trip(self):
        sc = load(FULL_TOML)
        assert sc.name == "kitchen_sink"
        assert sc.duration == 2.0
        assert sc.perception_mode == "synthetic_camera"
        assert sc.rho == 0.8
        assert sc.removal_inflation == 0.04
        assert sc.quantize_mm is True
        assert sc.loop_waypoints is True
        assert sc.solver.qdot_max == 1.2
        assert sc.q0 == pytest.approx([0.0, 0.3, 0.0, -1.2, 0.0, 0.8, 0.0])
        assert [t.kind for t in sc.tasks] == [
            "virtual_wall", "obstacle_avoidance", "joint_limit", "ee_position"]
        assert len(sc.waypoints) == 2
        assert sc.waypoints[0].tolerance == 0.02
        assert sc.waypoints[1].time == 1.0
        assert isinstance(sc.obstacles[0].primitive, Sphere)
        assert isinstance(sc.obstacles[1].primitive, Box)
        assert sc.obstacles[0].label == "ball"
        # unlabeled entries get a positional name
        assert sc.obstacles[1].label == "obstacle2"
        assert sc.obstacles[2].label == "obstacle3"
        assert isinstance(sc.obstacles[2].primitive, Box)

    def test_wall_thresholds_sit_at_the_plane(self):
        sc = load(FULL_TOML)
        wall = sc.tasks[0]
        assert wall.thresholds.safety_lower == pytest.approx(0.1)
        assert np.isinf(wall.thresholds.safety_upper)

    def test_joint_limit_inherits_physical_bounds(self):
        sc = load(FULL_TOML)
        jl = sc.tasks[2]
        lo, hi = sc.model.joint_limits[3]
        assert jl.thresholds.physical_lower == pytest.approx(lo)
        assert jl.thresholds.physical_upper == pytest.approx(hi)

    def test_camera_center_matches_position(self):
        sc = load(FULL_TOML)
        # recover the optical center from the base-to-camera transform
        center = -sc.camera.rotation.T @ sc.camera.translation
        assert center == pytest.approx([0.0, -1.5, 0.9])

    def test_run_defaults(self):
        sc = load("""
        [run]
        duration = 1.0
        [[tasks]]
        kind = "ee_position"
        group = "operational"
        gain = 1.0
        [[waypoints]]
        position = [0.5, 0.0, 0.6]
        """)
        assert sc.control_hz == 100.0
        assert sc.perception_hz == 30.0
        assert sc.perception_mode == "exact_geometry"
        assert sc.rho == 0.5
        assert sc.quantize_mm is False
        assert sc.loop_waypoints is False
        assert sc.camera is not None
        assert sc.q0 == pytest.approx(np.zeros(7))
        assert sc.waypoints[0].tolerance == 0.01
        assert sc.waypoints[0].time is None


MINIMAL = """
[run]
duration = 1.0
[[tasks]]
kind = "obstacle_avoidance"
group = "safety"
control_point = 3
safety_lower = 0.3
gain = 5.0
"""


class TestDiagnostics:
    def test_unknown_top_level_key(self):
        fails_with("wheels = 4\n" + MINIMAL, r"top level: unknown key")

    def test_unknown_run_key(self):
        fails_with(MINIMAL.replace("duration = 1.0", "duration = 1.0\nwarp = 9"),
                   r"section \[run\]: unknown key")

    def test_missing_duration(self):
        fails_with(MINIMAL.replace("duration = 1.0", ""),
                   r"missing required key 'duration'")

    def test_missing_run_section(self):
        fails_with("name = 'x'", r"missing required section \[run\]")

    def test_empty_tasks(self):
        fails_with("[run]\nduration = 1.0", "hierarchy must be non-empty")

    def test_unknown_task_key(self):
        fails_with(MINIMAL + "\n[[tasks]]\nkind = 'ee_position'\ngroup = 'operational'\nspin = 1\n",
                   r"section \[\[tasks\]\] entry 2: unknown key")

    def test_unknown_task_kind(self):
        fails_with(MINIMAL.replace("obstacle_avoidance", "teleport"),
                   "unknown task kind 'teleport'")

    def test_unknown_group(self):
        fails_with(MINIMAL.replace('group = "safety"', 'group = "urgent"'),
                   "group")

    def test_joint_out_of_range(self):
        fails_with(MINIMAL + "\n[[tasks]]\nkind = 'joint_limit'\ngroup = 'safety'\n"
                   "joint = 9\nsafety_lower = -1.0\ngain = 1.0\n",
                   r"joint 9 outside 1\.\.7")

    def test_set_based_needs_a_bound(self):
        fails_with(MINIMAL.replace("safety_lower = 0.3\n", ""),
                   "needs safety_lower and/or safety_upper")

    def test_threshold_chain_checked(self):
        bad = MINIMAL + "\n[[tasks]]\nkind = 'joint_limit'\ngroup = 'safety'\njoint = 4\n" \
            "safety_lower = 9.0\nsafety_upper = -9.0\ngain = 1.0\n"
        fails_with(bad, "threshold chain invalid")

    def test_control_point_must_be_integer(self):
        fails_with(MINIMAL.replace("control_point = 3", "control_point = 'hand'"),
                   "must be an integer")

    def test_group_order_reported(self):
        text = """
        [run]
        duration = 1.0
        [[tasks]]
        kind = "ee_position"
        group = "operational"
        gain = 1.0
        [[tasks]]
        kind = "obstacle_avoidance"
        group = "safety"
        control_point = 3
        safety_lower = 0.3
        gain = 5.0
        [[waypoints]]
        position = [0.5, 0.0, 0.6]
        """
        fails_with(text, "scenario invalid: task groups must be ordered")

    def test_waypoint_needs_position(self):
        fails_with(MINIMAL + "\n[[waypoints]]\ntolerance = 0.1\n",
                   r"section \[\[waypoints\]\] entry 1: missing required key 'position'")

    def test_position_must_be_three_numbers(self):
        fails_with(MINIMAL + "\n[[waypoints]]\nposition = [1.0, 2.0]\n",
                   "list of 3 numbers")

    def test_unknown_obstacle_type(self):
        fails_with(MINIMAL + "\n[[obstacles]]\ntype = 'cylinder'\ntimes = [0.0]\n"
                   "positions = [[1.0, 1.0, 1.0]]\n",
                   "unknown obstacle type 'cylinder'")

    def test_sphere_needs_radius(self):
        fails_with(MINIMAL + "\n[[obstacles]]\ntype = 'sphere'\ntimes = [0.0]\n"
                   "positions = [[1.0, 1.0, 1.0]]\n",
                   "missing required key 'radius'")

    def test_box_needs_half_extents(self):
        fails_with(MINIMAL + "\n[[obstacles]]\ntype = 'box'\ntimes = [0.0]\n"
                   "positions = [[1.0, 1.0, 1.0]]\n",
                   "missing required key 'half_extents'")

    def test_obstacle_needs_positions(self):
        fails_with(MINIMAL + "\n[[obstacles]]\ntype = 'sphere'\nradius = 0.1\ntimes = [0.0]\n",
                   "missing required key 'positions'")

    def test_times_type_checked(self):
        fails_with(MINIMAL + "\n[[obstacles]]\ntype = 'sphere'\nradius = 0.1\n"
                   "times = [0.0, true]\npositions = [[1.0, 1.0, 1.0], [1.0, 1.0, 2.0]]\n",
                   "'times' must be a non-empty list of numbers")

    def test_obstacle_speed_cap_surfaces(self):
        fails_with(MINIMAL + "\n[[obstacles]]\ntype = 'sphere'\nradius = 0.1\n"
                   "times = [0.0, 1.0]\npositions = [[0.0, 0.0, 0.0], [9.0, 0.0, 0.0]]\n",
                   "exceeds")

    def test_loop_flag_type_checked(self):
        fails_with(MINIMAL.replace("duration = 1.0", "duration = 1.0\nloop_waypoints = 1"),
                   "'loop_waypoints' must be a boolean")

    def test_quantize_flag_type_checked(self):
        fails_with(MINIMAL.replace("duration = 1.0", "duration = 1.0\nquantize_mm = 'yes'"),
                   "'quantize_mm' must be a boolean")

    def test_q0_length_checked(self):
        fails_with(MINIMAL + "\n[arm]\nq0 = [0.0, 0.0]\n", "list of 7 numbers")

    def test_camera_needs_target(self):
        fails_with(MINIMAL + "\n[camera]\nposition = [0.0, -1.0, 0.8]\n",
                   r"section \[camera\]: missing required key 'target'")

    def test_toml_syntax_error(self):
        fails_with("[run\nduration = 1", "TOML syntax error")


class TestBuiltins:
    def test_names_include_shipped_scenarios(self):
        names = builtin_names()
        for expected in ("case1", "case2", "approach_retreat", "sphere_approach"):
            assert expected in names

    def test_load_builtin(self):
        sc = load_builtin("case2")
        assert sc.name == "case2"
        assert sc.duration == 50.0
        kinds = [t.kind for t in sc.tasks]
        assert kinds.count("virtual_wall") == 6
        assert "obstacle_avoidance" in kinds

    def test_unknown_builtin(self):
        with pytest.raises(ScenarioLoadError, match="no built-in scenario"):
            load_builtin("case99")

    def test_load_scenario_uses_file_stem(self, tmp_path):
        path = tmp_path / "probe.toml"
        path.write_text(MINIMAL)
        assert load_scenario(path).name == "probe"

    def test_name_key_wins_over_stem(self, tmp_path):
        path = tmp_path / "probe.toml"
        path.write_text('name = "better"\n' + MINIMAL)
        assert load_scenario(path).name == "better"
