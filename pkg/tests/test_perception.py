"""Depth pipeline tests, parametrized over kernel backends.

The brute-force scan oracle reimplements the membership/argmin rule over
the whole image with independent numpy code; kernel results must match it
bit for bit, which also proves the rect pruning never drops a candidate.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpik import default_arm
from tpik.kinematics import Chain
from tpik.perception import (Box, CameraModel, DepthImage, DepthPoint,
                             PointCloud, Sphere, SurveillanceRegion,
                             available_backends, closest_surface_point,
                             depth_to_cartesian, distance_vector,
                             min_distance_search, project_to_depth, read_pgm,
                             remove_robot, render_depth, robot_link_boxes,
                             write_pgm)

BACKENDS = available_backends()


@pytest.fixture(params=BACKENDS)
def kern(request):
    return request.param


def small_camera(**kwargs):
    # 64 x 48 keeps full-image scans cheap.
    defaults = dict(width=64, height=48, principal_x=32.0, principal_y=24.0,
                    density_x=3.0e4, density_y=3.0e4)
    defaults.update(kwargs)
    return CameraModel(**defaults)


def brute_force_min(depth, camera, target_base, rho):
    """Full-image scan with the same membership and tie-break rules."""
    target = camera.to_camera(target_base)
    height, width = depth.shape
    ax = (np.arange(width, dtype=float) - camera.principal_x) / camera.fx
    ay = (np.arange(height, dtype=float) - camera.principal_y) / camera.fy
    with np.errstate(invalid="ignore"):
        vx = ax[None, :] * depth - target[0]
        vy = ay[:, None] * depth - target[1]
        vz = depth - target[2]
        member = (np.isfinite(depth) & (np.abs(vx) <= rho)
                  & (np.abs(vy) <= rho) & (np.abs(vz) <= rho))
        if not member.any():
            return None
        d2 = np.where(member, vx * vx + vy * vy + vz * vz, np.inf)
    row, col = np.unravel_index(int(np.argmin(d2)), d2.shape)
    return row, col, vx[row, col], vy[row, col], vz[row, col], d2[row, col]


def random_scene(rng, n_spheres=2, n_boxes=2, n_points=4):
    from scipy.spatial.transform import Rotation
    prims = []
    for _ in range(n_spheres):
        prims.append(Sphere(np.array([rng.uniform(-0.6, 0.6), rng.uniform(-0.5, 0.5),
                                      rng.uniform(0.8, 3.0)]),
                            rng.uniform(0.05, 0.35)))
    for _ in range(n_boxes):
        rot = Rotation.random(random_state=int(rng.integers(0, 2 ** 31))).as_matrix()
        prims.append(Box(np.array([rng.uniform(-0.6, 0.6), rng.uniform(-0.5, 0.5),
                                   rng.uniform(0.8, 3.0)]),
                         rng.uniform(0.05, 0.4, 3), rot))
    if n_points:
        prims.append(PointCloud(np.column_stack([
            rng.uniform(-0.8, 0.8, n_points), rng.uniform(-0.6, 0.6, n_points),
            rng.uniform(0.5, 3.0, n_points)])))
    return prims


# ---------------------------------------------------------------- camera


class TestCameraModel:
    def test_focal_in_pixels(self):
        cam = CameraModel()
        assert cam.fx == pytest.approx(365.0)
        assert cam.width == 512 and cam.height == 424

    def test_rejects_bad_principal_point(self):
        with pytest.raises(ValueError):
            CameraModel(principal_x=600.0)

    def test_rejects_non_orthonormal_rotation(self):
        bad = np.eye(3)
        bad[0, 1] = 0.01
        with pytest.raises(ValueError):
            CameraModel(rotation=bad)

    def test_frame_roundtrip(self):
        rng = np.random.default_rng(3)
        from scipy.spatial.transform import Rotation
        rot = Rotation.random(random_state=5).as_matrix()
        cam = CameraModel(rotation=rot, translation=rng.normal(size=3))
        p = rng.normal(size=3)
        assert np.allclose(cam.to_base(cam.to_camera(p)), p, atol=1e-12)

    def test_looking_at_horizontal(self):
        cam = CameraModel.looking_at((0.0, -1.6, 0.7), (0.0, 0.0, 0.7))
        assert np.allclose(cam.rotation, [[1, 0, 0], [0, 0, -1], [0, 1, 0]], atol=1e-12)
        # The target sits on the optical axis at the principal point.
        dp = project_to_depth(cam.to_camera((0.0, 0.0, 0.7)), cam)
        assert dp.px == pytest.approx(cam.principal_x)
        assert dp.py == pytest.approx(cam.principal_y)
        assert dp.depth == pytest.approx(1.6)
        # World up maps to decreasing row index.
        above = project_to_depth(cam.to_camera((0.0, 0.0, 1.0)), cam)
        assert above.py < cam.principal_y

    def test_projection_rejects_behind_camera(self):
        cam = CameraModel()
        with pytest.raises(ValueError):
            project_to_depth((0.0, 0.0, -0.5), cam)
        with pytest.raises(ValueError):
            depth_to_cartesian(DepthPoint(10.0, 10.0, 0.0), cam)


class TestDepthSpaceMaps:
    @settings(max_examples=200, deadline=None)
    @given(px=st.floats(0.0, 511.0), py=st.floats(0.0, 423.0),
           d=st.floats(0.05, 10.0))
    def test_roundtrip(self, px, py, d):
        cam = CameraModel()
        point = depth_to_cartesian(DepthPoint(px, py, d), cam)
        back = project_to_depth(point, cam)
        assert abs(back.px - px) < 1e-9
        assert abs(back.py - py) < 1e-9
        assert abs(back.depth - d) < 1e-9

    def test_distance_vector_matches_subtraction(self):
        cam = CameraModel()
        rng = np.random.default_rng(11)
        for _ in range(200):
            a = DepthPoint(rng.uniform(0, 511), rng.uniform(0, 423), rng.uniform(0.1, 5))
            b = DepthPoint(rng.uniform(0, 511), rng.uniform(0, 423), rng.uniform(0.1, 5))
            direct = distance_vector(a, b, cam)
            explicit = depth_to_cartesian(b, cam) - depth_to_cartesian(a, cam)
            assert np.abs(direct - explicit).max() < 1e-12


# ---------------------------------------------------------------- render


class TestRender:
    def test_on_axis_sphere_depth_exact(self, kern):
        # a=1, b=-5, c=6 at the central ray: t = (5 - 1)/2 = 2 exactly.
        cam = CameraModel()
        img = render_depth([Sphere((0.0, 0.0, 2.5), 0.5)], cam, kernel_backend=kern)
        assert img.values[212, 256] == 2.0

    def test_sphere_silhouette(self, kern):
        cam = CameraModel()
        img = render_depth([Sphere((0.0, 0.0, 2.5), 0.5)], cam, kernel_backend=kern)
        finite = np.isfinite(img.values)
        rows, cols = np.nonzero(finite)
        radii = np.hypot(rows - 212.0, cols - 256.0)
        # tan of the half-angle subtended by the sphere
        edge = cam.fx * 0.5 / np.sqrt(2.5 ** 2 - 0.5 ** 2)
        assert radii.max() <= edge + 1.5
        assert radii.max() >= edge - 1.5
        vals = img.values[finite]
        assert vals.min() >= 2.0 and vals.max() < 2.5

    def test_axis_aligned_box_front_face(self, kern):
        cam = CameraModel()
        img = render_depth([Box((0.0, 0.0, 2.5), (0.5, 0.5, 0.5))], cam,
                           kernel_backend=kern)
        assert img.values[212, 256] == 2.0
        # Pixels whose ray crosses the front face see exactly z = 2.
        assert img.values[212, 256 + 30] == 2.0

    def test_point_returns(self, kern):
        cam = CameraModel()
        img = render_depth([PointCloud([[0.1, -0.05, 1.5]])], cam, kernel_backend=kern)
        dp = project_to_depth((0.1, -0.05, 1.5), cam)
        row, col = int(np.floor(dp.py + 0.5)), int(np.floor(dp.px + 0.5))
        assert img.values[row, col] == 1.5
        assert np.isfinite(img.values).sum() == 1

    def test_occlusion_keeps_nearest(self, kern):
        cam = CameraModel()
        img = render_depth([Sphere((0.0, 0.0, 3.0), 0.5), Sphere((0.0, 0.0, 1.5), 0.2)],
                           cam, kernel_backend=kern)
        assert img.values[212, 256] == pytest.approx(1.3, abs=1e-12)
        behind = render_depth([Sphere((0.0, 0.0, 1.5), 0.2),
                               PointCloud([[0.0, 0.0, 2.0]])], cam, kernel_backend=kern)
        assert behind.values[212, 256] == pytest.approx(1.3, abs=1e-12)

    def test_primitive_behind_camera_invisible(self, kern):
        cam = CameraModel()
        img = render_depth([Sphere((0.0, 0.0, -2.0), 0.5),
                            PointCloud([[0.0, 0.0, -1.0]])], cam, kernel_backend=kern)
        assert not np.isfinite(img.values).any()

    def test_quantization_snaps_to_mm(self, kern):
        cam = small_camera()
        scene = [Sphere((0.05, -0.04, 1.7), 0.3)]
        raw = render_depth(scene, cam, kernel_backend=kern)
        snapped = render_depth(scene, cam, quantize_mm=True, kernel_backend=kern)
        finite = np.isfinite(raw.values)
        assert np.array_equal(finite, np.isfinite(snapped.values))
        assert np.abs(raw.values[finite] - snapped.values[finite]).max() <= 5e-4 + 1e-12
        mm = snapped.values[finite] * 1000.0
        assert np.abs(mm - np.round(mm)).max() < 1e-6


# ---------------------------------------------------------------- removal


class TestRobotRemoval:
    def test_link_boxes_cover_joints(self):
        model = default_arm()
        rng = np.random.default_rng(4)
        q = rng.uniform(-1.0, 1.0, 7)
        boxes = robot_link_boxes(model, q, inflation=0.02)
        chain = Chain(model, q)
        for origin in chain.origins[1:]:
            assert any(b.contains(origin) for b in boxes)

    def test_self_scene_fully_removed(self, kern):
        model = default_arm()
        q = np.zeros(7)
        cam = CameraModel.looking_at((0.0, -1.6, 0.7), (0.0, 0.0, 0.7))
        img = render_depth(robot_link_boxes(model, q), cam, kernel_backend=kern)
        assert np.isfinite(img.values).any()
        cleaned = remove_robot(img, model, q, kernel_backend=kern)
        assert not np.isfinite(cleaned.values).any()

    def test_obstacle_survives_removal(self, kern):
        model = default_arm()
        q = np.zeros(7)
        cam = CameraModel.looking_at((0.0, -1.6, 0.7), (0.0, 0.0, 0.7))
        scene = [Sphere((0.4, 0.6, 0.9), 0.12)] + robot_link_boxes(model, q)
        cleaned = remove_robot(render_depth(scene, cam, kernel_backend=kern),
                               model, q, kernel_backend=kern)
        assert np.isfinite(cleaned.values).sum() > 20

    def test_removal_idempotent(self, kern):
        model = default_arm()
        q = np.full(7, 0.3)
        cam = CameraModel.looking_at((0.2, -1.5, 0.8), (0.0, 0.0, 0.6))
        scene = [Sphere((0.0, 0.7, 0.8), 0.15)] + robot_link_boxes(model, q)
        once = remove_robot(render_depth(scene, cam, kernel_backend=kern),
                            model, q, kernel_backend=kern)
        twice = remove_robot(once, model, q, kernel_backend=kern)
        assert np.array_equal(once.values, twice.values)


# ---------------------------------------------------------------- search


class TestMinSearch:
    def test_single_return_exact(self, kern):
        # One return at (0,0,1); target 0.3 m away along -x. All values
        # are exact in binary: v = (0.3, 0, 0), sigma = 0.3.
        cam = CameraModel()
        img = render_depth([PointCloud([[0.0, 0.0, 1.0]])], cam, kernel_backend=kern)
        region = SurveillanceRegion((-0.3, 0.0, 1.0), 0.5, "probe")
        res, = min_distance_search(img, [region], kernel_backend=kern)
        assert res.valid
        assert res.distance == 0.3
        assert np.array_equal(res.vector_base, [0.3, 0.0, 0.0])
        assert np.array_equal(res.closest_base, [0.0, 0.0, 1.0])
        assert res.pixel == (212, 256)

    def test_tie_breaks_row_major(self, kern):
        cam = CameraModel()
        img = render_depth([PointCloud([[-0.2, 0.0, 1.0], [0.2, 0.0, 1.0]])],
                           cam, kernel_backend=kern)
        res, = min_distance_search(img, [SurveillanceRegion((0.0, 0.0, 1.0), 0.5)],
                                   kernel_backend=kern)
        assert res.valid
        assert res.pixel == (212, 183)

    def test_inf_norm_membership(self, kern):
        # 2-norm of the lone return is inside rho but one axis exceeds it.
        cam = CameraModel()
        img = render_depth([PointCloud([[0.0, 0.0, 1.0]])], cam, kernel_backend=kern)
        res, = min_distance_search(
            img, [SurveillanceRegion((0.0, 0.21, 1.0), 0.2)], kernel_backend=kern)
        assert not res.valid

    def test_empty_region_invalid(self, kern):
        cam = CameraModel()
        img = DepthImage.empty(cam)
        res, = min_distance_search(img, [SurveillanceRegion((0.0, 0.0, 1.0), 0.5)],
                                   kernel_backend=kern)
        assert not res.valid
        assert res.closest_base is None

    def test_region_projecting_outside_image(self, kern):
        cam = CameraModel()
        img = render_depth([Sphere((0.0, 0.0, 2.0), 0.3)], cam, kernel_backend=kern)
        res, = min_distance_search(img, [SurveillanceRegion((50.0, 0.0, 2.0), 0.5)],
                                   kernel_backend=kern)
        assert not res.valid

    def test_behind_camera_region_falls_back_to_full_scan(self, kern):
        cam = CameraModel()
        img = render_depth([PointCloud([[0.0, 0.0, 0.4]])], cam, kernel_backend=kern)
        # Cube straddles the camera plane; members can still exist.
        res, = min_distance_search(img, [SurveillanceRegion((0.0, 0.0, 0.1), 0.5)],
                                   kernel_backend=kern)
        assert res.valid
        assert res.distance == pytest.approx(0.3, abs=1e-12)

    def test_matches_brute_force_scan(self, kern):
        rng = np.random.default_rng(42)
        cam = small_camera()
        hits = 0
        for _ in range(25):
            img = render_depth(random_scene(rng), cam, kernel_backend=kern)
            target = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.4, 0.4),
                               rng.uniform(0.6, 2.5)])
            rho = rng.uniform(0.2, 0.8)
            expect = brute_force_min(img.values, cam, target, rho)
            res, = min_distance_search(img, [SurveillanceRegion(target, rho)],
                                       kernel_backend=kern)
            if expect is None:
                assert not res.valid
                continue
            hits += 1
            row, col, vx, vy, vz, d2 = expect
            assert res.pixel == (row, col)
            assert res.vector_base[0] == vx and res.vector_base[1] == vy
            assert res.vector_base[2] == vz
            assert res.distance == np.sqrt(d2)
        assert hits >= 10

    def test_distance_consistent_with_vector(self, kern):
        rng = np.random.default_rng(9)
        cam = small_camera()
        img = render_depth(random_scene(rng), cam, kernel_backend=kern)
        res, = min_distance_search(img, [SurveillanceRegion((0.0, 0.0, 1.5), 0.8)],
                                   kernel_backend=kern)
        if res.valid:
            assert abs(np.linalg.norm(res.vector_base) - res.distance) < 1e-12
            assert np.abs(res.closest_base - ((0.0, 0.0, 1.5) + res.vector_base)).max() < 1e-12

    def test_measured_distance_never_below_exact(self, kern):
        # Depth pixels lie on the surface, so the pixel minimum cannot
        # undercut the true geometric minimum to the obstacle.
        model = default_arm()
        q = np.zeros(7)
        cam = CameraModel.looking_at((0.0, -1.6, 0.7), (0.0, 0.0, 0.7))
        sphere = Sphere((0.25, 0.6, 0.9), 0.12)
        scene = [sphere] + robot_link_boxes(model, q)
        cleaned = remove_robot(render_depth(scene, cam, kernel_backend=kern),
                               model, q, kernel_backend=kern)
        chain = Chain(model, q)
        for cp in model.control_points:
            p = chain.joint_position(cp.joint, cp.offset)
            res, = min_distance_search(cleaned, [SurveillanceRegion(p, 0.5)],
                                       kernel_backend=kern)
            if res.valid:
                exact = np.linalg.norm(closest_surface_point(sphere, p) - p)
                assert res.distance >= exact - 1e-9


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend unavailable")
class TestBackendParity:
    def test_bitwise_identical_outputs(self):
        rng = np.random.default_rng(1234)
        cam = small_camera()
        for _ in range(10):
            scene = random_scene(rng)
            img_c = render_depth(scene, cam, kernel_backend="compiled")
            img_p = render_depth(scene, cam, kernel_backend="python")
            assert np.array_equal(img_c.values, img_p.values)
            model = default_arm()
            q = rng.uniform(-0.5, 0.5, 7)
            rem_c = remove_robot(img_c, model, q, kernel_backend="compiled")
            rem_p = remove_robot(img_p, model, q, kernel_backend="python")
            assert np.array_equal(rem_c.values, rem_p.values)
            region = SurveillanceRegion(
                np.array([rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                          rng.uniform(0.6, 2.0)]), rng.uniform(0.3, 0.8))
            res_c, = min_distance_search(rem_c, [region], kernel_backend="compiled")
            res_p, = min_distance_search(rem_p, [region], kernel_backend="python")
            assert res_c.valid == res_p.valid
            if res_c.valid:
                assert res_c.pixel == res_p.pixel
                assert res_c.distance == res_p.distance
                assert np.array_equal(res_c.vector_base, res_p.vector_base)


# ---------------------------------------------------------------- pgm io


class TestPgmRoundtrip:
    def test_roundtrip_mm_quantized(self, tmp_path, kern):
        cam = small_camera()
        rng = np.random.default_rng(8)
        img = render_depth(random_scene(rng), cam, kernel_backend=kern)
        path = tmp_path / "depth.pgm"
        write_pgm(img, path)
        back = read_pgm(path)
        finite = np.isfinite(img.values)
        assert np.array_equal(finite, np.isfinite(back))
        expect = np.round(img.values[finite] * 1000.0) / 1000.0
        assert np.abs(back[finite] - expect).max() < 1e-12

    def test_header(self, tmp_path):
        cam = small_camera()
        path = tmp_path / "empty.pgm"
        write_pgm(DepthImage.empty(cam), path)
        head = path.read_text().splitlines()[:3]
        assert head == ["P2", "64 48", "65535"]
        assert not np.isfinite(read_pgm(path)).any()

    def test_rejects_non_pgm(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_text("P5 binary nonsense")
        with pytest.raises(ValueError):
            read_pgm(path)
