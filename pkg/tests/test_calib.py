import math

import numpy as np
import pytest

from bbt.calib import (
    PitchEstimate,
    estimate_pitch,
    gravity_rotation,
    pixel_pitch,
    rot_x,
    surface_normals,
)
from bbt.errors import DataError
from bbt.interchange import BinaryMask, PointMap
from bbt.synth import SyntheticScene, gen_scene


def plane_pointmap(h=16, w=16, delta=0.01, z0=1.0, tilt_x_deg=0.0):
    """Plane P(u, v) = (u*delta, v*delta, z0), optionally rotated about x."""
    u = np.arange(w) * delta
    v = np.arange(h) * delta
    x, y = np.meshgrid(u, v)
    pts = np.stack([x, y, np.zeros_like(x)], axis=2)
    pts = pts @ rot_x(math.radians(tilt_x_deg)).T
    pts[..., 2] += z0
    return PointMap(pts)


class TestSurfaceNormals:
    def test_fronto_parallel_plane(self):
        nf = surface_normals(plane_pointmap())
        assert nf.valid[:-1, :-1].all()
        assert not nf.valid[-1, :].any() and not nf.valid[:, -1].any()
        assert np.abs(nf.normals[nf.valid] - np.array([0.0, 0.0, -1.0])).max() < 1e-12

    def test_rotated_plane_normals(self):
        deg = 10.0
        nf = surface_normals(plane_pointmap(tilt_x_deg=deg))
        expected = rot_x(math.radians(deg)) @ np.array([0.0, 0.0, -1.0])
        assert np.abs(nf.normals[nf.valid] - expected).max() < 1e-6

    def test_single_valid_pixel(self):
        pts = np.full((3, 3, 3), np.nan)
        pts[1, 1] = [0.0, 0.0, 1.0]
        nf = surface_normals(PointMap(pts))
        assert not nf.valid.any()

    def test_unit_norm_invariant(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(12, 12, 3))
        nf = surface_normals(PointMap(pts))
        norms = np.linalg.norm(nf.normals[nf.valid], axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-6)


class TestPixelPitch:
    def test_horizontal_up_normal(self):
        assert pixel_pitch([0.0, -1.0, 0.0]) == pytest.approx(0.0)

    def test_toward_camera_normal(self):
        assert pixel_pitch([0.0, 0.0, -1.0]) == pytest.approx(-math.pi / 2)

    def test_diagonal_normal(self):
        s = math.sqrt(2) / 2
        assert pixel_pitch([0.0, -s, -s]) == pytest.approx(-math.pi / 4)

    def test_x_axis_normal_invalid(self):
        with pytest.raises(DataError, match="normal"):
            pixel_pitch([1.0, 0.0, 0.0])


def scene_front(scene_data):
    return BinaryMask(scene_data.clean_labels.labels == 1)


class TestEstimatePitch:
    def test_level_camera(self):
        data = gen_scene(SyntheticScene(pitch_rad=0.0))
        pe = estimate_pitch(surface_normals(data.pointmap), scene_front(data))
        assert pe.theta_hat == pytest.approx(-math.pi / 2, abs=1e-12)
        assert pe.phi == pytest.approx(0.0, abs=1e-12)
        assert pe.samples > 0

    def test_pitched_down_15deg(self):
        data = gen_scene(SyntheticScene(pitch_rad=math.radians(15.0)))
        pe = estimate_pitch(surface_normals(data.pointmap), scene_front(data))
        assert abs(pe.phi_deg - 15.0) < 0.5

    def test_front_mask_over_nan(self):
        pts = np.full((8, 8, 3), np.nan)
        nf = surface_normals(PointMap(pts))
        with pytest.raises(DataError, match="no front-face normals"):
            estimate_pitch(nf, BinaryMask(np.ones((8, 8), dtype=bool)))

    @pytest.mark.parametrize("alpha", [-45.0, -30.0, -10.0, 0.0, 10.0, 30.0, 45.0])
    def test_tilt_sweep_within_half_degree(self, alpha):
        data = gen_scene(SyntheticScene(pitch_rad=math.radians(alpha)))
        pe = estimate_pitch(surface_normals(data.pointmap), scene_front(data))
        assert abs(pe.phi_deg - alpha) < 0.5

    def test_noise_within_two_degrees(self):
        data = gen_scene(SyntheticScene(
            pitch_rad=math.radians(20.0), noise_sigma_m=0.002, grid=(64, 64), seed=4))
        pe = estimate_pitch(surface_normals(data.pointmap), scene_front(data))
        assert abs(pe.phi_deg - 20.0) < 2.0

    def test_median_robust_to_corruption(self):
        rng = np.random.default_rng(8)
        data = gen_scene(SyntheticScene(pitch_rad=math.radians(12.0)))
        nf = surface_normals(data.pointmap)
        front = scene_front(data)
        clean = estimate_pitch(nf, front)
        cells = np.argwhere(front.bits & nf.valid)
        hit = cells[rng.choice(len(cells), size=int(0.4 * len(cells)), replace=False)]
        for r, c in hit:
            v = rng.normal(size=3)
            nf.normals[r, c] = v / np.linalg.norm(v)
        corrupted = estimate_pitch(nf, front)
        assert abs(math.degrees(corrupted.theta_hat - clean.theta_hat)) < 1.0


class TestGravityRotation:
    def test_identity_for_level(self):
        np.testing.assert_allclose(
            gravity_rotation(PitchEstimate(0.0, 0.0, 1)), np.eye(3), atol=1e-15)

    def test_forward_maps_to_down_at_90(self):
        rot = gravity_rotation(PitchEstimate(0.0, math.pi / 2, 1))
        np.testing.assert_allclose(rot @ [0.0, 0.0, 1.0], [0.0, 1.0, 0.0], atol=1e-12)

    def test_orthogonal_unit_determinant(self):
        for phi in np.linspace(-1.2, 1.2, 9):
            rot = gravity_rotation(PitchEstimate(0.0, float(phi), 1))
            np.testing.assert_allclose(rot @ rot.T, np.eye(3), atol=1e-9)
            assert abs(np.linalg.det(rot) - 1.0) < 1e-9

    def test_pitched_scene_trunk_vertical(self):
        # upright synthetic subject seen by a pitched camera: after alignment
        # the trunk vector is parallel to up within 0.1 degrees
        from bbt.interchange import ANGLE_ORDER
        from bbt.kinematics import align_to_gravity, angle_between
        from bbt.synth import SyntheticMotion, gen_motion

        targets = np.full((1, len(ANGLE_ORDER)), 90.0)
        targets[0, ANGLE_ORDER.index("trunk")] = 0.0
        kp, _ = gen_motion(SyntheticMotion(targets), pitch_rad=math.radians(18.0))
        data = gen_scene(SyntheticScene(pitch_rad=math.radians(18.0)))
        pe = estimate_pitch(surface_normals(data.pointmap), scene_front(data))
        aligned = align_to_gravity(kp, gravity_rotation(pe))[0]
        trunk = aligned.joints["neck"] - aligned.joints["pelvis"]
        assert angle_between(trunk, [0.0, -1.0, 0.0]) < 0.1
