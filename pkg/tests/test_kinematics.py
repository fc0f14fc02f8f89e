import math

import numpy as np
import pytest

from bbt.calib import rot_x
from bbt.errors import DataError
from bbt.interchange import ANGLE_ORDER, KeypointFrame, default_skeleton_spec
from bbt.kinematics import align_to_gravity, angle_between, frame_angles, triplet_angle
from bbt.synth import SyntheticMotion, gen_motion, pose_from_targets, random_targets, SegmentLengths

SPEC = default_skeleton_spec()


def _targets(**overrides):
    t = {name: 120.0 for name in ANGLE_ORDER}
    t.update(shoulder=40.0, elbow=110.0, wrist=20.0, trunk=10.0)
    t.update(overrides)
    return t


def _frame_from_targets(**overrides):
    joints = pose_from_targets(_targets(**overrides), SegmentLengths())
    return KeypointFrame(0, "right", joints)


class TestAlignToGravity:
    def test_identity(self):
        frames = [_frame_from_targets()]
        out = align_to_gravity(frames, np.eye(3))
        for n in frames[0].joints:
            np.testing.assert_array_equal(out[0].joints[n], frames[0].joints[n])

    def test_rx_minus_90(self):
        f = KeypointFrame(0, "left", {n: [0.0, 0.0, 1.0] for n in SPEC.joints})
        out = align_to_gravity([f], rot_x(-math.pi / 2))
        np.testing.assert_allclose(out[0].joints["wrist"], [0.0, 1.0, 0.0], atol=1e-12)

    def test_order_preserved(self):
        frames = [_frame_from_targets(), _frame_from_targets(elbow=90.0)]
        frames[1].t = 5
        out = align_to_gravity(frames, rot_x(0.3))
        assert [f.t for f in out] == [0, 5]


class TestAngleBetween:
    def test_parallel(self):
        assert angle_between([1, 0, 0], [1, 0, 0]) == pytest.approx(0.0)

    def test_orthogonal(self):
        assert angle_between([1, 0, 0], [0, 1, 0]) == pytest.approx(90.0)

    def test_opposite(self):
        assert angle_between([1, 0, 0], [-1, 0, 0]) == pytest.approx(180.0)

    def test_zero_vector(self):
        with pytest.raises(DataError, match="forearm"):
            angle_between([0, 0, 0], [1, 0, 0], label="forearm")


class TestTripletAngle:
    def test_collinear(self):
        assert triplet_angle([0, 0, 0], [1, 0, 0], [2, 0, 0]) == pytest.approx(180.0)

    def test_right_angle(self):
        assert triplet_angle([0, 0, 0], [1, 0, 0], [1, 1, 0]) == pytest.approx(90.0)

    def test_120_degrees(self):
        a, b, c = [0, 0, 0], [1, 0, 0], [1.5, math.sqrt(3) / 2, 0]
        assert triplet_angle(a, b, c) == pytest.approx(120.0)


class TestFrameAngles:
    def test_straight_hanging_arm(self):
        overrides = {n: 180.0 for n in ANGLE_ORDER}
        overrides.update(shoulder=0.0, wrist=0.0, trunk=0.0)
        f = _frame_from_targets(**overrides)
        angles = frame_angles(f, SPEC).angles
        # arccos amplifies fp noise near the 0/180 boundary, hence 1e-5 deg
        assert angles["elbow"] == pytest.approx(180.0, abs=1e-5)
        assert angles["trunk"] == pytest.approx(0.0, abs=1e-5)
        for name in ANGLE_ORDER[:14]:
            assert angles[name] == pytest.approx(180.0, abs=1e-5)

    def test_programmed_90deg_elbow(self):
        f = _frame_from_targets(elbow=90.0)
        angles = frame_angles(f, SPEC).angles
        assert angles["elbow"] == pytest.approx(90.0, abs=1e-6)

    def test_wrist_equals_elbow_degenerate(self):
        f = _frame_from_targets()
        f.joints["wrist"] = f.joints["elbow"].copy()
        with pytest.raises(DataError, match="wrist"):
            frame_angles(f, SPEC)

    def test_all_18_present_in_range(self):
        angles = frame_angles(_frame_from_targets(), SPEC).angles
        assert set(angles) == set(ANGLE_ORDER)
        assert all(0.0 <= v <= 180.0 for v in angles.values())


def _random_rotation(rng):
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def _transform(frame, fn):
    return KeypointFrame(frame.t, frame.side, {n: fn(p) for n, p in frame.joints.items()})


class TestInvariances:
    def test_translation_invariance(self):
        rng = np.random.default_rng(2)
        f = _frame_from_targets()
        base = frame_angles(f, SPEC).angles
        offset = rng.normal(size=3) * 5.0
        moved = frame_angles(_transform(f, lambda p: p + offset), SPEC).angles
        for n in ANGLE_ORDER:
            assert moved[n] == pytest.approx(base[n], abs=1e-9)

    def test_scale_invariance(self):
        f = _frame_from_targets()
        base = frame_angles(f, SPEC).angles
        scaled = frame_angles(_transform(f, lambda p: p * 3.7), SPEC).angles
        for n in ANGLE_ORDER:
            assert scaled[n] == pytest.approx(base[n], abs=1e-9)

    def test_rotation_invariance_except_trunk(self):
        rng = np.random.default_rng(4)
        f = _frame_from_targets()
        base = frame_angles(f, SPEC).angles
        rot = _random_rotation(rng)
        rotated = frame_angles(_transform(f, lambda p: rot @ p), SPEC).angles
        for n in ANGLE_ORDER:
            if n == "trunk":
                continue
            assert rotated[n] == pytest.approx(base[n], abs=1e-9)

    def test_trunk_invariant_under_gravity_axis_rotation(self):
        f = _frame_from_targets(trunk=25.0)
        base = frame_angles(f, SPEC).angles["trunk"]
        a = 0.9
        rot_y = np.array([
            [math.cos(a), 0.0, math.sin(a)],
            [0.0, 1.0, 0.0],
            [-math.sin(a), 0.0, math.cos(a)],
        ])
        rotated = frame_angles(_transform(f, lambda p: rot_y @ p), SPEC).angles["trunk"]
        assert rotated == pytest.approx(base, abs=1e-9)


class TestRoundTrip:
    def test_targets_reproduced(self):
        rng = np.random.default_rng(6)
        targets = random_targets(20, rng)
        kp, truth = gen_motion(SyntheticMotion(targets))
        for f, t in zip(kp, truth):
            angles = frame_angles(f, SPEC).angles
            for n in ANGLE_ORDER:
                assert angles[n] == pytest.approx(t.angles[n], abs=1e-6)
