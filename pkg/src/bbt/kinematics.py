"""Gravity alignment of keypoints and conversion to the 18 named joint angles.

All angles are unsigned interior angles in [0, 180] degrees. The trunk angle
is measured against the up axis (0, -1, 0) of the gravity-aligned frame, so
an upright trunk scores 0 and larger values always mean more lean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .interchange import ANGLE_ORDER, KeypointFrame, SkeletonSpec

UP = np.array([0.0, -1.0, 0.0])  # -g in the gravity-aligned frame


@dataclass
class AngleFrame:
    t: int
    side: str
    angles: dict[str, float]  # name -> degrees

    def vector(self, names=ANGLE_ORDER) -> np.ndarray:
        return np.array([self.angles[n] for n in names])


def align_to_gravity(frames: list[KeypointFrame], rot: np.ndarray) -> list[KeypointFrame]:
    """Left-multiply every joint position by rot; per-frame, no filtering."""
    rot = np.asarray(rot, dtype=float)
    out = []
    for f in frames:
        joints = {name: rot @ p for name, p in f.joints.items()}
        out.append(KeypointFrame(f.t, f.side, joints))
    return out


def angle_between(u, v, label: str = "segment") -> float:
    """3-D angle between two vectors in degrees, in [0, 180]."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DataError(f"degenerate segment for {label!r}: zero-length vector")
    cosang = np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)
    return math.degrees(math.acos(cosang))


def triplet_angle(a, b, c, label: str = "triplet") -> float:
    """Interior angle at b between segments b->a and b->c, degrees."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    return angle_between(a - b, c - b, label)


def frame_angles(frame: KeypointFrame, spec: SkeletonSpec) -> AngleFrame:
    """All 18 named angles of one gravity-aligned keypoint frame."""
    j = frame.joints
    for name in spec.joints:
        if name not in j:
            raise DataError(f"frame {frame.t}: missing joint {name!r}")
    angles: dict[str, float] = {}
    for name, (a, b, c) in spec.triplets.items():
        u = _segment(j, b, a, name)
        v = _segment(j, b, c, name)
        angles[name] = angle_between(u, v, label=name)
    for name, (va, vb) in spec.vector_pairs.items():
        angles[name] = angle_between(_resolve(va, j, name), _resolve(vb, j, name),
                                     label=name)
    return AngleFrame(frame.t, frame.side, angles)


def _segment(joints: dict[str, np.ndarray], tail: str, head: str, angle: str) -> np.ndarray:
    v = joints[head] - joints[tail]
    if not np.any(v):
        raise DataError(f"angle {angle!r}: degenerate segment {tail}->{head}")
    return v


def _resolve(vec: tuple, joints: dict[str, np.ndarray], angle: str) -> np.ndarray:
    if vec[0] == "axis":
        return UP
    _, tail, head = vec
    return _segment(joints, tail, head, angle)
