"""Parser for stored upstream model outputs (the `--mock` replay format).

A mock recording directory holds the raw dumps of the upstream segmentation
and body-pose models:

    segmentation.npz   key "masks":  (T, H, W) uint8 labels {0, 1, 2}
    geometry.npz       key "points": (H, W, 3) float32 camera-frame point map
    pose.json          fps, side, subject, cohort, impairment, and per-frame
                       joints keyed by upstream names (side-prefixed for the
                       limb/hand, e.g. "right_wrist"; "neck"/"pelvis" bare)

Schema problems are reported with the offending field path so upstream
regressions are easy to pin down.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from bbt.errors import DataError
from bbt.interchange import default_skeleton_spec

UNPREFIXED_JOINTS = ("pelvis", "neck")
COHORTS = ("healthy", "patient")
SIDES = ("left", "right")


@dataclass
class UpstreamRecording:
    masks: np.ndarray                      # (T, H, W) uint8
    points: np.ndarray                     # (H, W, 3) float32
    fps: float
    side: str
    subject: str
    cohort: str
    impairment: str
    frames: list[dict[str, np.ndarray]]    # core joint name -> (3,) per frame


def upstream_joint_name(core_name: str, side: str) -> str:
    if core_name in UNPREFIXED_JOINTS:
        return core_name
    return f"{side}_{core_name}"


def _load_npz_array(path: Path, key: str, ndim: int) -> np.ndarray:
    try:
        with np.load(path) as doc:
            if key not in doc:
                raise DataError(f"{path.name}: missing array {key!r}")
            arr = doc[key]
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    if arr.ndim != ndim:
        raise DataError(f"{path.name}: {key}: expected {ndim}-D, got {arr.ndim}-D")
    return arr


def _parse_frame_joints(doc: dict, index: int, side: str) -> dict[str, np.ndarray]:
    where = f"pose.json: frames[{index}]"
    joints_doc = doc.get("joints")
    if not isinstance(joints_doc, dict):
        raise DataError(f"{where}.joints: missing or not an object")
    joints = {}
    for core_name in default_skeleton_spec().joints:
        key = upstream_joint_name(core_name, side)
        if key not in joints_doc:
            raise DataError(f"{where}.joints.{key}: missing joint")
        value = joints_doc[key]
        if not (isinstance(value, list) and len(value) == 3):
            raise DataError(f"{where}.joints.{key}: expected [x, y, z]")
        try:
            p = np.array([float(v) for v in value])
        except (TypeError, ValueError) as e:
            raise DataError(f"{where}.joints.{key}: {e}") from e
        if not np.all(np.isfinite(p)):
            raise DataError(f"{where}.joints.{key}: non-finite coordinate")
        joints[core_name] = p
    return joints


def load_mock(mock_dir: str | Path) -> UpstreamRecording:
    root = Path(mock_dir)
    if not root.is_dir():
        raise DataError(f"missing mock recording directory: {root}")

    masks = _load_npz_array(root / "segmentation.npz", "masks", ndim=3)
    if masks.dtype != np.uint8 or not np.isin(masks, (0, 1, 2)).all():
        raise DataError("segmentation.npz: masks: labels must be uint8 in {0, 1, 2}")
    points = _load_npz_array(root / "geometry.npz", "points", ndim=3)
    if points.shape[2] != 3 or points.dtype != np.float32:
        raise DataError("geometry.npz: points: expected (H, W, 3) float32")

    pose_path = root / "pose.json"
    try:
        pose = json.loads(pose_path.read_text())
    except OSError as e:
        raise DataError(f"cannot read {pose_path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"pose.json: invalid JSON: {e}") from e

    for field in ("fps", "side", "subject", "cohort", "impairment", "frames"):
        if field not in pose:
            raise DataError(f"pose.json: {field}: missing field")
    side = pose["side"]
    if side not in SIDES:
        raise DataError(f"pose.json: side: must be one of {SIDES}")
    if pose["cohort"] not in COHORTS:
        raise DataError(f"pose.json: cohort: must be one of {COHORTS}")
    fps = float(pose["fps"])
    if not (math.isfinite(fps) and fps > 0):
        raise DataError("pose.json: fps: must be a positive number")
    if not isinstance(pose["frames"], list) or not pose["frames"]:
        raise DataError("pose.json: frames: must be a nonempty list")

    frames = [_parse_frame_joints(doc, i, side) for i, doc in enumerate(pose["frames"])]
    return UpstreamRecording(
        masks=masks, points=points, fps=fps, side=side,
        subject=str(pose["subject"]), cohort=pose["cohort"],
        impairment=str(pose["impairment"]), frames=frames,
    )
