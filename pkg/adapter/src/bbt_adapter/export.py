"""Export an upstream recording dump into the core interchange layout."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from bbt.calib import surface_normals
from bbt.errors import DataError
from bbt.interchange import (
    KeypointFrame,
    LabelMask,
    MaskSequence,
    PointMap,
    RecordingMeta,
    write_keypoints,
    write_mask_sequence,
    write_meta,
    write_point_map,
)

from .upstream import UpstreamRecording, load_mock

ORIENTATION_TOLERANCE_DEG = 30.0


@dataclass
class ExportJob:
    mock_dir: Path
    out_dir: Path
    transpose_pointmap: bool = False


def check_plane_orientation(points: np.ndarray, front: np.ndarray) -> float:
    """Angle (degrees) between the mean front-face normal and the camera -z
    axis. Upstream dumps with swapped point-map axes flip the normals, so
    this catches layout mistakes before anything is written."""
    if points.shape[:2] != front.shape:
        raise DataError(
            f"point map {points.shape[:2]} does not match mask grid {front.shape}")
    nf = surface_normals(PointMap(points.astype(np.float64)))
    sel = front & nf.valid
    if not sel.any():
        raise DataError("orientation check: no valid front-face normals")
    mean = nf.normals[sel].mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        raise DataError("orientation check: front-face normals cancel out")
    cos = float(np.clip(-mean[2] / norm, -1.0, 1.0))
    return math.degrees(math.acos(cos))


def export_recording(job: ExportJob) -> Path:
    """Write masks/, pointmap.pmap, keypoints.jsonl, and meta.json for one
    upstream recording; returns the dataset directory."""
    rec: UpstreamRecording = load_mock(job.mock_dir)
    points = rec.points
    if job.transpose_pointmap:
        points = np.ascontiguousarray(points.swapaxes(0, 1))

    front = rec.masks[0] == 1
    angle = check_plane_orientation(points, front)
    if angle > ORIENTATION_TOLERANCE_DEG:
        hint = "" if job.transpose_pointmap else "; try --transpose-pointmap"
        raise DataError(
            f"orientation check: front-face normals are {angle:.1f} deg from "
            f"the -z axis (limit {ORIENTATION_TOLERANCE_DEG:.0f}){hint}")

    out = Path(job.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rid = out.name
    seq = MaskSequence(rid, [(t, LabelMask(m)) for t, m in enumerate(rec.masks)])
    write_mask_sequence(seq, out / "masks")
    write_point_map(PointMap(points.astype(np.float64)), out / "pointmap.pmap")
    kp = [KeypointFrame(t, rec.side, joints) for t, joints in enumerate(rec.frames)]
    write_keypoints(kp, out / "keypoints.jsonl")
    meta = RecordingMeta(rid, rec.subject, rec.cohort, rec.side, rec.impairment, rec.fps)
    write_meta(meta, out / "meta.json")
    return out
