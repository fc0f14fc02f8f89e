"""CSV readers/writers for angle and feature tables.

All numeric output is fixed at 6 decimal places so reruns diff clean.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import DataError
from .interchange import ANGLE_ORDER, ARM_ANGLE_ORDER
from .kinematics import AngleFrame


def _fmt(v: float) -> str:
    return f"{float(v):.6f}"


def write_angles_csv(frames: list[AngleFrame], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "side", *ANGLE_ORDER])
        for f in frames:
            w.writerow([f.t, f.side, *(_fmt(f.angles[n]) for n in ANGLE_ORDER)])


def read_angles_csv(path: str | Path) -> list[AngleFrame]:
    p = Path(path)
    try:
        with open(p, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as e:
        raise DataError(f"cannot read {p}: {e}") from e
    frames = []
    for i, row in enumerate(rows):
        try:
            angles = {n: float(row[n]) for n in ANGLE_ORDER}
            frames.append(AngleFrame(int(row["t"]), row["side"], angles))
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{p}: bad angle row {i + 2}: {e}") from e
    if not frames:
        raise DataError(f"{p}: empty angles table")
    return frames


def write_features_csv(recording_id: str, frames: list[AngleFrame],
                       matrix: np.ndarray, space: str, path: str | Path) -> None:
    """One row per frame: recording id, t, side, then the feature columns."""
    if space == "pca13":
        k = matrix.shape[1] - len(ARM_ANGLE_ORDER)
        cols = [f"pc_{i + 1}" for i in range(k)] + list(ARM_ANGLE_ORDER)
    elif space == "raw18":
        cols = list(ANGLE_ORDER)
    else:
        raise DataError(f"unknown feature space {space!r}")
    if matrix.shape != (len(frames), len(cols)):
        raise DataError("feature matrix shape does not match frames/space")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["recording_id", "t", "side", *cols])
        for f, row in zip(frames, matrix):
            w.writerow([recording_id, f.t, f.side, *(_fmt(v) for v in row)])


def read_features_csv(paths) -> tuple[np.ndarray, list[str]]:
    """Concatenate one or more feature CSVs; returns (matrix, recording ids
    per row). All files must share the same feature columns."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    matrix_rows: list[list[float]] = []
    rec_ids: list[str] = []
    cols: list[str] | None = None
    for path in paths:
        p = Path(path)
        try:
            with open(p, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header is None or header[:3] != ["recording_id", "t", "side"]:
                    raise DataError(f"{p}: not a feature CSV")
                if cols is None:
                    cols = header[3:]
                elif header[3:] != cols:
                    raise DataError(f"{p}: feature columns differ from earlier files")
                for row in reader:
                    rec_ids.append(row[0])
                    matrix_rows.append([float(v) for v in row[3:]])
        except OSError as e:
            raise DataError(f"cannot read {p}: {e}") from e
        except ValueError as e:
            raise DataError(f"{p}: bad feature value: {e}") from e
    if not matrix_rows:
        raise DataError("empty feature table")
    return np.array(matrix_rows), rec_ids


def write_scores_csv(rows: list[dict], path: str | Path) -> None:
    cols = ["subject", "side", "impairment", "frames", "raw_distance", "score"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([r["subject"], r["side"], r["impairment"], r["frames"],
                        _fmt(r["raw_distance"]), _fmt(r["score"])])
