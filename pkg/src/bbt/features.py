"""Finger-synergy PCA fitted on healthy frames, and per-frame feature vectors.

The scoring vector is k PC coefficients followed by the shoulder, elbow,
wrist, and trunk angles in raw degrees (default 9 + 4 = 13). The raw vector
is the 18 named angles in interchange.ANGLE_ORDER. Distances in the scoring
space therefore mix PC units and degrees; no weighting is applied.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .interchange import ANGLE_ORDER, ARM_ANGLE_ORDER, FINGER_ANGLE_ORDER
from .kinematics import AngleFrame

MIN_SAMPLES = 15
DEFAULT_VARIANCE_THRESHOLD = 0.90


@dataclass
class PcaModel:
    mean: np.ndarray         # (14,)
    components: np.ndarray   # (k, 14), orthonormal rows
    explained_ratio: np.ndarray  # (k,), non-increasing

    @property
    def k(self) -> int:
        return self.components.shape[0]


@dataclass
class FeatureVector:
    scoring: np.ndarray  # (k + 4,)
    raw: np.ndarray      # (18,)


def fit_pca(healthy_fingers: np.ndarray, variance_threshold: float = DEFAULT_VARIANCE_THRESHOLD) -> PcaModel:
    """Fit on N x 14 healthy finger angles; keep the minimal number of
    components whose explained-variance ratios sum to >= the threshold."""
    x = np.asarray(healthy_fingers, dtype=float)
    if x.ndim != 2 or x.shape[1] != len(FINGER_ANGLE_ORDER):
        raise DataError(f"expected N x {len(FINGER_ANGLE_ORDER)} finger matrix, got {x.shape}")
    n = x.shape[0]
    if n < MIN_SAMPLES:
        raise DataError(f"insufficient samples: need at least {MIN_SAMPLES}, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    # SVD route; the test suite checks it against an explicit covariance
    # eigendecomposition oracle
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    variances = (s * s) / (n - 1)
    total = variances.sum()
    if total == 0.0:
        raise DataError("zero-variance input: all rows identical")
    ratios = variances / total
    cum = np.cumsum(ratios)
    k = int(np.searchsorted(cum, variance_threshold) + 1)
    k = min(k, len(ratios))
    components = _fix_signs(vt[:k])
    return PcaModel(mean=mean, components=components, explained_ratio=ratios[:k])


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Make each component's largest-absolute-value coordinate positive."""
    out = components.copy()
    for row in out:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return out


def project_fingers(model: PcaModel, fingers: np.ndarray) -> np.ndarray:
    fingers = np.asarray(fingers, dtype=float)
    return model.components @ (fingers - model.mean)


def assemble(angles: AngleFrame, model: PcaModel) -> FeatureVector:
    raw = angles.vector(ANGLE_ORDER)
    fingers = angles.vector(FINGER_ANGLE_ORDER)
    arm = angles.vector(ARM_ANGLE_ORDER)
    scoring = np.concatenate([project_fingers(model, fingers), arm])
    return FeatureVector(scoring=scoring, raw=raw)


def assemble_matrix(frames: list[AngleFrame], model: PcaModel) -> np.ndarray:
    """M x (k + 4) scoring matrix, row i = assemble(frames[i]).scoring."""
    return np.array([assemble(f, model).scoring for f in frames])


def save_pca(model: PcaModel, path: str | Path) -> None:
    doc = {
        "mean": [float(v) for v in model.mean],
        "components": [[float(v) for v in row] for row in model.components],
        "explained_ratio": [float(v) for v in model.explained_ratio],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_pca(path: str | Path) -> PcaModel:
    try:
        doc = json.loads(Path(path).read_text())
        return PcaModel(
            mean=np.array(doc["mean"], dtype=float),
            components=np.array(doc["components"], dtype=float),
            explained_ratio=np.array(doc["explained_ratio"], dtype=float),
        )
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as e:
        raise DataError(f"cannot load PCA model {path}: {e}") from e
