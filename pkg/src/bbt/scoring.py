"""Exact-KNN deviation scoring against the healthy frame population.

A frame's raw deviation is the mean Euclidean distance to its k nearest
healthy frames (exact, full scan). Per-side scores are raw means normalized
by the healthy baseline: the mean leave-own-recording-out KNN distance over
all healthy frames. Patients are never part of the reference, so patient
queries use no exclusion.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .interchange import RecordingMeta

DEFAULT_K = 15


@dataclass
class HealthyReference:
    features: np.ndarray       # (H, d)
    recording_ids: list[str]   # per row
    k: int = DEFAULT_K
    baseline: float | None = None  # filled by healthy_baseline

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise DataError("reference must be a nonempty 2-D matrix")
        if len(self.recording_ids) != self.features.shape[0]:
            raise DataError("recording ids must cover all reference rows")
        if not self.features.shape[0] > self.k:
            raise DataError(f"reference needs more than k={self.k} rows")


@dataclass
class DeviationScore:
    subject_id: str
    side: str
    score: float
    frames: int
    raw_distance: float


def _distances(query: np.ndarray, rows: np.ndarray) -> np.ndarray:
    # explicit difference form (not the expanded-dot-product identity) so
    # results are bit-identical to per-pair sqrt(sum((a-b)^2))
    return np.sqrt(np.square(rows - query).sum(axis=1))


def knn_mean_distance(query, reference: HealthyReference, k: int | None = None,
                      exclude: str | None = None) -> float:
    """Mean Euclidean distance from query to its k nearest reference rows.

    Rows whose recording id equals `exclude` are ignored. Ties at the k-th
    neighbor resolve by (distance, row index), so the result is deterministic
    and invariant to row permutations up to that rule.
    """
    k = k if k is not None else reference.k
    query = np.asarray(query, dtype=float)
    rows = reference.features
    if exclude is not None:
        keep = np.array([rid != exclude for rid in reference.recording_ids])
        rows = rows[keep]
    if rows.shape[0] < k:
        raise DataError(f"too few reference rows after exclusion: {rows.shape[0]} < k={k}")
    d = _distances(query, rows)
    # stable sort = ties broken by ascending row index
    nearest = np.sort(d, kind="stable")[:k]
    return float(nearest.mean())


def knn_mean_distances(queries: np.ndarray, reference: HealthyReference,
                       k: int | None = None, exclude: str | None = None) -> np.ndarray:
    """Vectorized knn_mean_distance over the rows of an M x d query matrix."""
    k = k if k is not None else reference.k
    queries = np.asarray(queries, dtype=float)
    rows = reference.features
    if exclude is not None:
        keep = np.array([rid != exclude for rid in reference.recording_ids])
        rows = rows[keep]
    if rows.shape[0] < k:
        raise DataError(f"too few reference rows after exclusion: {rows.shape[0]} < k={k}")
    # (M, H) distance matrix via explicit differences; desk-scale sizes make
    # the full scan cheap and keep it bit-identical to the scalar path
    d = np.sqrt(np.square(queries[:, None, :] - rows[None, :, :]).sum(axis=2))
    d.sort(axis=1, kind="stable")
    return d[:, :k].mean(axis=1)


def healthy_frame_distances(ref: HealthyReference) -> np.ndarray:
    """Leave-own-recording-out KNN distance for every healthy frame."""
    out = np.empty(ref.features.shape[0])
    ids = np.asarray(ref.recording_ids)
    for rid in sorted(set(ref.recording_ids)):
        sel = ids == rid
        out[sel] = knn_mean_distances(ref.features[sel], ref, exclude=rid)
    return out


def healthy_baseline(ref: HealthyReference) -> float:
    """Mean leave-own-recording-out KNN distance over all healthy frames."""
    baseline = float(healthy_frame_distances(ref).mean())
    if baseline == 0.0:
        raise DataError("degenerate healthy reference: baseline distance is zero")
    return baseline


def all_pairs_baseline(ref: HealthyReference) -> float:
    """Alternative baseline: mean pairwise distance among healthy frames
    (cross-recording pairs only, matching the KNN exclusion)."""
    ids = np.asarray(ref.recording_ids)
    x = ref.features
    total = 0.0
    count = 0
    for i in range(x.shape[0]):
        other = ids != ids[i]
        if not other.any():
            continue
        total += _distances(x[i], x[other]).sum()
        count += int(other.sum())
    if count == 0 or total == 0.0:
        raise DataError("degenerate healthy reference: no usable cross-recording pairs")
    return total / count


def score_side(frames: np.ndarray, ref: HealthyReference, subject_id: str = "",
               side: str = "", exclude: str | None = None) -> DeviationScore:
    """Mean KNN distance over a subject-side's frames, as a ratio to the
    healthy baseline. `exclude` is set to the own recording id when scoring
    a recording that is itself part of the reference."""
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise DataError("score_side: empty frame matrix")
    if ref.baseline is None:
        ref.baseline = healthy_baseline(ref)
    raw = float(knn_mean_distances(frames, ref, exclude=exclude).mean())
    return DeviationScore(
        subject_id=subject_id,
        side=side,
        score=raw / ref.baseline,
        frames=frames.shape[0],
        raw_distance=raw,
    )


def score_report(scores: list[DeviationScore], meta: list[RecordingMeta]) -> list[dict]:
    """Join scores to metadata into table rows (subject, side, impairment,
    frame count, raw distance, score)."""
    impairment = {}
    for m in meta:
        impairment[(m.subject_id, m.side)] = m.impairment
    rows = []
    seen = set()
    for s in scores:
        key = (s.subject_id, s.side)
        if key in seen:
            raise DataError(f"duplicate subject-side rows: {key}")
        seen.add(key)
        if key not in impairment:
            raise DataError(f"unmatched subject-side: {key}")
        rows.append({
            "subject": s.subject_id,
            "side": s.side,
            "impairment": impairment[key],
            "frames": s.frames,
            "raw_distance": s.raw_distance,
            "score": s.score,
        })
    return rows
