"""Temporal stabilization of box masks: filtering against the pixel-wise
median, majority vote over the kept frames, and representative-frame choice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DataError
from .interchange import BinaryMask, LabelMask, MaskSequence

# 8-connectivity: diagonal neighbors belong to the same component
_CONN8 = np.ones((3, 3), dtype=int)


@dataclass
class FilterConfig:
    tau: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise DataError(f"tau must be in [0, 1], got {self.tau}")


@dataclass
class StabilizedMask:
    mask: BinaryMask
    t_star: int
    kept: int
    discarded: int


def binarize(mask: LabelMask) -> BinaryMask:
    """Foreground = any box label (front or rest)."""
    return BinaryMask(mask.labels > 0)


def iou(a: BinaryMask, b: BinaryMask) -> float:
    if a.bits.shape != b.bits.shape:
        raise DataError("iou: dimension mismatch")
    union = np.count_nonzero(a.bits | b.bits)
    if union == 0:
        return 1.0  # both empty: identical by convention
    inter = np.count_nonzero(a.bits & b.bits)
    return inter / union


def count_components(mask: BinaryMask) -> int:
    """Number of 8-connected foreground components."""
    _, n = ndimage.label(mask.bits, structure=_CONN8)
    return int(n)


def median_mask(masks: list[BinaryMask]) -> BinaryMask:
    """Pixel-wise binary median; exact ties (even counts) resolve to background."""
    if not masks:
        raise DataError("median_mask: empty list")
    shape = masks[0].bits.shape
    for m in masks:
        if m.bits.shape != shape:
            raise DataError("median_mask: dimension mismatch")
    counts = np.zeros(shape, dtype=np.int32)
    for m in masks:
        counts += m.bits
    return BinaryMask(counts * 2 > len(masks))


def filter_masks(seq: MaskSequence, cfg: FilterConfig) -> list[tuple[int, BinaryMask]]:
    """Keep frames whose binarized mask has IoU >= tau against the sequence
    median and exactly one 8-connected component."""
    binarized = [(t, binarize(m)) for t, m in seq.frames]
    med = median_mask([b for _, b in binarized])
    kept = [
        (t, b)
        for t, b in binarized
        if iou(b, med) >= cfg.tau and count_components(b) == 1
    ]
    if not kept:
        raise DataError("all frames filtered; consider lowering tau")
    return kept


def majority_vote(kept: list[BinaryMask]) -> BinaryMask:
    """Per-pixel majority over the kept frames (identical to the binary median)."""
    return median_mask(kept)


def select_frame(frames: list[tuple[int, BinaryMask]], voted: BinaryMask) -> int:
    """Frame index with maximal IoU against the voted mask; ties -> smallest t."""
    if not frames:
        raise DataError("select_frame: empty sequence")
    best_t, best_iou = frames[0][0], -1.0
    for t, b in frames:
        v = iou(b, voted)
        if v > best_iou:
            best_t, best_iou = t, v
    return best_t


def stabilize(seq: MaskSequence, cfg: FilterConfig) -> StabilizedMask:
    kept = filter_masks(seq, cfg)
    voted = majority_vote([b for _, b in kept])
    # select among kept frames so t* always refers to a frame that survived
    t_star = select_frame(kept, voted)
    return StabilizedMask(
        mask=voted,
        t_star=t_star,
        kept=len(kept),
        discarded=len(seq.frames) - len(kept),
    )
