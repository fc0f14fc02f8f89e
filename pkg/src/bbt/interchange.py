"""On-disk data model: masks (PGM), point maps (PMAP), keypoints (JSONL),
recording metadata (JSON) and the skeleton spec.

Conventions: positions in meters, angles in degrees. Mask PGMs store the
literal label bytes 0/1/2 (binary masks 0/1), not display values.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

MASK_FILE_RE = re.compile(r"^mask_(\d+)\.pgm$")
PMAP_MAGIC = b"PMAP"

SIDES = ("left", "right")
COHORTS = ("healthy", "patient")
IMPAIRMENTS = ("MI", "LI", "none")

FINGERS = ("index", "middle", "ring", "pinky")

# 14 finger angles: three per finger, two for the thumb.
FINGER_ANGLE_ORDER = tuple(
    f"{f}_{j}" for f in FINGERS for j in ("mcp", "pip", "dip")
) + ("thumb_mcp", "thumb_ip")
ARM_ANGLE_ORDER = ("shoulder", "elbow", "wrist", "trunk")
ANGLE_ORDER = FINGER_ANGLE_ORDER + ARM_ANGLE_ORDER


# ---------------------------------------------------------------------------
# mask types

@dataclass
class LabelMask:
    """Per-pixel class labels: 0 background, 1 front-of-box, 2 rest-of-box."""

    labels: np.ndarray  # (H, W) uint8

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.labels.ndim != 2 or self.labels.size == 0:
            raise DataError("label mask must be a nonempty 2-D array")
        if self.labels.max(initial=0) > 2:
            raise DataError("invalid label: values must be in {0, 1, 2}")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass
class BinaryMask:
    """Per-pixel foreground flags."""

    bits: np.ndarray  # (H, W) bool

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.ndim != 2 or self.bits.size == 0:
            raise DataError("binary mask must be a nonempty 2-D array")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


@dataclass
class MaskSequence:
    """Ordered per-frame label masks of one recording."""

    recording_id: str
    frames: list[tuple[int, LabelMask]]

    def __post_init__(self):
        if not self.frames:
            raise DataError("empty sequence: a mask sequence needs at least one frame")
        ts = [t for t, _ in self.frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise DataError("frame indices must be strictly increasing")
        h, w = self.frames[0][1].labels.shape
        for t, m in self.frames:
            if m.labels.shape != (h, w):
                raise DataError(
                    f"inconsistent dimensions at frame {t}: "
                    f"{m.labels.shape[::-1]} vs {(w, h)}"
                )


# ---------------------------------------------------------------------------
# point map

@dataclass
class PointMap:
    """H x W grid of camera-frame 3-D points; invalid pixels are NaN triplets.

    Held as float64 in memory; the on-disk PMAP format stores float32, so
    writing quantizes values that are not exactly f32-representable.
    """

    points: np.ndarray  # (H, W, 3) float64
    valid: np.ndarray = field(default=None)  # (H, W) bool

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        if self.points.ndim != 3 or self.points.shape[2] != 3 or self.points[..., 0].size == 0:
            raise DataError("point map must be a nonempty (H, W, 3) array")
        finite = np.isfinite(self.points).all(axis=2)
        if self.valid is None:
            self.valid = finite
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
            if self.valid.shape != self.points.shape[:2]:
                raise DataError("validity shape does not match point map")
        if np.any(self.valid & ~finite):
            raise DataError("valid points must be finite")
        # canonical in-memory form: invalid pixels are full NaN triplets
        self.points[~self.valid] = np.nan

    @property
    def height(self) -> int:
        return self.points.shape[0]

    @property
    def width(self) -> int:
        return self.points.shape[1]


# ---------------------------------------------------------------------------
# keypoints and metadata

@dataclass
class KeypointFrame:
    """Named 3-D joints (camera frame, meters) for one frame and one side."""

    t: int
    side: str
    joints: dict[str, np.ndarray]

    def __post_init__(self):
        if self.side not in SIDES:
            raise DataError(f"side must be one of {SIDES}, got {self.side!r}")
        clean = {}
        for name, p in self.joints.items():
            arr = np.asarray(p, dtype=float)
            if arr.shape != (3,):
                raise DataError(f"joint {name!r} must be a 3-vector")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite coordinate for joint {name!r}")
            clean[name] = arr
        self.joints = clean


@dataclass
class RecordingMeta:
    recording_id: str
    subject_id: str
    cohort: str
    side: str
    impairment: str
    fps: float

    def __post_init__(self):
        if self.cohort not in COHORTS:
            raise DataError(f"cohort must be one of {COHORTS}")
        if self.side not in SIDES:
            raise DataError(f"side must be one of {SIDES}")
        if self.impairment not in IMPAIRMENTS:
            raise DataError(f"impairment must be one of {IMPAIRMENTS}")
        if self.cohort == "patient" and self.impairment == "none":
            raise DataError("patient recordings need impairment MI or LI")
        if self.cohort == "healthy" and self.impairment != "none":
            raise DataError("healthy recordings must carry impairment 'none'")
        if not self.fps > 0:
            raise DataError("fps must be positive")


# ---------------------------------------------------------------------------
# skeleton spec

@dataclass
class SkeletonSpec:
    """Joint names plus the definitions turning them into the 18 named angles.

    `triplets` holds (A, B, C) per angle (interior angle at B); `vector_pairs`
    holds two vector definitions per angle, each either ("joint", tail, head)
    or ("axis", "up") for the gravity reference.
    """

    joints: tuple[str, ...]
    triplets: dict[str, tuple[str, str, str]]
    vector_pairs: dict[str, tuple[tuple, tuple]]

    def __post_init__(self):
        joint_set = set(self.joints)
        if len(joint_set) != len(self.joints):
            raise DataError("duplicate joint names in skeleton spec")
        finger_names = [n for n in self.triplets if n != "elbow"]
        if len(finger_names) != 14 or "elbow" not in self.triplets:
            raise DataError("skeleton spec needs 14 finger triplets plus 'elbow'")
        if set(self.vector_pairs) != {"shoulder", "wrist", "trunk"}:
            raise DataError("vector-pair angles must be shoulder, wrist, trunk")
        if len(self.angle_names()) != 18:
            raise DataError("skeleton spec must define exactly 18 angles")
        for name, (a, b, c) in self.triplets.items():
            for j in (a, b, c):
                if j not in joint_set:
                    raise DataError(f"angle {name!r} references unknown joint {j!r}")
        for name, pair in self.vector_pairs.items():
            for vec in pair:
                if vec[0] == "joint":
                    for j in vec[1:]:
                        if j not in joint_set:
                            raise DataError(
                                f"angle {name!r} references unknown joint {j!r}"
                            )
                elif vec != ("axis", "up"):
                    raise DataError(f"angle {name!r}: unknown vector kind {vec!r}")

    def angle_names(self) -> tuple[str, ...]:
        return tuple(self.triplets) + tuple(self.vector_pairs)


def default_skeleton_spec() -> SkeletonSpec:
    """Canonical upper-extremity skeleton for one side."""
    joints = ["wrist", "thumb_cmc", "thumb_mcp", "thumb_ip", "thumb_tip"]
    for f in FINGERS:
        joints += [f"{f}_mcp", f"{f}_pip", f"{f}_dip", f"{f}_tip"]
    joints += ["elbow", "shoulder", "pelvis", "neck"]

    triplets: dict[str, tuple[str, str, str]] = {}
    for f in FINGERS:
        triplets[f"{f}_mcp"] = ("wrist", f"{f}_mcp", f"{f}_pip")
        triplets[f"{f}_pip"] = (f"{f}_mcp", f"{f}_pip", f"{f}_dip")
        triplets[f"{f}_dip"] = (f"{f}_pip", f"{f}_dip", f"{f}_tip")
    # the thumb CMC anchors the proximal segment but gets no angle of its own
    triplets["thumb_mcp"] = ("thumb_cmc", "thumb_mcp", "thumb_ip")
    triplets["thumb_ip"] = ("thumb_mcp", "thumb_ip", "thumb_tip")
    triplets["elbow"] = ("shoulder", "elbow", "wrist")

    vector_pairs = {
        "shoulder": (("joint", "shoulder", "elbow"), ("joint", "neck", "pelvis")),
        "wrist": (("joint", "elbow", "wrist"), ("joint", "wrist", "middle_mcp")),
        "trunk": (("joint", "pelvis", "neck"), ("axis", "up")),
    }
    return SkeletonSpec(tuple(joints), triplets, vector_pairs)


def load_skeleton_spec(path: str | Path) -> SkeletonSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read skeleton spec {path}: {e}") from e
    try:
        triplets = {k: tuple(v) for k, v in doc["triplets"].items()}
        pairs = {}
        for k, (a, b) in doc["vector_pairs"].items():
            pairs[k] = (_vec_from_json(a), _vec_from_json(b))
        return SkeletonSpec(tuple(doc["joints"]), triplets, pairs)
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed skeleton spec {path}: {e}") from e


def save_skeleton_spec(spec: SkeletonSpec, path: str | Path) -> None:
    doc = {
        "joints": list(spec.joints),
        "triplets": {k: list(v) for k, v in spec.triplets.items()},
        "vector_pairs": {
            k: [_vec_to_json(a), _vec_to_json(b)]
            for k, (a, b) in spec.vector_pairs.items()
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _vec_from_json(v) -> tuple:
    if "axis" in v:
        return ("axis", v["axis"])
    return ("joint", v["from"], v["to"])


def _vec_to_json(vec: tuple) -> dict:
    if vec[0] == "axis":
        return {"axis": vec[1]}
    return {"from": vec[1], "to": vec[2]}


# ---------------------------------------------------------------------------
# PGM mask files

def _read_pgm(path: Path) -> np.ndarray:
    try:
        data = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # '#' comments allowed, then a single whitespace byte before the raster
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        m = re.match(rb"\s*(#[^\n]*\n|\S+)", data[pos:])
        if not m:
            raise DataError(f"{path}: truncated PGM header")
        pos += m.end()
        tok = m.group(1)
        if not tok.startswith(b"#"):
            tokens.append(tok)
    if tokens[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM (P5)")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as e:
        raise DataError(f"{path}: bad PGM header") from e
    if not (0 < maxval < 256):
        raise DataError(f"{path}: unsupported maxval {maxval}")
    pos += 1  # single whitespace separator
    raster = data[pos:pos + width * height]
    if len(raster) != width * height:
        raise DataError(f"{path}: truncated PGM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def _write_pgm(arr: np.ndarray, maxval: int, path: Path) -> None:
    h, w = arr.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode()
    path.write_bytes(header + arr.astype(np.uint8).tobytes())


def read_label_mask(path: str | Path) -> LabelMask:
    return LabelMask(_read_pgm(Path(path)))


def write_label_mask(mask: LabelMask, path: str | Path) -> None:
    _write_pgm(mask.labels, 2, Path(path))


def read_binary_mask(path: str | Path) -> BinaryMask:
    arr = _read_pgm(Path(path))
    if arr.max(initial=0) > 1:
        raise DataError(f"{path}: binary mask has values outside {{0, 1}}")
    return BinaryMask(arr.astype(bool))


def write_binary_mask(mask: BinaryMask, path: str | Path) -> None:
    _write_pgm(mask.bits.astype(np.uint8), 1, Path(path))


def read_mask_sequence(path: str | Path, recording_id: str | None = None) -> MaskSequence:
    """Read all mask_<t>.pgm files in a directory, sorted by t."""
    d = Path(path)
    if not d.is_dir():
        raise DataError(f"missing directory: {d}")
    entries = []
    for p in d.iterdir():
        m = MASK_FILE_RE.match(p.name)
        if m:
            entries.append((int(m.group(1)), p))
    if not entries:
        raise DataError(f"empty sequence: no mask_<t>.pgm files in {d}")
    entries.sort()
    frames = [(t, read_label_mask(p)) for t, p in entries]
    return MaskSequence(recording_id or d.name, frames)


def write_mask_sequence(seq: MaskSequence, path: str | Path) -> None:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    for t, mask in seq.frames:
        write_label_mask(mask, d / f"mask_{t:04d}.pgm")


# ---------------------------------------------------------------------------
# PMAP point-map files

def read_point_map(path: str | Path) -> PointMap:
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read {p}: {e}") from e
    if data[:4] != PMAP_MAGIC:
        raise DataError(f"{p}: bad magic (expected PMAP)")
    if len(data) < 12:
        raise DataError(f"{p}: truncated header")
    width, height = np.frombuffer(data[4:12], dtype="<u4")
    expected = 12 + int(width) * int(height) * 3 * 4
    if len(data) != expected:
        raise DataError(f"{p}: truncated payload ({len(data)} bytes, expected {expected})")
    pts = np.frombuffer(data[12:], dtype="<f4").reshape(int(height), int(width), 3)
    return PointMap(pts.astype(np.float64))


def write_point_map(pm: PointMap, path: str | Path) -> None:
    header = PMAP_MAGIC + np.array([pm.width, pm.height], dtype="<u4").tobytes()
    Path(path).write_bytes(header + pm.points.astype("<f4").tobytes())


# ---------------------------------------------------------------------------
# keypoints JSONL

def read_keypoints(path: str | Path, spec: SkeletonSpec | None = None) -> list[KeypointFrame]:
    spec = spec or default_skeleton_spec()
    p = Path(path)
    try:
        lines = p.read_text().splitlines()
    except OSError as e:
        raise DataError(f"cannot read {p}: {e}") from e
    frames = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"{p}:{i + 1}: bad JSON: {e}") from e
        try:
            t = int(obj["t"])
            side = obj["side"]
            joints_raw = obj["joints"]
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{p}:{i + 1}: malformed frame object: {e}") from e
        joints = {}
        for name, xyz in joints_raw.items():
            vals = [float(v) for v in xyz]
            if len(vals) != 3 or not all(math.isfinite(v) for v in vals):
                raise DataError(f"{p}:{i + 1}: non-finite coordinate for joint {name!r}")
            joints[name] = np.array(vals)
        for j in spec.joints:
            if j not in joints:
                raise DataError(f"{p}:{i + 1}: missing joint {j!r}")
        frames.append(KeypointFrame(t, side, joints))
    if not frames:
        raise DataError(f"{p}: no keypoint frames")
    frames.sort(key=lambda f: f.t)
    return frames


def write_keypoints(frames: list[KeypointFrame], path: str | Path) -> None:
    with open(path, "w") as fh:
        for f in frames:
            obj = {
                "t": f.t,
                "side": f.side,
                "joints": {n: [float(v) for v in p] for n, p in sorted(f.joints.items())},
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# recording metadata

def read_meta(path: str | Path) -> RecordingMeta:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read meta {path}: {e}") from e
    try:
        return RecordingMeta(
            recording_id=doc["recording_id"],
            subject_id=doc["subject_id"],
            cohort=doc["cohort"],
            side=doc["side"],
            impairment=doc["impairment"],
            fps=float(doc["fps"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed meta {path}: {e}") from e


def write_meta(meta: RecordingMeta, path: str | Path) -> None:
    doc = {
        "recording_id": meta.recording_id,
        "subject_id": meta.subject_id,
        "cohort": meta.cohort,
        "side": meta.side,
        "impairment": meta.impairment,
        "fps": meta.fps,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
