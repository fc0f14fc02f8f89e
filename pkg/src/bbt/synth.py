"""Synthetic ground-truth generators used to verify every pipeline stage.

Scenes produce mask sequences with known corrupted frames and a tilted-plane
point map with known pitch; motions build keypoints by planar forward
kinematics from target angle vectors, so recovered angles can be checked
against exact ground truth; populations write full interchange datasets with
a manifest for end-to-end checks.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calib import rot_x
from .errors import DataError
from .interchange import (
    ANGLE_ORDER,
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
from .kinematics import UP, AngleFrame
from . import tables

ANGLE_INDEX = {name: i for i, name in enumerate(ANGLE_ORDER)}


# ---------------------------------------------------------------------------
# scenes (mask sequence + point map with known pitch)

@dataclass
class SyntheticScene:
    pitch_rad: float = 0.0
    grid: tuple[int, int] = (64, 64)        # (height, width)
    plane_extent_m: float = 0.4             # plane edge length covered by the grid
    depth_m: float = 1.0
    noise_sigma_m: float = 0.0
    corrupt_fraction: float = 0.0
    n_frames: int = 10
    seed: int = 0

    def __post_init__(self):
        if not abs(self.pitch_rad) < math.pi / 2:
            raise DataError("scene pitch must satisfy |phi| < pi/2")
        if self.noise_sigma_m < 0:
            raise DataError("noise sigma must be >= 0")
        if not 0.0 <= self.corrupt_fraction < 1.0:
            raise DataError("corrupt fraction must be in [0, 1)")


@dataclass
class SceneData:
    masks: MaskSequence
    pointmap: PointMap
    pitch_rad: float
    corrupted_frames: list[int]
    clean_labels: LabelMask  # uncorrupted per-frame label mask


def _box_labels(h: int, w: int) -> np.ndarray:
    """Box occupying the central region: top third 'rest' (2), lower part
    'front' (1)."""
    labels = np.zeros((h, w), dtype=np.uint8)
    r0, r1 = h // 6, h - h // 6
    c0, c1 = w // 6, w - w // 6
    split = r0 + (r1 - r0) // 3
    labels[r0:split, c0:c1] = 2
    labels[split:r1, c0:c1] = 1
    return labels


def gen_scene(scene: SyntheticScene) -> SceneData:
    rng = np.random.default_rng(scene.seed)
    h, w = scene.grid
    clean = _box_labels(h, w)

    n_corrupt = int(round(scene.corrupt_fraction * scene.n_frames))
    corrupted = sorted(rng.choice(scene.n_frames, size=n_corrupt, replace=False).tolist())
    frames = []
    for t in range(scene.n_frames):
        labels = clean.copy()
        if t in corrupted:
            if (corrupted.index(t) % 2) == 0:
                # split: add a detached blob in the top-left corner
                labels[0:2, 0:2] = 2
            else:
                # erode: drop enough rows to break the IoU predicate
                fg_rows = np.flatnonzero(labels.any(axis=1))
                cut = fg_rows[: max(1, int(0.4 * len(fg_rows)))]
                labels[cut, :] = 0
        frames.append((t, LabelMask(labels)))
    seq = MaskSequence(f"scene_{scene.seed}", frames)

    # tilted plane: world frame has y down along gravity, plane normal -z
    delta = scene.plane_extent_m / max(h, w)
    u = (np.arange(w) - w / 2.0) * delta
    v = (np.arange(h) - h / 2.0) * delta
    xw, yw = np.meshgrid(u, v)
    pw = np.stack([xw, yw, np.zeros_like(xw)], axis=2)
    pc = pw @ rot_x(scene.pitch_rad).T
    pc[..., 2] += scene.depth_m
    if scene.noise_sigma_m > 0:
        pc = pc + rng.normal(0.0, scene.noise_sigma_m, size=pc.shape)
    pm = PointMap(pc)
    return SceneData(seq, pm, scene.pitch_rad, corrupted, LabelMask(clean))


# ---------------------------------------------------------------------------
# motions (keypoints from target angles by planar forward kinematics)

@dataclass
class SegmentLengths:
    trunk: float = 0.45
    shoulder_offset: float = 0.18
    upper_arm: float = 0.30
    forearm: float = 0.26
    palm: float = 0.09
    phalanx: tuple[float, float, float] = (0.045, 0.028, 0.022)
    thumb_base: float = 0.045
    thumb_phalanx: tuple[float, float, float] = (0.035, 0.032, 0.028)


# in-plane splay of the finger base directions relative to the palm axis
_FINGER_SPLAY_DEG = {"index": -12.0, "middle": 0.0, "ring": 12.0, "pinky": 24.0}
_THUMB_CMC_DEG = -50.0
_THUMB_AXIS_DEG = -25.0


@dataclass
class SyntheticMotion:
    targets: np.ndarray  # (T, 18) degrees, columns in ANGLE_ORDER
    side: str = "right"
    lengths: SegmentLengths = field(default_factory=SegmentLengths)
    seed: int = 0

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=float)
        if self.targets.ndim != 2 or self.targets.shape[1] != len(ANGLE_ORDER):
            raise DataError(f"targets must be (T, {len(ANGLE_ORDER)})")
        if np.any(self.targets < 0) or np.any(self.targets > 180):
            raise DataError("target angles must lie in [0, 180]")


def _rot_z(deg: float) -> np.ndarray:
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _chain_dir(prev_dir: np.ndarray, interior_deg: float) -> np.ndarray:
    """Direction of the next segment so the interior angle at the shared
    joint equals the target (planar chain, rotation about z)."""
    return _rot_z(180.0 - interior_deg) @ prev_dir


def pose_from_targets(target: dict[str, float], lengths: SegmentLengths) -> dict[str, np.ndarray]:
    """Joint positions (gravity-aligned world frame, z = 0 plane) realizing
    the 18 target angles exactly."""
    L = lengths
    pelvis = np.zeros(3)
    d_trunk = _rot_z(target["trunk"]) @ UP
    neck = pelvis + L.trunk * d_trunk
    shoulder = neck + np.array([L.shoulder_offset, 0.0, 0.0])
    u_arm = _rot_z(target["shoulder"]) @ (-d_trunk)
    elbow = shoulder + L.upper_arm * u_arm
    f_dir = _chain_dir(u_arm, target["elbow"])
    wrist = elbow + L.forearm * f_dir
    h_dir = _rot_z(target["wrist"]) @ f_dir
    joints = {
        "pelvis": pelvis, "neck": neck, "shoulder": shoulder,
        "elbow": elbow, "wrist": wrist,
    }
    for fname, splay in _FINGER_SPLAY_DEG.items():
        base = _rot_z(splay) @ h_dir
        mcp = wrist + L.palm * base
        d = _chain_dir(base, target[f"{fname}_mcp"])
        pip = mcp + L.phalanx[0] * d
        d2 = _chain_dir(d, target[f"{fname}_pip"])
        dip = pip + L.phalanx[1] * d2
        d3 = _chain_dir(d2, target[f"{fname}_dip"])
        tip = dip + L.phalanx[2] * d3
        joints[f"{fname}_mcp"] = mcp
        joints[f"{fname}_pip"] = pip
        joints[f"{fname}_dip"] = dip
        joints[f"{fname}_tip"] = tip
    cmc = wrist + L.thumb_base * (_rot_z(_THUMB_CMC_DEG) @ h_dir)
    axis = _rot_z(_THUMB_AXIS_DEG) @ h_dir
    tmcp = cmc + L.thumb_phalanx[0] * axis
    d = _chain_dir(axis, target["thumb_mcp"])
    tip_j = tmcp + L.thumb_phalanx[1] * d
    d2 = _chain_dir(d, target["thumb_ip"])
    ttip = tip_j + L.thumb_phalanx[2] * d2
    joints.update({"thumb_cmc": cmc, "thumb_mcp": tmcp, "thumb_ip": tip_j, "thumb_tip": ttip})
    return joints


def gen_motion(motion: SyntheticMotion, pitch_rad: float = 0.0
               ) -> tuple[list[KeypointFrame], list[AngleFrame]]:
    """Camera-frame keypoints plus the true angle frames. The camera pitch
    maps world points into the camera frame via R_x(+pitch)."""
    r_cam = rot_x(pitch_rad)
    kp_frames = []
    truth = []
    for t in range(motion.targets.shape[0]):
        target = {name: motion.targets[t, ANGLE_INDEX[name]] for name in ANGLE_ORDER}
        joints = pose_from_targets(target, motion.lengths)
        cam_joints = {n: r_cam @ p for n, p in joints.items()}
        kp_frames.append(KeypointFrame(t, motion.side, cam_joints))
        truth.append(AngleFrame(t, motion.side, dict(target)))
    return kp_frames, truth


def random_targets(n_frames: int, rng: np.random.Generator) -> np.ndarray:
    """Well-conditioned random target angles, away from degenerate 0/180."""
    out = np.empty((n_frames, len(ANGLE_ORDER)))
    for name, i in ANGLE_INDEX.items():
        if name == "trunk":
            out[:, i] = rng.uniform(2.0, 55.0, n_frames)
        elif name == "shoulder":
            out[:, i] = rng.uniform(15.0, 150.0, n_frames)
        else:
            out[:, i] = rng.uniform(25.0, 160.0, n_frames)
    return out


# ---------------------------------------------------------------------------
# populations (full interchange datasets with ground-truth manifest)

@dataclass
class ImpairmentSpec:
    trunk_lean_deg: float = 20.0
    elbow_range_scale: float = 0.6
    finger_flexion_deficit: float = 0.25  # fraction pulling finger angles toward 180


@dataclass
class PopulationConfig:
    n_healthy: int = 20
    n_impaired: int = 4
    impairment: ImpairmentSpec = field(default_factory=ImpairmentSpec)
    frames_per_recording: int = 300
    mask_frames: int = 12
    mask_corrupt_fraction: float = 0.25
    grid: tuple[int, int] = (48, 48)
    seed: int = 0

    def __post_init__(self):
        if self.n_healthy < 2:
            raise DataError("population needs at least 2 healthy recordings")


def _healthy_model(rng: np.random.Generator):
    """Shared 3-latent-factor linear model over the 14 finger angles."""
    raw = rng.normal(size=(14, 3))
    q, _ = np.linalg.qr(raw)
    loadings = q * np.array([10.0, 6.0, 4.0])
    mean = 135.0 + rng.uniform(-8.0, 8.0, size=14)
    return mean, loadings


def _recording_targets(rng: np.random.Generator, n_frames: int,
                       finger_mean: np.ndarray, loadings: np.ndarray,
                       impair: ImpairmentSpec | None) -> np.ndarray:
    t = np.arange(n_frames)
    cyc = 2.0 * np.pi * 3.0 * t / n_frames
    phase = rng.uniform(0.0, 2.0 * np.pi, size=4)
    targets = np.empty((n_frames, len(ANGLE_ORDER)))
    z = rng.normal(size=(n_frames, 3))
    fingers = finger_mean + z @ loadings.T + rng.normal(0.0, 0.5, size=(n_frames, 14))
    shoulder = 32.0 + 8.0 * np.sin(cyc + phase[0]) + rng.normal(0.0, 1.0, n_frames)
    elbow = 100.0 + 35.0 * np.sin(cyc + phase[1]) + rng.normal(0.0, 1.0, n_frames)
    wrist = 158.0 + 8.0 * np.sin(cyc + phase[2]) + rng.normal(0.0, 1.0, n_frames)
    trunk = 8.0 + 3.0 * np.sin(cyc + phase[3]) + rng.normal(0.0, 0.5, n_frames)
    if impair is not None:
        trunk = trunk + impair.trunk_lean_deg
        elbow = 100.0 + impair.elbow_range_scale * (elbow - 100.0)
        d = impair.finger_flexion_deficit
        fingers = 180.0 - (1.0 - d) * (180.0 - fingers)
    targets[:, :14] = fingers
    targets[:, ANGLE_INDEX["shoulder"]] = shoulder
    targets[:, ANGLE_INDEX["elbow"]] = elbow
    targets[:, ANGLE_INDEX["wrist"]] = wrist
    targets[:, ANGLE_INDEX["trunk"]] = trunk
    return np.clip(targets, 0.0, 180.0)


def gen_population(cfg: PopulationConfig, out_dir: str | Path) -> dict:
    """Write a full interchange dataset plus manifest.json; returns the
    manifest. Deterministic under a fixed seed."""
    out = Path(out_dir)
    rec_root = out / "recordings"
    rec_root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    finger_mean, loadings = _healthy_model(rng)

    manifest = {"seed": cfg.seed, "recordings": []}
    specs = [("h", i, None) for i in range(cfg.n_healthy)]
    specs += [("p", i, cfg.impairment) for i in range(cfg.n_impaired)]
    for kind, i, impair in specs:
        rid = f"{kind}{i + 1:02d}"
        side = "right" if i % 2 == 0 else "left"
        cohort = "healthy" if impair is None else "patient"
        impair_label = "none" if impair is None else ("MI" if i % 2 == 0 else "LI")
        pitch = float(rng.uniform(-math.radians(20.0), math.radians(20.0)))

        scene = gen_scene(SyntheticScene(
            pitch_rad=pitch, grid=cfg.grid, n_frames=cfg.mask_frames,
            corrupt_fraction=cfg.mask_corrupt_fraction,
            seed=int(rng.integers(0, 2**31)),
        ))
        targets = _recording_targets(rng, cfg.frames_per_recording,
                                     finger_mean, loadings, impair)
        motion = SyntheticMotion(targets, side=side)
        kp, truth = gen_motion(motion, pitch_rad=pitch)

        rdir = rec_root / rid
        rdir.mkdir(parents=True, exist_ok=True)
        write_mask_sequence(scene.masks, rdir / "masks")
        write_point_map(scene.pointmap, rdir / "pointmap.pmap")
        write_keypoints(kp, rdir / "keypoints.jsonl")
        meta = RecordingMeta(rid, rid, cohort, side, impair_label, fps=22.0)
        write_meta(meta, rdir / "meta.json")
        tables.write_angles_csv(truth, rdir / "truth_angles.csv")
        manifest["recordings"].append({
            "recording_id": rid,
            "subject_id": rid,
            "cohort": cohort,
            "side": side,
            "impairment": impair_label,
            "pitch_rad": pitch,
            "corrupted_mask_frames": scene.corrupted_frames,
            "n_frames": cfg.frames_per_recording,
        })
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
