"""Regenerate the checked-in mock upstream dumps under tests/fixtures/.

Run from the adapter directory: python3 tests/make_fixtures.py
"""
import json
import math
from pathlib import Path

import numpy as np

from bbt.synth import SyntheticMotion, SyntheticScene, gen_motion, gen_scene, random_targets
from bbt_adapter.upstream import upstream_joint_name

FIXTURES = Path(__file__).parent / "fixtures"
N_FRAMES = 30
MASK_FRAMES = 6
GRID = 32

RECORDINGS = [
    ("h01", "healthy", "none", "right"),
    ("h02", "healthy", "none", "left"),
    ("h03", "healthy", "none", "right"),
    ("p01", "patient", "MI", "left"),
]


def dump_recording(rid, cohort, impairment, side, seed, transpose=False):
    rng = np.random.default_rng(seed)
    pitch = float(rng.uniform(-math.radians(15.0), math.radians(15.0)))
    scene = gen_scene(SyntheticScene(
        pitch_rad=pitch, grid=(GRID, GRID), n_frames=MASK_FRAMES,
        corrupt_fraction=0.2, seed=seed))
    targets = random_targets(N_FRAMES, rng)
    kp, _ = gen_motion(SyntheticMotion(targets, side=side), pitch_rad=pitch)

    out = FIXTURES / rid
    out.mkdir(parents=True, exist_ok=True)
    masks = np.stack([m.labels for _, m in scene.masks.frames])
    np.savez(out / "segmentation.npz", masks=masks)
    points = scene.pointmap.points.astype(np.float32)
    if transpose:
        points = np.ascontiguousarray(points.swapaxes(0, 1))
    np.savez(out / "geometry.npz", points=points)

    frames = []
    for f in kp:
        joints = {upstream_joint_name(n, side): [float(v) for v in p]
                  for n, p in f.joints.items()}
        frames.append({"frame_index": f.t, "joints": joints})
    pose = {
        "fps": 22.0, "side": side, "subject": rid,
        "cohort": cohort, "impairment": impairment, "frames": frames,
    }
    (out / "pose.json").write_text(json.dumps(pose, indent=1, sort_keys=True) + "\n")


def main():
    for i, (rid, cohort, impairment, side) in enumerate(RECORDINGS):
        dump_recording(rid, cohort, impairment, side, seed=100 + i)
    # same recording as h01 but with the point map stored column-major
    dump_recording("transposed", "healthy", "none", "right", seed=100, transpose=True)
    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
