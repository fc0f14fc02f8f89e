"""Command-line interface: one subcommand per pipeline stage plus an
end-to-end `pipeline` command driven by a key=value config file.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
`BBT_LOG` sets the log level (DEBUG/INFO/WARNING/ERROR).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import calib, features, kinematics, maskpipe, scoring, synth, tables
from .errors import BbtError, DataError, InternalError
from .interchange import (
    BinaryMask,
    FINGER_ANGLE_ORDER,
    RecordingMeta,
    default_skeleton_spec,
    load_skeleton_spec,
    read_keypoints,
    read_mask_sequence,
    read_meta,
    read_point_map,
    write_binary_mask,
)

log = logging.getLogger("bbt")

SPACES = ("pca13", "raw18")
BASELINE_MODES = ("knn", "all-pairs")


@dataclass
class PipelineConfig:
    tau: float = 0.9
    k: int = 15
    variance_threshold: float = 0.90
    space: str = "pca13"
    baseline_mode: str = "knn"
    skeleton: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.space not in SPACES:
            raise DataError(f"space must be one of {SPACES}")
        if self.baseline_mode not in BASELINE_MODES:
            raise DataError(f"baseline mode must be one of {BASELINE_MODES}")
        if not 0.0 <= self.tau <= 1.0:
            raise DataError("tau must be in [0, 1]")
        if self.k < 1:
            raise DataError("k must be >= 1")
        if not 0.0 < self.variance_threshold <= 1.0:
            raise DataError("variance threshold must be in (0, 1]")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _write_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _round6(x: float) -> float:
    return round(float(x), 6)


# ---------------------------------------------------------------------------
# stage implementations (shared by single-stage commands and `pipeline`)

def stage_stabilize(masks_dir: Path, tau: float, voted_out: Path,
                    report_out: Path | None, front_out: Path | None) -> maskpipe.StabilizedMask:
    seq = read_mask_sequence(masks_dir)
    result = maskpipe.stabilize(seq, maskpipe.FilterConfig(tau=tau))
    write_binary_mask(result.mask, voted_out)
    if report_out is not None:
        _write_json({
            "t_star": result.t_star,
            "kept": result.kept,
            "discarded": result.discarded,
            "tau": _round6(tau),
        }, report_out)
    if front_out is not None:
        by_t = dict(seq.frames)
        front = BinaryMask(by_t[result.t_star].labels == 1)
        write_binary_mask(front, front_out)
    return result


def stage_calibrate(pointmap_path: Path, front_path: Path, out: Path) -> calib.PitchEstimate:
    pm = read_point_map(pointmap_path)
    from .interchange import read_binary_mask
    front = read_binary_mask(front_path)
    nf = calib.surface_normals(pm)
    pe = calib.estimate_pitch(nf, front)
    _write_json({
        "theta_hat_rad": _round6(pe.theta_hat),
        "phi_rad": _round6(pe.phi),
        "phi_deg": _round6(pe.phi_deg),
        "samples": pe.samples,
    }, out)
    return pe


def stage_angles(keypoints_path: Path, pitch_path: Path, spec_path: Path | None,
                 out: Path) -> list[kinematics.AngleFrame]:
    spec = load_skeleton_spec(spec_path) if spec_path else default_skeleton_spec()
    frames = read_keypoints(keypoints_path, spec)
    try:
        pitch_doc = json.loads(Path(pitch_path).read_text())
        phi = float(pitch_doc["phi_rad"])
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as e:
        raise DataError(f"cannot read pitch file {pitch_path}: {e}") from e
    rot = calib.gravity_rotation(calib.PitchEstimate(theta_hat=0.0, phi=phi, samples=1))
    aligned = kinematics.align_to_gravity(frames, rot)
    angle_frames = [kinematics.frame_angles(f, spec) for f in aligned]
    tables.write_angles_csv(angle_frames, out)
    return angle_frames


def stage_pca_fit(angle_paths: list[Path], threshold: float, out: Path) -> features.PcaModel:
    rows = []
    for p in angle_paths:
        for f in tables.read_angles_csv(p):
            rows.append(f.vector(FINGER_ANGLE_ORDER))
    model = features.fit_pca(np.array(rows), threshold)
    features.save_pca(model, out)
    return model


def stage_pca_apply(angles_path: Path, model_path: Path, recording_id: str,
                    space: str, out: Path) -> None:
    frames = tables.read_angles_csv(angles_path)
    model = features.load_pca(model_path)
    if space == "pca13":
        matrix = features.assemble_matrix(frames, model)
    else:
        matrix = np.array([f.vector() for f in frames])
    tables.write_features_csv(recording_id, frames, matrix, space, out)


def _load_meta(paths: list[Path]) -> list[RecordingMeta]:
    metas: list[RecordingMeta] = []
    for p in paths:
        doc = json.loads(Path(p).read_text())
        if isinstance(doc, list):
            for item in doc:
                metas.append(RecordingMeta(
                    item["recording_id"], item["subject_id"], item["cohort"],
                    item["side"], item["impairment"], float(item["fps"])))
        else:
            metas.append(read_meta(p))
    return metas


def _build_reference(ref_paths: list[Path], k: int, mode: str) -> scoring.HealthyReference:
    matrix, rec_ids = tables.read_features_csv(ref_paths)
    ref = scoring.HealthyReference(matrix, rec_ids, k=k)
    if mode == "knn":
        ref.baseline = scoring.healthy_baseline(ref)
    else:
        ref.baseline = scoring.all_pairs_baseline(ref)
    return ref


def stage_score(feature_paths: list[Path], ref_paths: list[Path],
                meta_paths: list[Path], k: int, mode: str,
                out: Path, sessions_out: Path | None = None) -> list[dict]:
    metas = _load_meta(meta_paths)
    by_rec = {m.recording_id: m for m in metas}
    ref = _build_reference(ref_paths, k, mode)
    matrix, rec_ids = tables.read_features_csv(feature_paths)
    ref_recs = set(ref.recording_ids)

    ids = np.asarray(rec_ids)
    session_rows = []
    # raw per-frame distances, leave-own-recording-out for reference members
    frame_dist = np.empty(matrix.shape[0])
    for rid in sorted(set(rec_ids)):
        if rid not in by_rec:
            raise DataError(f"unmatched subject-side: no metadata for recording {rid!r}")
        sel = ids == rid
        exclude = rid if rid in ref_recs else None
        frame_dist[sel] = scoring.knn_mean_distances(matrix[sel], ref, exclude=exclude)
        m = by_rec[rid]
        raw = float(frame_dist[sel].mean())
        session_rows.append({
            "subject": m.subject_id, "side": m.side, "impairment": m.impairment,
            "recording_id": rid, "frames": int(sel.sum()),
            "raw_distance": raw, "score": raw / ref.baseline,
        })

    # aggregate all frames per subject-side
    groups: dict[tuple[str, str], list[str]] = {}
    for rid in sorted(set(rec_ids)):
        m = by_rec[rid]
        groups.setdefault((m.subject_id, m.side), []).append(rid)
    scores = []
    for (subject, side), rids in sorted(groups.items()):
        sel = np.isin(ids, rids)
        raw = float(frame_dist[sel].mean())
        scores.append(scoring.DeviationScore(
            subject_id=subject, side=side, score=raw / ref.baseline,
            frames=int(sel.sum()), raw_distance=raw))
    rows = scoring.score_report(scores, metas)
    tables.write_scores_csv(rows, out)
    if sessions_out is not None:
        with open(sessions_out, "w", newline="") as fh:
            import csv as _csv
            w = _csv.writer(fh)
            w.writerow(["subject", "side", "impairment", "recording_id",
                        "frames", "raw_distance", "score"])
            for r in session_rows:
                w.writerow([r["subject"], r["side"], r["impairment"], r["recording_id"],
                            r["frames"], f"{r['raw_distance']:.6f}", f"{r['score']:.6f}"])
    return rows


# ---------------------------------------------------------------------------
# pipeline

def _find_recordings(input_dir: Path) -> list[Path]:
    root = input_dir / "recordings" if (input_dir / "recordings").is_dir() else input_dir
    recs = sorted(p for p in root.iterdir() if (p / "meta.json").is_file())
    if not recs:
        raise DataError(f"no recordings (directories with meta.json) under {root}")
    return recs


def _stage(stage: str, rid: str):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and isinstance(exc, BbtError):
                raise DataError(f"stage '{stage}', recording '{rid}': {exc}") from exc
            return False
    return _Ctx()


def run_pipeline(input_dir: Path, output_dir: Path, cfg: PipelineConfig) -> None:
    recs = _find_recordings(input_dir)
    spec_path = Path(cfg.skeleton) if cfg.skeleton else None

    def per_recording(rdir: Path) -> tuple[str, RecordingMeta]:
        rid = rdir.name
        odir = output_dir / "recordings" / rid
        odir.mkdir(parents=True, exist_ok=True)
        with _stage("meta", rid):
            meta = read_meta(rdir / "meta.json")
        with _stage("stabilize", rid):
            stage_stabilize(rdir / "masks", cfg.tau, odir / "voted.pgm",
                            odir / "stabilize.json", odir / "front.pgm")
        with _stage("calibrate", rid):
            stage_calibrate(rdir / "pointmap.pmap", odir / "front.pgm",
                            odir / "pitch.json")
        with _stage("angles", rid):
            stage_angles(rdir / "keypoints.jsonl", odir / "pitch.json",
                         spec_path, odir / "angles.csv")
        return rid, meta

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(per_recording, recs))
    else:
        results = [per_recording(r) for r in recs]
    metas = dict(results)

    healthy = [rid for rid, m in sorted(metas.items()) if m.cohort == "healthy"]
    if not healthy:
        raise DataError("stage 'pca': no healthy recordings to fit on")
    rec_out = output_dir / "recordings"
    with _stage("pca", "cohort"):
        stage_pca_fit([rec_out / rid / "angles.csv" for rid in healthy],
                      cfg.variance_threshold, output_dir / "pca.json")
    for rid in sorted(metas):
        with _stage("features", rid):
            stage_pca_apply(rec_out / rid / "angles.csv", output_dir / "pca.json",
                            rid, cfg.space, rec_out / rid / "features.csv")

    ref_paths = [rec_out / rid / "features.csv" for rid in healthy]
    with _stage("baseline", "cohort"):
        ref = _build_reference(ref_paths, cfg.k, cfg.baseline_mode)
        _write_json({
            "baseline": _round6(ref.baseline),
            "k": cfg.k,
            "mode": cfg.baseline_mode,
            "frames": int(ref.features.shape[0]),
        }, output_dir / "baseline.json")
    with _stage("score", "cohort"):
        stage_score(
            [rec_out / rid / "features.csv" for rid in sorted(metas)],
            ref_paths,
            [recs[i] / "meta.json" for i in range(len(recs))],
            cfg.k, cfg.baseline_mode,
            output_dir / "scores.csv", output_dir / "scores_sessions.csv",
        )


def _parse_config_file(path: Path) -> dict:
    """Plain key=value config; '#' starts a comment."""
    values = {}
    try:
        text = path.read_text()
    except OSError as e:
        raise DataError(f"cannot read config {path}: {e}") from e
    for i, line in enumerate(text.splitlines()):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{i + 1}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = val.strip("\"'")
    return values


# ---------------------------------------------------------------------------
# argument parsing

def _build_parser() -> _Parser:
    p = _Parser(prog="bbt", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("stabilize", help="temporally stabilize a mask sequence")
    sp.add_argument("--masks", required=True, type=Path)
    sp.add_argument("--tau", type=float, default=0.9)
    sp.add_argument("--out", required=True, type=Path)
    sp.add_argument("--report", type=Path)
    sp.add_argument("--front-out", type=Path,
                    help="also write the front-face mask of frame t*")

    sp = sub.add_parser("calibrate", help="estimate camera pitch from a point map")
    sp.add_argument("--pointmap", required=True, type=Path)
    sp.add_argument("--front", required=True, type=Path)
    sp.add_argument("--out", required=True, type=Path)

    sp = sub.add_parser("angles", help="gravity-aligned joint angles per frame")
    sp.add_argument("--keypoints", required=True, type=Path)
    sp.add_argument("--pitch", required=True, type=Path)
    sp.add_argument("--spec", type=Path)
    sp.add_argument("--out", required=True, type=Path)

    sp = sub.add_parser("pca", help="finger-synergy PCA")
    pca_sub = sp.add_subparsers(dest="pca_command", required=True)
    fit = pca_sub.add_parser("fit")
    fit.add_argument("--angles", required=True, type=Path, nargs="+")
    fit.add_argument("--threshold", type=float, default=0.90)
    fit.add_argument("--out", required=True, type=Path)
    app = pca_sub.add_parser("apply")
    app.add_argument("--angles", required=True, type=Path)
    app.add_argument("--model", required=True, type=Path)
    app.add_argument("--recording-id", default=None)
    app.add_argument("--space", choices=SPACES, default="pca13")
    app.add_argument("--out", required=True, type=Path)

    sp = sub.add_parser("baseline", help="print the healthy baseline distance")
    sp.add_argument("--reference", required=True, type=Path, nargs="+")
    sp.add_argument("--meta", required=True, type=Path, nargs="+")
    sp.add_argument("--k", type=int, default=15)
    sp.add_argument("--mode", choices=BASELINE_MODES, default="knn")
    sp.add_argument("--out", type=Path)

    sp = sub.add_parser("score", help="KNN deviation scores vs the healthy reference")
    sp.add_argument("--features", required=True, type=Path, nargs="+")
    sp.add_argument("--reference", required=True, type=Path, nargs="+")
    sp.add_argument("--meta", required=True, type=Path, nargs="+")
    sp.add_argument("--k", type=int, default=15)
    sp.add_argument("--mode", choices=BASELINE_MODES, default="knn")
    sp.add_argument("--out", required=True, type=Path)
    sp.add_argument("--sessions-out", type=Path)

    sp = sub.add_parser("synth", help="synthetic ground-truth datasets")
    syn_sub = sp.add_subparsers(dest="synth_command", required=True)
    sc = syn_sub.add_parser("scene")
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--pitch-deg", type=float, default=0.0)
    sc.add_argument("--noise", type=float, default=0.0)
    sc.add_argument("--corrupt", type=float, default=0.0)
    sc.add_argument("--frames", type=int, default=10)
    sc.add_argument("--grid", type=int, default=64)
    sc.add_argument("--out", required=True, type=Path)
    mo = syn_sub.add_parser("motion")
    mo.add_argument("--seed", type=int, default=0)
    mo.add_argument("--frames", type=int, default=100)
    mo.add_argument("--pitch-deg", type=float, default=0.0)
    mo.add_argument("--side", choices=("left", "right"), default="right")
    mo.add_argument("--out", required=True, type=Path)
    po = syn_sub.add_parser("population")
    po.add_argument("--seed", type=int, default=0)
    po.add_argument("--healthy", type=int, default=20)
    po.add_argument("--impaired", type=int, default=4)
    po.add_argument("--frames", type=int, default=300)
    po.add_argument("--out", required=True, type=Path)

    sp = sub.add_parser("pipeline", help="run every stage end to end")
    sp.add_argument("--input", required=True, type=Path)
    sp.add_argument("--output", required=True, type=Path)
    sp.add_argument("--config", type=Path)
    sp.add_argument("--tau", type=float)
    sp.add_argument("--k", type=int)
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--space", choices=SPACES)
    sp.add_argument("--baseline", choices=BASELINE_MODES)
    sp.add_argument("--spec", type=Path)
    sp.add_argument("--jobs", type=int)
    return p


def _pipeline_config(args) -> PipelineConfig:
    values: dict = {}
    if args.config:
        raw = _parse_config_file(args.config)
        casts = {"tau": float, "k": int, "variance_threshold": float,
                 "threshold": float, "space": str, "baseline": str,
                 "baseline_mode": str, "skeleton": str, "jobs": int}
        for key, val in raw.items():
            if key in ("input", "output"):
                continue
            if key not in casts:
                raise DataError(f"unknown config key {key!r}")
            values[key] = casts[key](val)
        if "threshold" in values:
            values["variance_threshold"] = values.pop("threshold")
        if "baseline" in values:
            values["baseline_mode"] = values.pop("baseline")
    # flags win over the config file
    if args.tau is not None:
        values["tau"] = args.tau
    if args.k is not None:
        values["k"] = args.k
    if args.threshold is not None:
        values["variance_threshold"] = args.threshold
    if args.space is not None:
        values["space"] = args.space
    if args.baseline is not None:
        values["baseline_mode"] = args.baseline
    if args.spec is not None:
        values["skeleton"] = str(args.spec)
    if args.jobs is not None:
        values["jobs"] = args.jobs
    return PipelineConfig(**values)


def _run(args) -> None:
    if args.command == "stabilize":
        res = stage_stabilize(args.masks, args.tau, args.out, args.report, args.front_out)
        print(f"kept={res.kept} discarded={res.discarded} t_star={res.t_star}")
    elif args.command == "calibrate":
        pe = stage_calibrate(args.pointmap, args.front, args.out)
        print(f"phi_deg={pe.phi_deg:.6f} samples={pe.samples}")
    elif args.command == "angles":
        frames = stage_angles(args.keypoints, args.pitch, args.spec, args.out)
        print(f"frames={len(frames)}")
    elif args.command == "pca":
        if args.pca_command == "fit":
            model = stage_pca_fit(args.angles, args.threshold, args.out)
            print(f"k={model.k} explained={model.explained_ratio.sum():.6f}")
        else:
            rid = args.recording_id or args.angles.stem
            stage_pca_apply(args.angles, args.model, rid, args.space, args.out)
    elif args.command == "baseline":
        ref = _build_reference(args.reference, args.k, args.mode)
        print(f"{ref.baseline:.6f}")
        if args.out:
            _write_json({"baseline": _round6(ref.baseline), "k": args.k,
                         "mode": args.mode, "frames": int(ref.features.shape[0])},
                        args.out)
    elif args.command == "score":
        rows = stage_score(args.features, args.reference, args.meta,
                           args.k, args.mode, args.out, args.sessions_out)
        print(f"scored {len(rows)} subject-sides")
    elif args.command == "synth":
        _run_synth(args)
    elif args.command == "pipeline":
        cfg = _pipeline_config(args)
        run_pipeline(args.input, args.output, cfg)
        print(f"pipeline complete: {args.output}")
    else:  # pragma: no cover
        raise InternalError(f"unhandled command {args.command!r}")


def _run_synth(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.synth_command == "scene":
        scene = synth.SyntheticScene(
            pitch_rad=math.radians(args.pitch_deg), grid=(args.grid, args.grid),
            noise_sigma_m=args.noise, corrupt_fraction=args.corrupt,
            n_frames=args.frames, seed=args.seed)
        data = synth.gen_scene(scene)
        from .interchange import write_mask_sequence, write_point_map
        write_mask_sequence(data.masks, out / "masks")
        write_point_map(data.pointmap, out / "pointmap.pmap")
        _write_json({
            "pitch_rad": _round6(data.pitch_rad),
            "corrupted_mask_frames": data.corrupted_frames,
            "seed": args.seed,
        }, out / "manifest.json")
    elif args.synth_command == "motion":
        rng = np.random.default_rng(args.seed)
        targets = synth.random_targets(args.frames, rng)
        motion = synth.SyntheticMotion(targets, side=args.side, seed=args.seed)
        kp, truth = synth.gen_motion(motion, pitch_rad=math.radians(args.pitch_deg))
        from .interchange import write_keypoints
        write_keypoints(kp, out / "keypoints.jsonl")
        tables.write_angles_csv(truth, out / "truth_angles.csv")
        _write_json({"pitch_rad": _round6(math.radians(args.pitch_deg)),
                     "frames": args.frames, "seed": args.seed}, out / "manifest.json")
    else:
        cfg = synth.PopulationConfig(
            n_healthy=args.healthy, n_impaired=args.impaired,
            frames_per_recording=args.frames, seed=args.seed)
        synth.gen_population(cfg, out)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("BBT_LOG", "WARNING"))
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _run(args)
    except InternalError as e:
        print(f"bbt: internal error: {e}", file=sys.stderr)
        return 3
    except BbtError as e:
        print(f"bbt: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
