import hashlib
import json
from pathlib import Path

import pytest

from bbt.cli import main
from bbt.synth import PopulationConfig, gen_population

POP = dict(n_healthy=4, n_impaired=1, frames_per_recording=30,
           mask_frames=6, grid=(24, 24), seed=3)


def dir_digest(root: Path) -> dict:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("pop")
    manifest = gen_population(PopulationConfig(**POP), root)
    return root, manifest


class TestExitCodes:
    def test_no_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["stabilize", "--nope"])
        assert exc.value.code == 1

    def test_missing_masks_dir_is_data_error(self, tmp_path, capsys):
        rc = main(["stabilize", "--masks", str(tmp_path / "none"),
                   "--out", str(tmp_path / "v.pgm")])
        assert rc == 2
        assert "error" in capsys.readouterr().err

    def test_missing_pointmap_names_stage_and_recording(self, tmp_path, capsys):
        gen_population(PopulationConfig(**POP), tmp_path)
        (tmp_path / "recordings" / "h02" / "pointmap.pmap").unlink()
        rc = main(["pipeline", "--input", str(tmp_path),
                   "--output", str(tmp_path / "out")])
        err = capsys.readouterr().err
        assert rc == 2
        assert "calibrate" in err and "h02" in err

    def test_success_is_zero(self, dataset, tmp_path, capsys):
        root, _ = dataset
        rc = main(["pipeline", "--input", str(root), "--output", str(tmp_path / "out")])
        assert rc == 0
        assert "pipeline complete" in capsys.readouterr().out


class TestPipelineOutputs:
    def test_artifacts_and_score_rows(self, dataset, tmp_path):
        root, manifest = dataset
        out = tmp_path / "out"
        assert main(["pipeline", "--input", str(root), "--output", str(out)]) == 0
        for entry in manifest["recordings"]:
            rdir = out / "recordings" / entry["recording_id"]
            for name in ("voted.pgm", "front.pgm", "stabilize.json",
                         "pitch.json", "angles.csv", "features.csv"):
                assert (rdir / name).is_file()
        assert (out / "pca.json").is_file() and (out / "baseline.json").is_file()
        lines = (out / "scores.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + len(manifest["recordings"])

    def test_recovered_pitch_matches_manifest(self, dataset, tmp_path):
        root, manifest = dataset
        out = tmp_path / "out"
        assert main(["pipeline", "--input", str(root), "--output", str(out)]) == 0
        import math
        for entry in manifest["recordings"]:
            doc = json.loads(
                (out / "recordings" / entry["recording_id"] / "pitch.json").read_text())
            assert abs(doc["phi_deg"] - math.degrees(entry["pitch_rad"])) < 0.5

    def test_rerun_byte_identical(self, dataset, tmp_path):
        root, _ = dataset
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["pipeline", "--input", str(root), "--output", str(a)]) == 0
        assert main(["pipeline", "--input", str(root), "--output", str(b)]) == 0
        da = dir_digest(a)
        assert da and da == dir_digest(b)

    def test_jobs_flag_byte_identical(self, dataset, tmp_path):
        root, _ = dataset
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["pipeline", "--input", str(root), "--output", str(a)]) == 0
        assert main(["pipeline", "--input", str(root), "--output", str(b),
                     "--jobs", "3"]) == 0
        assert dir_digest(a) == dir_digest(b)


class TestSingleStageChaining:
    def test_chain_reproduces_pipeline_bytes(self, dataset, tmp_path):
        root, manifest = dataset
        pipe = tmp_path / "pipe"
        assert main(["pipeline", "--input", str(root), "--output", str(pipe)]) == 0

        out = tmp_path / "chain"
        rids = [e["recording_id"] for e in manifest["recordings"]]
        healthy = [e["recording_id"] for e in manifest["recordings"]
                   if e["cohort"] == "healthy"]
        for rid in rids:
            rdir = root / "recordings" / rid
            odir = out / "recordings" / rid
            odir.mkdir(parents=True)
            assert main(["stabilize", "--masks", str(rdir / "masks"),
                         "--out", str(odir / "voted.pgm"),
                         "--report", str(odir / "stabilize.json"),
                         "--front-out", str(odir / "front.pgm")]) == 0
            assert main(["calibrate", "--pointmap", str(rdir / "pointmap.pmap"),
                         "--front", str(odir / "front.pgm"),
                         "--out", str(odir / "pitch.json")]) == 0
            assert main(["angles", "--keypoints", str(rdir / "keypoints.jsonl"),
                         "--pitch", str(odir / "pitch.json"),
                         "--out", str(odir / "angles.csv")]) == 0
        assert main(["pca", "fit", "--angles",
                     *[str(out / "recordings" / r / "angles.csv") for r in healthy],
                     "--out", str(out / "pca.json")]) == 0
        for rid in rids:
            odir = out / "recordings" / rid
            assert main(["pca", "apply", "--angles", str(odir / "angles.csv"),
                         "--model", str(out / "pca.json"),
                         "--recording-id", rid,
                         "--out", str(odir / "features.csv")]) == 0
        ref = [str(out / "recordings" / r / "features.csv") for r in healthy]
        metas = [str(root / "recordings" / r / "meta.json") for r in rids]
        assert main(["baseline", "--reference", *ref, "--meta", *metas,
                     "--out", str(out / "baseline.json")]) == 0
        assert main(["score",
                     "--features",
                     *[str(out / "recordings" / r / "features.csv") for r in rids],
                     "--reference", *ref, "--meta", *metas,
                     "--out", str(out / "scores.csv"),
                     "--sessions-out", str(out / "scores_sessions.csv")]) == 0
        assert dir_digest(out) == dir_digest(pipe)


class TestConfigFile:
    def test_config_applied_and_flags_win(self, dataset, tmp_path):
        root, _ = dataset
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# pipeline settings\nk = 5\ntau = 0.8\nbaseline = knn\n")
        out = tmp_path / "out"
        assert main(["pipeline", "--input", str(root), "--output", str(out),
                     "--config", str(cfg), "--k", "7"]) == 0
        doc = json.loads((out / "baseline.json").read_text())
        assert doc["k"] == 7  # flag beats config
        assert doc["mode"] == "knn"

    def test_bad_config_key(self, dataset, tmp_path, capsys):
        root, _ = dataset
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bogus = 1\n")
        rc = main(["pipeline", "--input", str(root), "--output", str(tmp_path / "o"),
                   "--config", str(cfg)])
        assert rc == 2
        assert "bogus" in capsys.readouterr().err

    def test_bad_config_line(self, dataset, tmp_path, capsys):
        root, _ = dataset
        cfg = tmp_path / "run.cfg"
        cfg.write_text("tau 0.8\n")
        rc = main(["pipeline", "--input", str(root), "--output", str(tmp_path / "o"),
                   "--config", str(cfg)])
        assert rc == 2
        assert "key=value" in capsys.readouterr().err


class TestSynthCommand:
    def test_population_then_pipeline(self, tmp_path):
        data = tmp_path / "data"
        assert main(["synth", "population", "--seed", "2", "--healthy", "4",
                     "--impaired", "1", "--frames", "25", "--out", str(data)]) == 0
        assert main(["pipeline", "--input", str(data),
                     "--output", str(tmp_path / "out")]) == 0

    def test_scene_manifest(self, tmp_path):
        out = tmp_path / "scene"
        assert main(["synth", "scene", "--pitch-deg", "10", "--corrupt", "0.2",
                     "--out", str(out)]) == 0
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["corrupted_mask_frames"]
        assert (out / "pointmap.pmap").is_file()
