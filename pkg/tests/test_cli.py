import csv
import subprocess
import sys

import pytest


def run_cli(*args, env=None):
    return subprocess.run([sys.executable, "-m", "gesturebench", *args],
                          capture_output=True, text=True, env=env)


@pytest.fixture(scope="module")
def pipeline_dirs(tmp_path_factory):
    """synth -> normalize chain shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    raw = root / "raw"
    norm = root / "norm"
    r = run_cli("synth", "--out", str(raw), "--classes", "5",
                "--per-class", "4", "--seed", "13")
    assert r.returncode == 0, r.stderr
    r = run_cli("normalize", "--in-dir", str(raw / "masks"),
                "--wrist-csv", str(raw / "wrists.csv"),
                "--out-dir", str(norm), "--manifest", str(raw / "manifest.csv"))
    assert r.returncode == 0, r.stderr
    return raw, norm


class TestSynth:
    def test_writes_expected_layout(self, pipeline_dirs):
        raw, _ = pipeline_dirs
        assert (raw / "manifest.csv").exists()
        assert (raw / "wrists.csv").exists()
        assert len(list((raw / "masks").glob("*.pgm"))) == 20

    def test_deterministic(self, tmp_path):
        r1 = run_cli("synth", "--out", str(tmp_path / "a"), "--classes", "2",
                     "--per-class", "2", "--seed", "3")
        r2 = run_cli("synth", "--out", str(tmp_path / "b"), "--classes", "2",
                     "--per-class", "2", "--seed", "3")
        assert r1.returncode == r2.returncode == 0
        for rel in ["manifest.csv", "wrists.csv", "masks/c00_i000.pgm"]:
            assert (tmp_path / "a" / rel).read_bytes() == \
                   (tmp_path / "b" / rel).read_bytes()


class TestNormalize:
    def test_outputs_and_log(self, pipeline_dirs):
        _, norm = pipeline_dirs
        pgms = list(norm.glob("*.pgm"))
        assert len(pgms) == 20
        log = (norm / "normalize_log.csv").read_text().splitlines()
        assert log[0] == "id,rotation_applied,scale_applied"
        assert len(log) == 21
        manifest = (norm / "manifest.csv").read_text().splitlines()
        assert manifest[0] == "id,class,path"
        assert len(manifest) == 21

    def test_missing_annotation_fails_that_file_only(self, tmp_path):
        r = run_cli("synth", "--out", str(tmp_path / "d"), "--classes", "2",
                    "--per-class", "2", "--seed", "5")
        assert r.returncode == 0
        wrists = (tmp_path / "d" / "wrists.csv").read_text().splitlines()
        (tmp_path / "d" / "wrists.csv").write_text(
            "\n".join(wrists[:-1]) + "\n")  # drop the last annotation
        r = run_cli("normalize", "--in-dir", str(tmp_path / "d" / "masks"),
                    "--wrist-csv", str(tmp_path / "d" / "wrists.csv"),
                    "--out-dir", str(tmp_path / "n"))
        assert r.returncode == 1
        assert "no wrist annotation" in r.stderr
        assert len(list((tmp_path / "n").glob("*.pgm"))) == 3

    def test_empty_input_dir(self, tmp_path):
        (tmp_path / "empty").mkdir()
        (tmp_path / "w.csv").write_text("id,lx,ly,rx,ry\n")
        r = run_cli("normalize", "--in-dir", str(tmp_path / "empty"),
                    "--wrist-csv", str(tmp_path / "w.csv"),
                    "--out-dir", str(tmp_path / "out"))
        assert r.returncode == 1
        assert "no inputs" in r.stderr


class TestClassify:
    def test_probe_equals_gallery_all_rank_one(self, pipeline_dirs, tmp_path):
        _, norm = pipeline_dirs
        out = tmp_path / "results.csv"
        r = run_cli("classify", "--gallery", str(norm / "manifest.csv"),
                    "--probes", str(norm / "manifest.csv"),
                    "--method", "scdt", "--threads", "2", "--out", str(out))
        assert r.returncode == 0, r.stderr
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 20
        assert all(row["rank"] == "1" for row in rows)
        assert all(float(row["top1_cost"]) == 0.0 for row in rows)

    def test_unknown_method_usage_error(self, pipeline_dirs, tmp_path):
        _, norm = pipeline_dirs
        r = run_cli("classify", "--gallery", str(norm / "manifest.csv"),
                    "--probes", str(norm / "manifest.csv"),
                    "--method", "nope", "--out", str(tmp_path / "x.csv"))
        assert r.returncode == 2
        for name in ("sc", "scdt", "sch", "hog", "dt", "tm", "hd", "hm"):
            assert name in r.stderr


class TestEvaluate:
    def test_crc_csv_and_summary(self, pipeline_dirs, tmp_path):
        _, norm = pipeline_dirs
        out = tmp_path / "crc.csv"
        r = run_cli("evaluate", "--manifest", str(norm / "manifest.csv"),
                    "--methods", "sc,hm", "--g", "1", "--repeats", "3",
                    "--seed", "1", "--out", str(out))
        assert r.returncode == 0, r.stderr
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 5  # two methods x five classes
        assert {row["method"] for row in rows} == {"sc", "hm"}
        assert "rank1" in r.stdout
        assert "sc" in r.stdout

    def test_deterministic_output(self, pipeline_dirs, tmp_path):
        _, norm = pipeline_dirs
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            r = run_cli("evaluate", "--manifest", str(norm / "manifest.csv"),
                        "--methods", "hm", "--g", "1", "--repeats", "2",
                        "--seed", "9", "--out", str(out))
            assert r.returncode == 0, r.stderr
        assert a.read_bytes() == b.read_bytes()

    def test_config_file_overrides(self, pipeline_dirs, tmp_path):
        _, norm = pipeline_dirs
        cfg = tmp_path / "params.cfg"
        cfg.write_text("# custom weights\nalpha=0.5\nbeta=0.5\nm_sc=16\n")
        r = run_cli("evaluate", "--manifest", str(norm / "manifest.csv"),
                    "--methods", "scdt", "--g", "1", "--repeats", "2",
                    "--seed", "1", "--out", str(tmp_path / "c.csv"),
                    "--config", str(cfg))
        assert r.returncode == 0, r.stderr

    def test_bad_config_key_usage_error(self, pipeline_dirs, tmp_path):
        _, norm = pipeline_dirs
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("zeta=1\n")
        r = run_cli("evaluate", "--manifest", str(norm / "manifest.csv"),
                    "--methods", "sc", "--out", str(tmp_path / "x.csv"),
                    "--config", str(cfg))
        assert r.returncode == 2
        assert "unknown key" in r.stderr

    def test_insufficient_images_names_class(self, pipeline_dirs, tmp_path):
        _, norm = pipeline_dirs
        r = run_cli("evaluate", "--manifest", str(norm / "manifest.csv"),
                    "--methods", "sc", "--g", "4", "--repeats", "2",
                    "--out", str(tmp_path / "x.csv"))
        assert r.returncode == 1
        assert "c0" in r.stderr


class TestBench:
    def test_bench_csv(self, pipeline_dirs, tmp_path):
        _, norm = pipeline_dirs
        out = tmp_path / "bench.csv"
        r = run_cli("bench", "--manifest", str(norm / "manifest.csv"),
                    "--methods", "hm,dt", "--g", "1", "--threads-list", "1,2",
                    "--repetitions", "3", "--out", str(out),
                    "--jsonl", str(tmp_path / "audit.jsonl"))
        assert r.returncode == 0, r.stderr
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4
        assert rows[0]["method"] == "dt" and rows[0]["T"] == "1"
        assert float(rows[0]["speedup"]) == 1.0
        assert (tmp_path / "audit.jsonl").exists()

    def test_threads_list_must_include_one(self, pipeline_dirs, tmp_path):
        _, norm = pipeline_dirs
        r = run_cli("bench", "--manifest", str(norm / "manifest.csv"),
                    "--methods", "hm", "--threads-list", "2,4",
                    "--out", str(tmp_path / "x.csv"))
        assert r.returncode == 1
        assert "contain 1" in r.stderr


class TestKernelBench:
    def test_reports_both_backends(self, tmp_path):
        out = tmp_path / "kb.csv"
        r = run_cli("kernel-bench", "--repeats", "2", "--out", str(out))
        assert r.returncode == 0, r.stderr
        assert "compiled" in r.stdout
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        kernels_seen = {row["kernel"] for row in rows}
        assert "assignment" in kernels_seen
        assert "compute_features" in kernels_seen


class TestEnvThreads:
    def test_threads_env_fallback(self, pipeline_dirs, tmp_path):
        import os
        _, norm = pipeline_dirs
        env = dict(os.environ, GESTUREBENCH_THREADS="2")
        r = run_cli("classify", "--gallery", str(norm / "manifest.csv"),
                    "--probes", str(norm / "manifest.csv"),
                    "--method", "hm", "--out", str(tmp_path / "r.csv"),
                    env=env)
        assert r.returncode == 0, r.stderr
