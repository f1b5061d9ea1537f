"""End-to-end command-line tests, run through subprocesses so exit codes and
stdout contracts are exercised exactly as a user would see them."""

import json
import subprocess
import sys

import numpy as np
import pytest

from vibgmm.data import SyntheticGmmSpec, generate_synthetic, save_vibf


def run_cli(*args, expect=0):
    out = subprocess.run(
        [sys.executable, "-m", "vibgmm", *map(str, args)],
        capture_output=True, text=True,
    )
    assert out.returncode == expect, (
        f"exit {out.returncode} != {expect}\nstdout: {out.stdout}\nstderr: {out.stderr}"
    )
    return out


@pytest.fixture(scope="module")
def synthetic_dir(tmp_path_factory):
    """Well separated 3-cluster data written via the CLI, plus a trained
    checkpoint over it."""
    root = tmp_path_factory.mktemp("cli")
    run_cli(
        "gen-synthetic", "--k", 3, "--dim", 2, "--n", 600, "--seed", 5,
        "--spread", 6.0, "--out", root / "data.vibf",
    )
    config = root / "toy.cfg"
    config.write_text(
        f"""
# three well separated blobs
data_path = {root / 'data.vibf'}
data_format = vibf
n_clusters = 3
latent_dim = 2
encoder_hidden = 16,16
decoder_hidden = 16,16
batch_size = 100
epochs = 60
seed = 7
gmm_kmeans_init = true
s_min = 1.0
s_max = 3.0
out_dir = {root / 'run'}
"""
    )
    run_cli("train", "--config", config)
    return root


class TestTrain:
    def test_outputs_exist_and_log_has_one_line_per_epoch(self, synthetic_dir):
        run = synthetic_dir / "run"
        assert (run / "checkpoint.vibw").exists()
        assert (run / "checkpoint.json").exists()
        lines = (run / "train_log.jsonl").read_text().splitlines()
        assert len(lines) == 60
        row = json.loads(lines[0])
        assert set(row) == {"epoch", "s", "lr", "recon", "kl", "total", "wall_ms"}

    def test_log_rows_decompose_exactly(self, synthetic_dir):
        for line in (synthetic_dir / "run" / "train_log.jsonl").read_text().splitlines():
            row = json.loads(line)
            assert row["total"] == pytest.approx(
                row["recon"] - row["s"] * row["kl"], abs=1e-12
            )

    def test_missing_required_key_exits_2(self, tmp_path):
        cfg = tmp_path / "broken.cfg"
        cfg.write_text("n_clusters = 3\n")
        out = run_cli("train", "--config", cfg, expect=2)
        assert "data_path" in out.stderr

    def test_unknown_key_exits_2(self, tmp_path):
        cfg = tmp_path / "broken.cfg"
        cfg.write_text("data_path = x\nn_clusters = 3\nturbo = on\n")
        out = run_cli("train", "--config", cfg, expect=2)
        assert "turbo" in out.stderr

    def test_seed_reruns_are_identical_up_to_wall_time(self, tmp_path):
        data = tmp_path / "d.vibf"
        spec = SyntheticGmmSpec(k=2, d=2, means=[[-3, 0], [3, 0]], variances=1.0,
                                weights=[0.5, 0.5], n=120, seed=1)
        ds = generate_synthetic(spec)
        save_vibf(data, ds.features)
        logs = []
        for run_dir in ("a", "b"):
            cfg = tmp_path / f"{run_dir}.cfg"
            cfg.write_text(
                f"data_path = {data}\nn_clusters = 2\nlatent_dim = 2\n"
                f"encoder_hidden = 8\ndecoder_hidden = 8\nbatch_size = 40\n"
                f"epochs = 4\nseed = 7\nout_dir = {tmp_path / run_dir}\n"
            )
            run_cli("train", "--config", cfg)
            rows = [
                json.loads(l)
                for l in (tmp_path / run_dir / "train_log.jsonl").read_text().splitlines()
            ]
            for row in rows:
                row.pop("wall_ms")  # the one legitimately non-deterministic field
            logs.append(rows)
        assert logs[0] == logs[1]


class TestClusterAndEval:
    def test_vibgmm_cluster_and_eval_roundtrip(self, synthetic_dir):
        labels_path = synthetic_dir / "pred.txt"
        run_cli(
            "cluster", "--data", synthetic_dir / "data.vibf",
            "--checkpoint", synthetic_dir / "run", "--out", labels_path,
        )
        labels = [int(t) for t in labels_path.read_text().split()]
        assert len(labels) == 600
        assert set(labels) <= {0, 1, 2}

        out = run_cli(
            "eval", "--pred", labels_path,
            "--truth", str(synthetic_dir / "data.vibf") + ".labels",
        )
        result = json.loads(out.stdout)
        assert result["n"] == 600
        assert result["acc"] >= 0.95

    def test_kmeans_k1_labels_all_zero(self, synthetic_dir, tmp_path):
        out_path = tmp_path / "k1.txt"
        run_cli(
            "cluster", "--data", synthetic_dir / "data.vibf", "--algo", "kmeans",
            "--k", 1, "--out", out_path,
        )
        assert set(out_path.read_text().split()) == {"0"}

    def test_gmm_baseline_on_separated_data(self, synthetic_dir, tmp_path):
        pred = tmp_path / "gmm.txt"
        run_cli(
            "cluster", "--data", synthetic_dir / "data.vibf", "--algo", "gmm",
            "--k", 3, "--out", pred,
        )
        out = run_cli(
            "eval", "--pred", pred,
            "--truth", str(synthetic_dir / "data.vibf") + ".labels",
        )
        assert json.loads(out.stdout)["acc"] >= 0.95

    def test_eval_identical_files(self, synthetic_dir, tmp_path):
        truth = str(synthetic_dir / "data.vibf") + ".labels"
        out = run_cli("eval", "--pred", truth, "--truth", truth)
        assert json.loads(out.stdout)["acc"] == 1.0

    def test_eval_length_mismatch_exits_2(self, synthetic_dir, tmp_path):
        short = tmp_path / "short.txt"
        short.write_text("0\n1\n")
        run_cli(
            "eval", "--pred", short,
            "--truth", str(synthetic_dir / "data.vibf") + ".labels", expect=2,
        )

    def test_dimension_mismatch_names_expected_width(self, synthetic_dir, tmp_path):
        wrong = tmp_path / "wrong.vibf"
        save_vibf(wrong, np.ones((5, 7)))
        out = run_cli(
            "cluster", "--data", wrong, "--checkpoint", synthetic_dir / "run",
            "--out", tmp_path / "x.txt", expect=2,
        )
        assert "n_x=2" in out.stderr

    def test_emit_projection(self, synthetic_dir, tmp_path):
        labels_path = synthetic_dir / "pred.txt"
        proj_path = tmp_path / "proj.csv"
        out = run_cli(
            "eval", "--pred", labels_path,
            "--truth", str(synthetic_dir / "data.vibf") + ".labels",
            "--emit-projection", proj_path,
            "--checkpoint", synthetic_dir / "run",
            "--data", synthetic_dir / "data.vibf",
        )
        result = json.loads(out.stdout)
        assert 0.0 <= result["captured_variance"] <= 1.0
        lines = proj_path.read_text().splitlines()
        assert lines[0] == "x,y,pred,true"
        assert len(lines) == 601


class TestOracleCheck:
    def test_default_run_passes(self):
        out = run_cli("oracle-check", "--seed", 3, "--trials", 40)
        report = json.loads(out.stdout)
        assert report["all_passed"]

    def test_report_seed_determinism(self):
        a = run_cli("oracle-check", "--seed", 9, "--trials", 20).stdout
        b = run_cli("oracle-check", "--seed", 9, "--trials", 20).stdout
        assert a == b

    def test_injected_invalid_table_exits_1(self):
        out = run_cli("oracle-check", "--inject-invalid", expect=1)
        report = json.loads(out.stdout)
        assert not report["all_passed"]
        assert "sum to 1" in report["validation_error"]

    def test_bad_trials_exits_2(self):
        run_cli("oracle-check", "--trials", 0, expect=2)


class TestGenSynthetic:
    def test_csv_format_with_labels(self, tmp_path):
        out_path = tmp_path / "d.csv"
        run_cli(
            "gen-synthetic", "--k", 2, "--dim", 3, "--n", 50, "--format", "csv",
            "--out", out_path,
        )
        rows = out_path.read_text().splitlines()
        assert len(rows) == 50
        assert len(rows[0].split(",")) == 4  # features plus trailing label

    def test_seed_determinism(self, tmp_path):
        for name in ("a.vibf", "b.vibf"):
            run_cli(
                "gen-synthetic", "--k", 2, "--dim", 2, "--n", 30, "--seed", 11,
                "--out", tmp_path / name,
            )
        assert (tmp_path / "a.vibf").read_bytes() == (tmp_path / "b.vibf").read_bytes()
