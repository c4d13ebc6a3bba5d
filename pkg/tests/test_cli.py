import json
import os

import numpy as np

from blockselect import cli
from blockselect.spectral import EigenConvergenceError


def write_two_cliques(path, size=4):
    lines = []
    for base in (0, size):
        for i in range(size):
            for j in range(i + 1, size):
                lines.append(f"{base + i + 1} {base + j + 1}")
    path.write_text("\n".join(lines) + "\n")


class TestSelect:
    def test_two_clique_file(self, tmp_path, capsys):
        edges = tmp_path / "edges.txt"
        write_two_cliques(edges)
        out = tmp_path / "out"
        status = cli.main([
            "select", "--input", str(edges), "--model", "sbm", "--lambda", "1",
            "--kmax", "4", "--seed", "7", "--out-dir", str(out),
        ])
        assert status == 0
        printed = capsys.readouterr().out
        assert "k_hat = 2" in printed
        assert "k,criterion" in printed
        report = json.loads((out / "report.json").read_text())
        assert report["k_hat"] == 2
        assert (out / "per_k.csv").exists()
        assert (out / "manifest.json").exists()

    def test_missing_input_is_usage_error(self, tmp_path, capsys):
        status = cli.main(["select", "--seed", "1", "--out-dir", str(tmp_path)])
        assert status == 2
        err = capsys.readouterr().err.strip()
        payload = json.loads(err)
        assert payload["error"] == "usage"

    def test_missing_seed_is_usage_error(self, tmp_path, capsys):
        edges = tmp_path / "edges.txt"
        write_two_cliques(edges)
        assert cli.main(["select", "--input", str(edges)]) == 2

    def test_parse_error_is_validation_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("1 2\nthis is not an edge\n")
        status = cli.main([
            "select", "--input", str(bad), "--seed", "1", "--kmax", "2",
            "--out-dir", str(tmp_path / "o"),
        ])
        assert status == 2
        payload = json.loads(capsys.readouterr().err.strip())
        assert payload["error"] == "validation"
        assert ":2:" in payload["message"]

    def test_kmax_exceeding_n_fails_before_compute(self, tmp_path, capsys):
        edges = tmp_path / "edges.txt"
        edges.write_text("1 2\n")
        status = cli.main([
            "select", "--input", str(edges), "--seed", "1", "--kmax", "10",
            "--out-dir", str(tmp_path / "o"),
        ])
        assert status == 2

    def test_numerical_failure_maps_to_exit_3(self, tmp_path, capsys, monkeypatch):
        def boom(cfg):
            raise EigenConvergenceError("residual too large")

        monkeypatch.setitem(cli._COMMANDS, "select", boom)
        edges = tmp_path / "edges.txt"
        write_two_cliques(edges)
        status = cli.main([
            "select", "--input", str(edges), "--seed", "1", "--kmax", "2",
            "--out-dir", str(tmp_path / "o"),
        ])
        assert status == 3
        payload = json.loads(capsys.readouterr().err.strip())
        assert payload["error"] == "numerical"


class TestSimulate:
    def test_writes_deterministic_files(self, tmp_path):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        for out in (out1, out2):
            status = cli.main([
                "simulate", "--design", "sim3", "--k", "2", "--r", "5",
                "--seed", "11", "--out-dir", str(out),
            ])
            assert status == 0
        assert (out1 / "edges.txt").read_bytes() == (out2 / "edges.txt").read_bytes()
        assert (out1 / "labels.txt").read_bytes() == (out2 / "labels.txt").read_bytes()

    def test_sim5_writes_weights(self, tmp_path):
        out = tmp_path / "w"
        status = cli.main([
            "simulate", "--design", "sim5", "--k", "2", "--r", "5",
            "--seed", "4", "--out-dir", str(out),
        ])
        assert status == 0
        weights = np.loadtxt(out / "node_weights.txt")
        assert weights.shape == (150,)

    def test_design_parameter_validation(self, capsys):
        assert cli.main(["simulate", "--design", "sim3", "--k", "2", "--seed", "1"]) == 2
        assert cli.main(["simulate", "--design", "sim4", "--seed", "1"]) == 2


class TestPreprocess:
    def test_symmetrize_threshold_component(self, tmp_path):
        # 4-node weighted matrix: strong 0-1 and 2-3 ties, nothing across,
        # plus an isolated-ish node pattern after thresholding
        t = np.array([
            [0.0, 9.0, 0.1, 0.1],
            [1.0, 0.0, 0.2, 0.1],
            [0.1, 0.1, 0.0, 8.0],
            [0.1, 0.2, 2.0, 0.0],
        ])
        src = tmp_path / "w.csv"
        src.write_text("\n".join(",".join(str(v) for v in row) for row in t) + "\n")
        out = tmp_path / "out"
        status = cli.main([
            "preprocess", "--input", str(src), "--format", "weighted",
            "--symmetrize", "--threshold", "0.5", "--largest-component",
            "--out-dir", str(out),
        ])
        assert status == 0
        edges = (out / "edges.txt").read_text().strip().splitlines()
        # upper entries of W=T+T': (10, .2, .2, .3, .3, 10); median keeps >= .3
        assert (out / "index_map.csv").exists()
        assert len(edges) >= 1

    def test_threshold_required_for_weighted(self, tmp_path, capsys):
        src = tmp_path / "w.csv"
        src.write_text("0,1\n1,0\n")
        assert cli.main(["preprocess", "--input", str(src), "--format", "weighted"]) == 2

    def test_roundtrip_into_select(self, tmp_path):
        # two heavy trade blocks plus weak distinct cross flows; the median
        # threshold keeps the blocks and a handful of noise edges
        rng = np.random.default_rng(0)
        t = rng.random((20, 20))
        t[:10, :10] += 5.0
        t[10:, 10:] += 5.0
        np.fill_diagonal(t, 0.0)
        src = tmp_path / "trade.csv"
        src.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in t) + "\n")
        pre = tmp_path / "pre"
        assert cli.main([
            "preprocess", "--input", str(src), "--format", "weighted",
            "--symmetrize", "--threshold", "0.5", "--out-dir", str(pre),
        ]) == 0
        sel = tmp_path / "sel"
        assert cli.main([
            "select", "--input", str(pre / "edges.txt"), "--model", "sbm",
            "--lambda", "1", "--kmax", "5", "--seed", "3", "--out-dir", str(sel),
        ]) == 0
        report = json.loads((sel / "report.json").read_text())
        assert report["k_hat"] == 2


class TestManifestRerun:
    def test_experiment_rerun_reproduces_bytes(self, tmp_path):
        out = tmp_path / "exp"
        status = cli.main([
            "experiment", "--design", "mu-curve", "--seed", "1",
            "--out-dir", str(out),
        ])
        assert status == 0
        first = (out / "mu_curve.csv").read_bytes()
        status = cli.main([
            "experiment", "--from-manifest", str(out / "manifest.json"),
        ])
        assert status == 0
        assert (out / "mu_curve.csv").read_bytes() == first

    def test_subcommand_mismatch_rejected(self, tmp_path, capsys):
        out = tmp_path / "exp"
        cli.main(["experiment", "--design", "mu-curve", "--seed", "1",
                  "--out-dir", str(out)])
        status = cli.main(["select", "--from-manifest", str(out / "manifest.json")])
        assert status == 2

    def test_run_from_manifest_api(self, tmp_path):
        out = tmp_path / "exp"
        cli.main(["experiment", "--design", "mu-curve", "--seed", "1",
                  "--out-dir", str(out)])
        first = (out / "mu_curve.csv").read_bytes()
        assert cli.run_from_manifest(str(out / "manifest.json")) == 0
        assert (out / "mu_curve.csv").read_bytes() == first


class TestExperimentCommand:
    def test_small_sim3_table(self, tmp_path, capsys):
        out = tmp_path / "t"
        status = cli.main([
            "experiment", "--design", "sim3", "--r", "5", "--k", "2",
            "--reps", "2", "--kmax", "3", "--seed", "5", "--out-dir", str(out),
        ])
        assert status == 0
        table = (out / "sim3_table.csv").read_text().splitlines()
        assert len(table) == 3  # header + cbic + bic

    def test_sim1_distributions_with_histogram(self, tmp_path):
        out = tmp_path / "d"
        status = cli.main([
            "experiment", "--design", "sim1", "--reps", "2", "--seed", "5",
            "--histogram", "--out-dir", str(out),
        ])
        assert status == 0
        assert (out / "sim1_distributions.csv").exists()
        assert (out / "sim1_theory.json").exists()
        assert (out / "sim1_wilks_hist.csv").exists()

    def test_lambda_sweep_grid_flag(self, tmp_path):
        out = tmp_path / "s"
        status = cli.main([
            "experiment", "--design", "lambda-sweep", "--lambdas", "0,1",
            "--k", "2", "--reps", "2", "--kmax", "3", "--seed", "5",
            "--out-dir", str(out),
        ])
        assert status == 0
        lines = (out / "lambda_sweep.csv").read_text().splitlines()
        assert len(lines) == 3
