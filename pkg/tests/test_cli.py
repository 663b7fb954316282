"""End-to-end tests for the command line interface."""

import csv
import json
import os
import subprocess

import numpy as np
import pytest

from mmcl import datagen, solvers, storage
from mmcl.cli import main
from mmcl.errors import CONFIG_EXIT_CODE, NUMERICAL_EXIT_CODE

MODEL = {"d1": 6, "d2": 5, "r": 2, "snr": 2.0, "seed": 0}


def write_config(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def gen_paired(tmp_path, n=40, p=0.0, seed=1, subdir="paired"):
    cfg = write_config(tmp_path, f"{subdir}.json", {
        "kind": "paired", "model": MODEL, "n": n, "p": p, "seed": seed})
    out = tmp_path / subdir
    assert main(["gen", "--config", cfg, "--out", str(out)]) == 0
    return str(out)


class TestGen:
    def test_paired_matches_direct_sampling(self, tmp_path, capsys):
        out = gen_paired(tmp_path, n=30, p=0.2, seed=3)
        assert "wrote paired dataset" in capsys.readouterr().out
        back = storage.load_dataset(out)
        model = datagen.random_model(6, 5, 2, snr=2.0, seed=0)
        want = datagen.sample_paired(model, 30, 0.2, seed=3)
        assert np.array_equal(back.x, want.x)
        assert np.array_equal(back.xt, want.xt)
        assert back.distortion == want.distortion

    def test_out_in_config_is_used(self, tmp_path):
        dest = tmp_path / "from_config"
        cfg = write_config(tmp_path, "g.json", {
            "kind": "paired", "model": MODEL, "n": 10, "p": 0.0,
            "out": str(dest)})
        assert main(["gen", "--config", cfg]) == 0
        assert (dest / "meta.json").exists()

    def test_unpaired_and_labeled_kinds(self, tmp_path):
        ucfg = write_config(tmp_path, "u.json", {
            "kind": "unpaired", "model": MODEL, "n": 20, "seed": 2})
        assert main(["gen", "--config", ucfg, "--out", str(tmp_path / "u")]) == 0
        pool = storage.load_dataset(str(tmp_path / "u"))
        assert pool.observed_edges.shape == (0, 2)

        lcfg = write_config(tmp_path, "l.json", {
            "kind": "labeled-bipartite", "model": MODEL, "n_per_cluster": 5,
            "k": 3, "p_prime": 0.1, "seed": 4})
        assert main(["gen", "--config", lcfg, "--out", str(tmp_path / "l")]) == 0
        lab = storage.load_dataset(str(tmp_path / "l"))
        assert isinstance(lab, datagen.LabeledBipartite)
        assert lab.k == 3

    @pytest.mark.parametrize("cfg_obj", [
        {"kind": "nope", "model": MODEL, "n": 5},
        {"model": MODEL, "n": 5},
        [1, 2, 3],
        {"kind": "paired", "model": {"d1": 0, "d2": 5, "r": 2}, "n": 5},
        {"kind": "paired", "model": MODEL, "n": 1},
    ])
    def test_bad_config_exits_2(self, tmp_path, capsys, cfg_obj):
        cfg = write_config(tmp_path, "bad.json", cfg_obj)
        code = main(["gen", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == CONFIG_EXIT_CODE
        assert "error" in capsys.readouterr().err

    def test_missing_out_exits_2(self, tmp_path):
        cfg = write_config(tmp_path, "g.json", {
            "kind": "paired", "model": MODEL, "n": 5})
        assert main(["gen", "--config", cfg]) == CONFIG_EXIT_CODE

    def test_unreadable_config_exits_2(self, tmp_path):
        assert main(["gen", "--config", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "o")]) == CONFIG_EXIT_CODE

    def test_malformed_json_exits_2(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["gen", "--config", str(path),
                     "--out", str(tmp_path / "o")]) == CONFIG_EXIT_CODE


class TestFit:
    def test_linear_matches_direct_solver(self, tmp_path, capsys):
        data = gen_paired(tmp_path)
        out = tmp_path / "fit"
        assert main(["fit", "linear", "--data", data, "--out", str(out),
                     "--r", "2", "--rho", "1.0"]) == 0
        assert "fit linear" in capsys.readouterr().out
        want = solvers.fit_linear_closed_form(storage.load_dataset(data), 2, 1.0)
        got = storage.load_matrix(str(out / "product.csv"))
        assert np.array_equal(got, want.product)
        info = storage.load_json(str(out / "fit.json"))
        assert info["final_loss"] == want.final_loss
        assert "loss_spec" not in info

    def test_gd_records_spec_and_trace(self, tmp_path):
        data = gen_paired(tmp_path, n=20)
        out = tmp_path / "fit"
        assert main(["fit", "gd", "--data", data, "--out", str(out),
                     "--r", "2", "--phi", "log", "--psi", "exp", "--cn", "n",
                     "--tau", "0.5", "--lr", "0.05", "--max-iter", "30"]) == 0
        info = storage.load_json(str(out / "fit.json"))
        assert info["loss_spec"]["phi"] == "log"
        assert info["loss_spec"]["psi"] == "exp"
        assert info["loss_spec"]["cn"] == "n"
        assert info["iterations"] <= 30
        assert len(info["trace"]) == info["iterations"] + 1

    def test_approx_forces_exp_psi(self, tmp_path):
        data = gen_paired(tmp_path, n=20)
        out = tmp_path / "fit"
        assert main(["fit", "approx", "--data", data, "--out", str(out),
                     "--r", "2", "--tau", "0.5", "--nu", "2.0"]) == 0
        info = storage.load_json(str(out / "fit.json"))
        assert info["loss_spec"]["psi"] == "exp"
        assert info["loss_spec"]["cn"] == "n"
        assert info["loss_spec"]["nu"] == 2.0

    def test_semi_uses_pool_and_reports_edges(self, tmp_path):
        data = gen_paired(tmp_path, n=30)
        ucfg = write_config(tmp_path, "u.json", {
            "kind": "unpaired", "model": MODEL, "n": 60, "seed": 7})
        pool_dir = tmp_path / "pool"
        assert main(["gen", "--config", ucfg, "--out", str(pool_dir)]) == 0
        out = tmp_path / "fit"
        assert main(["fit", "semi", "--data", data, "--unpaired", str(pool_dir),
                     "--out", str(out), "--r", "2", "--tau", "auto"]) == 0
        info = storage.load_json(str(out / "fit.json"))
        assert info["edges_estimated"] == 60
        assert info["edge_pool_size"] >= 60
        assert info["rounds_run"] == 1
        assert isinstance(info["edge_threshold"], float)

    def test_sscl_expected_and_sampled(self, tmp_path):
        data = gen_paired(tmp_path, n=30)
        out_e = tmp_path / "fit_e"
        out_s = tmp_path / "fit_s"
        assert main(["fit", "sscl", "--data", data, "--out", str(out_e),
                     "--r", "2"]) == 0
        assert main(["fit", "sscl", "--data", data, "--out", str(out_s),
                     "--r", "2", "--mode", "sampled", "--k-draws", "50",
                     "--seed", "5"]) == 0
        ge = storage.load_matrix(str(out_e / "g1.csv"))
        gs = storage.load_matrix(str(out_s / "g1.csv"))
        assert ge.shape == gs.shape == (2, 6)

    def test_degenerate_data_exits_3(self, tmp_path, capsys):
        ds = datagen.PairedDataset(
            x=np.ones((4, 3)), xt=np.ones((4, 2)),
            observed_edges=np.stack([np.arange(4)] * 2, axis=1),
            truth_edges=np.stack([np.arange(4)] * 2, axis=1),
            distortion=0.0)
        data = tmp_path / "flat"
        storage.save_dataset(str(data), ds)
        code = main(["fit", "linear", "--data", str(data),
                     "--out", str(tmp_path / "fit"), "--r", "1"])
        assert code == NUMERICAL_EXIT_CODE
        assert "numerical error" in capsys.readouterr().err

    def test_excessive_rank_exits_2(self, tmp_path):
        data = gen_paired(tmp_path, n=10)
        assert main(["fit", "linear", "--data", data,
                     "--out", str(tmp_path / "fit"), "--r", "99"]) == CONFIG_EXIT_CODE

    def test_missing_data_directory_exits_2(self, tmp_path):
        assert main(["fit", "linear", "--data", str(tmp_path / "absent"),
                     "--out", str(tmp_path / "fit"), "--r", "2"]) == CONFIG_EXIT_CODE


class TestBsgmp:
    def make_edges(self, tmp_path):
        rows = [(i, j) for b in range(3)
                for i in range(4 * b, 4 * b + 4)
                for j in range(4 * b, 4 * b + 4)]
        path = tmp_path / "edges.csv"
        storage.write_csv(str(path), ("i", "j"), rows)
        return str(path)

    def test_partition_three_bicliques(self, tmp_path, capsys):
        edges = self.make_edges(tmp_path)
        out = tmp_path / "part"
        assert main(["bsgmp", "--edges", edges, "--k", "3",
                     "--out", str(out)]) == 0
        assert "partitioned 48 edges" in capsys.readouterr().out
        report = storage.load_json(str(out / "report.json"))
        assert report["k"] == 3
        assert report["dropped"] == 0
        labels = storage.read_edge_csv(str(out / "kept_edges.csv"))
        assert labels.shape == (48, 2)

    def test_explicit_node_counts_allow_isolated_nodes(self, tmp_path):
        edges = self.make_edges(tmp_path)
        out = tmp_path / "part"
        assert main(["bsgmp", "--edges", edges, "--k", "3", "--n-left", "14",
                     "--n-right", "14", "--out", str(out)]) == 0
        left = (out / "labels_left.csv").read_text().strip().splitlines()
        assert len(left) - 1 == 14

    def test_empty_edge_file_exits_2(self, tmp_path):
        path = tmp_path / "edges.csv"
        path.write_text("i,j\n")
        assert main(["bsgmp", "--edges", str(path), "--k", "2",
                     "--out", str(tmp_path / "p")]) == CONFIG_EXIT_CODE

    def test_invalid_k_exits_2(self, tmp_path):
        edges = self.make_edges(tmp_path)
        assert main(["bsgmp", "--edges", edges, "--k", "1",
                     "--out", str(tmp_path / "p")]) == CONFIG_EXIT_CODE
        assert main(["bsgmp", "--edges", edges, "--k", "99",
                     "--out", str(tmp_path / "p")]) == CONFIG_EXIT_CODE


class TestExp:
    EXP_CONFIG = {
        "experiment": "gradcheck",
        "model": {"d1": 4, "d2": 3, "r": 2},
        "seeds": [0],
        "sweep": {"n_grid": [4]},
        "options": {"losses": ["linear", "clip"]},
    }

    def test_gradcheck_sweep(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "e.json", self.EXP_CONFIG)
        out = tmp_path / "exp"
        assert main(["exp", "gradcheck", "--config", cfg, "--out", str(out)]) == 0
        assert "2 trials" in capsys.readouterr().out
        assert sorted(os.listdir(out)) == ["manifest.json", "results.csv", "summary.csv"]
        manifest = storage.load_json(str(out / "manifest.json"))
        assert manifest["rows"] == 2
        raw = open(cfg, "rb").read()
        assert manifest["inputs_blob_sha1"] == storage.blob_sha1(raw)

    def test_config_name_must_match_requested(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "e.json",
                           dict(self.EXP_CONFIG, experiment="distortion"))
        code = main(["exp", "gradcheck", "--config", cfg,
                     "--out", str(tmp_path / "exp")])
        assert code == CONFIG_EXIT_CODE
        assert "distortion" in capsys.readouterr().err

    def test_name_fills_missing_experiment_field(self, tmp_path):
        obj = {k: v for k, v in self.EXP_CONFIG.items() if k != "experiment"}
        cfg = write_config(tmp_path, "e.json", obj)
        assert main(["exp", "gradcheck", "--config", cfg,
                     "--out", str(tmp_path / "exp")]) == 0

    def test_unknown_experiment_name_exits_2(self, tmp_path):
        cfg = write_config(tmp_path, "e.json", self.EXP_CONFIG)
        assert main(["exp", "bogus", "--config", cfg,
                     "--out", str(tmp_path / "exp")]) == CONFIG_EXIT_CODE


class TestArgumentParsing:
    def test_no_arguments_exits_2(self):
        assert main([]) == 2

    def test_unknown_command_exits_2(self):
        assert main(["frobnicate"]) == 2

    def test_fit_requires_a_method(self):
        assert main(["fit"]) == 2

    def test_help_exits_0(self, capsys):
        assert main(["--help"]) == 0
        assert "gen" in capsys.readouterr().out


class TestInstalledEntryPoint:
    def test_console_script_round_trip(self, tmp_path):
        cfg = tmp_path / "gen.json"
        cfg.write_text(json.dumps({
            "kind": "paired", "model": MODEL, "n": 20, "p": 0.0, "seed": 1}))
        data = tmp_path / "data"
        fit = tmp_path / "fit"
        proc = subprocess.run(
            ["mmcl", "gen", "--config", str(cfg), "--out", str(data)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        proc = subprocess.run(
            ["mmcl", "fit", "linear", "--data", str(data), "--out", str(fit),
             "--r", "2"], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert (fit / "product.csv").exists()

    def test_module_invocation_matches_console_script(self, tmp_path):
        import sys
        proc = subprocess.run(
            [sys.executable, "-m", "mmcl", "--help"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "gen" in proc.stdout


def strip_wall_time(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    wt = rows[0].index("wall_time")
    return [[c for i, c in enumerate(row) if i != wt] for row in rows]


class TestRerunDeterminism:
    def test_exp_reruns_are_identical_except_wall_time(self, tmp_path):
        cfg = write_config(tmp_path, "e.json", TestExp.EXP_CONFIG)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["exp", "gradcheck", "--config", cfg, "--out", str(out_a)]) == 0
        assert main(["exp", "gradcheck", "--config", cfg, "--out", str(out_b)]) == 0
        assert strip_wall_time(out_a / "results.csv") == \
            strip_wall_time(out_b / "results.csv")
        assert (out_a / "summary.csv").read_bytes() == (out_b / "summary.csv").read_bytes()
        assert (out_a / "manifest.json").read_bytes() == \
            (out_b / "manifest.json").read_bytes()

    def test_gen_fit_rerun_byte_identical(self, tmp_path):
        data_a = gen_paired(tmp_path, subdir="da", seed=6)
        data_b = gen_paired(tmp_path, subdir="db", seed=6)
        for name in ("x.csv", "xt.csv", "edges.csv", "meta.json"):
            assert (tmp_path / "da" / name).read_bytes() == \
                (tmp_path / "db" / name).read_bytes()
        fit_a = tmp_path / "fa"
        fit_b = tmp_path / "fb"
        for data, fit in ((data_a, fit_a), (data_b, fit_b)):
            assert main(["fit", "gd", "--data", data, "--out", str(fit),
                         "--r", "2", "--phi", "log", "--psi", "exp",
                         "--cn", "n", "--tau", "0.5", "--max-iter", "20"]) == 0
        for name in ("product.csv", "g1.csv", "g2.csv", "fit.json"):
            assert (fit_a / name).read_bytes() == (fit_b / name).read_bytes()
