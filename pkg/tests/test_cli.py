import json
import math
import os

import numpy as np
import pytest

from bimonotone import (
    GridShape,
    SolverError,
    config_hash,
    read_matrix_csv,
    write_matrix_csv,
    write_observations_csv,
)
from bimonotone.cli import main
from bimonotone.cones import bimonotone_constraints


def write_demo_matrix(path, rng, r=6, s=8):
    z = rng.normal(size=(r, s)) + np.add.outer(np.linspace(0, 1, r), np.linspace(0, 1, s))
    write_matrix_csv(path, z)
    return z


class TestFitCommand:
    def test_complete_fit_outputs(self, tmp_path, rng):
        inp = tmp_path / "z.csv"
        write_demo_matrix(inp, rng)
        out = tmp_path / "out"
        assert main(["fit", "--input", str(inp), "--output-dir", str(out)]) == 0
        theta, observed = read_matrix_csv(out / "theta.csv")
        assert observed.all()
        flat = theta.ravel()
        for u, v in bimonotone_constraints(GridShape(6, 8)).pairs:
            assert flat[u] <= flat[v] + 1e-10
        cert = json.loads((out / "certificate.json").read_text())
        assert cert["converged"] is True
        assert abs(cert["grad_dot_theta"]) <= cert["tol"] * cert["scale"] + 1e-30
        assert cert["min_slope"] >= -(cert["tol"] * cert["scale"]) - 1e-30
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config_sha256"] == config_hash(manifest["config"])

    def test_simple_mode_emits_envelopes(self, tmp_path, rng):
        inp = tmp_path / "obs.csv"
        write_observations_csv(inp, [0, 5, 2], [0, 7, 3], [0.0, 1.0, 0.4])
        out = tmp_path / "out"
        code = main(["fit", "--input", str(inp), "--output-dir", str(out),
                     "--mode", "simple", "--rows", "6", "--cols", "8"])
        assert code == 0
        lower, _ = read_matrix_csv(out / "lower.csv")
        upper, _ = read_matrix_csv(out / "upper.csv")
        theta, _ = read_matrix_csv(out / "theta.csv")
        assert np.abs(theta - 0.5 * (lower + upper)).max() <= 1e-12

    def test_lightreg_on_matrix_with_missing_cells(self, tmp_path, rng):
        z = rng.normal(size=(5, 5))
        mask = np.ones((5, 5), dtype=bool)
        mask[2, 2] = mask[0, 4] = False
        inp = tmp_path / "z.csv"
        write_matrix_csv(inp, z, observed=mask)
        out = tmp_path / "out"
        code = main(["fit", "--input", str(inp), "--output-dir", str(out),
                     "--mode", "lightreg", "--lambda", "0.01"])
        assert code == 0
        theta, _ = read_matrix_csv(out / "theta.csv")
        assert np.isfinite(theta).all()

    def test_weight_matrix_input(self, tmp_path, rng):
        inp, wpath = tmp_path / "z.csv", tmp_path / "w.csv"
        write_demo_matrix(inp, rng, 4, 4)
        write_matrix_csv(wpath, rng.uniform(1, 3, (4, 4)))
        out = tmp_path / "out"
        assert main(["fit", "--input", str(inp), "--weights", str(wpath),
                     "--output-dir", str(out)]) == 0

    def test_exit_2_missing_input(self, tmp_path):
        assert main(["fit", "--input", str(tmp_path / "nope.csv"),
                     "--output-dir", str(tmp_path / "o")]) == 2

    def test_exit_2_malformed_matrix(self, tmp_path):
        inp = tmp_path / "bad.csv"
        inp.write_text("2,2\n1,junk\n3,4\n")
        assert main(["fit", "--input", str(inp),
                     "--output-dir", str(tmp_path / "o")]) == 2

    def test_exit_2_triples_need_grid_size(self, tmp_path):
        inp = tmp_path / "obs.csv"
        write_observations_csv(inp, [0], [0], [1.0])
        assert main(["fit", "--input", str(inp),
                     "--output-dir", str(tmp_path / "o")]) == 2

    def test_exit_2_dimension_mismatch(self, tmp_path, rng):
        inp = tmp_path / "z.csv"
        write_demo_matrix(inp, rng, 4, 4)
        assert main(["fit", "--input", str(inp), "--rows", "9",
                     "--output-dir", str(tmp_path / "o")]) == 2

    def test_exit_3_on_solver_failure(self, tmp_path, rng, monkeypatch):
        import bimonotone.cli as cli_mod

        def boom(*a, **k):
            raise SolverError("iteration cap reached")

        monkeypatch.setattr(cli_mod, "fit_layout", boom)
        inp = tmp_path / "z.csv"
        write_demo_matrix(inp, rng, 4, 4)
        assert main(["fit", "--input", str(inp),
                     "--output-dir", str(tmp_path / "o")]) == 3

    def test_argparse_rejects_unknown_mode(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["fit", "--input", "x", "--output-dir", "y", "--mode", "zigzag"])
        assert exc.value.code == 2


class TestDenoiseCommand:
    def test_outputs_and_decomposition(self, tmp_path, rng):
        x = np.linspace(0, 1, 12)[:, None]
        y = np.linspace(0, 1, 15)[None, :]
        z = np.sin(4 * (x + y)) + 0.3 * rng.standard_normal((12, 15))
        inp = tmp_path / "z.csv"
        write_matrix_csv(inp, z)
        out = tmp_path / "out"
        code = main(["denoise", "--input", str(inp), "--output-dir", str(out),
                     "--k", "2", "--l", "2", "--tau", "1.0", "--tau", "2.0"])
        assert code == 0
        gamma, _ = read_matrix_csv(out / "gamma.csv")
        assert gamma.min() >= 0.0 and gamma.max() <= 1.0
        mhat, _ = read_matrix_csv(out / "mhat.csv")
        additive, _ = read_matrix_csv(out / "additive.csv")
        interaction, _ = read_matrix_csv(out / "interaction.csv")
        assert np.abs(additive + interaction - mhat).max() <= 1e-10
        assert (out / "mhat_threshold_1.csv").exists()
        assert (out / "mhat_threshold_2.csv").exists()
        for name in ("data", "mhat", "additive", "interaction", "gamma",
                     "coef_squared"):
            assert (out / f"{name}.pgm").read_bytes().startswith(b"P5\n15 12\n255\n")
        scan = (out / "sigma_scan.csv").read_text().splitlines()
        assert scan[0] == "kappa,sigma1,sigma2"
        assert len(scan) == 1 + 39

    def test_manifest_records_sigma(self, tmp_path, rng):
        inp = tmp_path / "z.csv"
        write_matrix_csv(inp, rng.normal(size=(8, 8)))
        out = tmp_path / "out"
        assert main(["denoise", "--input", str(inp), "--output-dir", str(out),
                     "--sigma", "fixed:1.5"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["sigma_estimate"] == 1.5
        assert manifest["sigma_method"] == "fixed"
        assert manifest["config_sha256"] == config_hash(manifest["config"])

    def test_exit_2_incomplete_matrix(self, tmp_path, rng):
        inp = tmp_path / "z.csv"
        mask = np.ones((4, 4), dtype=bool)
        mask[1, 1] = False
        write_matrix_csv(inp, rng.normal(size=(4, 4)), observed=mask)
        assert main(["denoise", "--input", str(inp),
                     "--output-dir", str(tmp_path / "o")]) == 2

    def test_exit_2_order_too_large(self, tmp_path, rng):
        inp = tmp_path / "z.csv"
        write_matrix_csv(inp, rng.normal(size=(4, 4)))
        assert main(["denoise", "--input", str(inp), "--k", "4",
                     "--output-dir", str(tmp_path / "o")]) == 2

    def test_argparse_rejects_bad_sigma_spec(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["denoise", "--input", "x", "--output-dir", "y",
                  "--sigma", "auto9:1"])
        assert exc.value.code == 2

    def test_argparse_rejects_bad_pgm_range(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["denoise", "--input", "x", "--output-dir", "y",
                  "--pgm-range", "3:1"])
        assert exc.value.code == 2


class TestSimulateCommand:
    def test_binary_outputs(self, tmp_path):
        out = tmp_path / "out"
        code = main(["simulate", "binary-example", "--output-dir", str(out),
                     "--seed", "7", "--rows", "10", "--cols", "14"])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert 0 < report["aad_simple"] < 0.5
        assert 0 < report["aad_lightreg"] < 0.5
        for name in ("observations.csv", "data.csv", "theta_true.csv",
                     "theta_simple.csv", "theta_lightreg.csv", "manifest.json"):
            assert (out / name).exists()

    def test_splash_outputs(self, tmp_path):
        out = tmp_path / "out"
        code = main(["simulate", "splash-example", "--output-dir", str(out),
                     "--seed", "3", "--rows", "14", "--cols", "18"])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["seed"] == 3
        assert "sigma_hat" in report
        for tag in ("0_5", "1", "1_5", "2"):
            assert (out / f"mhat_c{tag}.csv").exists()
        curve = (out / "sigma_curve.csv").read_text().splitlines()
        assert curve[0].startswith("sigma,")

    def test_same_seed_reproduces_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["simulate", "splash-example", "--output-dir", str(out),
                         "--seed", "12", "--rows", "10", "--cols", "12"]) == 0
        for name in ("report.json", "z.csv", "manifest.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_recorded_when_generated(self, tmp_path):
        out = tmp_path / "out"
        assert main(["simulate", "binary-example", "--output-dir", str(out),
                     "--rows", "8", "--cols", "10"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert isinstance(manifest["seed"], int)

    def test_argparse_rejects_unknown_scenario(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "lighthouse", "--output-dir", str(tmp_path)])
        assert exc.value.code == 2


class TestMcStudyCommand:
    def test_tables_and_sum_check(self, tmp_path):
        out = tmp_path / "out"
        code = main(["mc-study", "--output-dir", str(out), "--reps", "4",
                     "--seed", "5", "--rows", "12", "--cols", "16",
                     "--tau", "1.0"])
        assert code == 0
        rep_lines = (out / "replicates.csv").read_text().splitlines()
        assert rep_lines[0] == "rep,sigma_hat,loss_bimonotone,loss_threshold_1"
        assert len(rep_lines) == 1 + 4
        losses = [float(ln.split(",")[2]) for ln in rep_lines[1:]]
        sum_lines = (out / "summary.csv").read_text().splitlines()
        assert sum_lines[0] == "estimator,mean,sd,se"
        mean_from_summary = float(sum_lines[1].split(",")[1])
        assert np.isclose(mean_from_summary, math.fsum(losses) / 4, atol=1e-15)
        report = json.loads((out / "report.json").read_text())
        assert report["reps"] == 4

    def test_exit_2_too_few_reps(self, tmp_path):
        assert main(["mc-study", "--output-dir", str(tmp_path / "o"),
                     "--reps", "1"]) == 2


class TestRerunDeterminism:
    def test_fit_rerun_identical(self, tmp_path, rng):
        inp = tmp_path / "z.csv"
        write_demo_matrix(inp, rng, 5, 6)
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["fit", "--input", str(inp), "--output-dir", str(out)]) == 0
        for name in ("theta.csv", "certificate.json", "manifest.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
