import json

import numpy as np
import pytest

from ancsim import cli, harness
from ancsim.presets import build_preset


def run_cli(*args):
    return cli.main(list(args))


SMALL = ["--set", "n_samples=6000", "--set", "record_stride=4"]


class TestRun:
    def test_preset_run_writes_files(self, tmp_path):
        code = run_cli("run", "fig3-static", "--output-dir", str(tmp_path),
                       "--algorithms", "fxlms,2gd-momentum-vss", *SMALL)
        assert code == 0
        names = {p.name for p in tmp_path.iterdir()}
        assert "fig3-static.fxlms.trajectory.csv" in names
        assert "fig3-static.fxlms.summary.json" in names
        assert "fig3-static.2gd-momentum-vss.trajectory.csv" in names
        assert "fig3-static.boundary.csv" in names
        assert "fig3-static.comparison.json" in names
        comparison = json.loads((tmp_path / "fig3-static.comparison.json").read_text())
        assert set(comparison["algorithms"]) == {"fxlms", "2gd-momentum-vss"}
        for entry in comparison["algorithms"].values():
            assert "steady_state_error_power" in entry
            assert "convergence_samples" in entry
        assert "predictions" in comparison
        np.testing.assert_allclose(comparison["predictions"]["w_opt"],
                                   [1.76, 1.25], atol=0.05)

    def test_unknown_preset(self, tmp_path, capsys):
        code = run_cli("run", "fig9-nonsense", "--output-dir", str(tmp_path))
        assert code == 2
        assert "unknown preset" in capsys.readouterr().err

    def test_unknown_override_key(self, tmp_path, capsys):
        code = run_cli("run", "fig3-static", "--output-dir", str(tmp_path),
                       "--set", "bogus.key=1")
        assert code == 2
        assert "bogus.key" in capsys.readouterr().err

    def test_unknown_algorithm(self, tmp_path):
        assert run_cli("run", "fig3-static", "--output-dir", str(tmp_path),
                       "--algorithms", "rls") == 2

    def test_invalid_config_file_names_invariant(self, tmp_path, capsys):
        cfg = harness.scenario_to_dict(build_preset("fig3-static"))
        cfg["algorithm"]["rho_sq"] = -1.0
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(cfg))
        code = run_cli("run", "custom", "--config", str(bad),
                       "--output-dir", str(tmp_path))
        assert code == 2
        assert "rho_sq" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert run_cli("run", "custom", "--config",
                       str(tmp_path / "nope.json")) == 2

    def test_divergent_config_exits_3(self, tmp_path):
        code = run_cli("run", "fig3-static", "--output-dir", str(tmp_path),
                       "--algorithms", "fxlms", "--set", "n_samples=20000",
                       "--set", "algorithm.mu1_initial=5.0",
                       "--set", "algorithm.mu_min=0.5")
        assert code == 3
        summary = json.loads(
            (tmp_path / "fig3-static.fxlms.summary.json").read_text())
        assert summary["status"] == "diverged"

    def test_deterministic_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            assert run_cli("run", "fig3-static", "--output-dir",
                           str(tmp_path / sub), "--algorithms",
                           "2gd-momentum-vss", *SMALL) == 0
        name = "fig3-static.2gd-momentum-vss.trajectory.csv"
        assert (tmp_path / "a" / name).read_bytes() == \
               (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_output(self, tmp_path):
        for sub, seed in (("a", "1"), ("b", "2")):
            assert run_cli("run", "fig3-static", "--output-dir",
                           str(tmp_path / sub), "--algorithms", "fxlms",
                           "--seed", seed, *SMALL) == 0
        name = "fig3-static.fxlms.trajectory.csv"
        assert (tmp_path / "a" / name).read_bytes() != \
               (tmp_path / "b" / name).read_bytes()

    def test_fig2_subset_writes_psd_csv(self, tmp_path):
        code = run_cli("run", "fig2-saturation", "--output-dir", str(tmp_path),
                       "--algorithms", "fxlms", "--set", "n_samples=40000")
        assert code == 0
        psd = (tmp_path / "fig2-saturation.psd.csv").read_text().splitlines()
        assert psd[0] == "frequency_hz,disturbance_db,fxlms_db"
        assert len(psd) > 100
        comparison = json.loads(
            (tmp_path / "fig2-saturation.comparison.json").read_text())
        assert comparison["psd_file"] == "fig2-saturation.psd.csv"
        assert "band_metrics" in comparison["algorithms"]["fxlms"]

    def test_unwritable_output_dir_exits_4(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        code = run_cli("run", "fig3-static", "--output-dir",
                       str(blocker / "nested"), "--algorithms", "fxlms",
                       *SMALL)
        assert code == 4

    def test_varying_preset_writes_second_boundary(self, tmp_path):
        code = run_cli("run", "fig5-varying", "--output-dir", str(tmp_path),
                       "--algorithms", "fxlms",
                       "--set", "n_samples=160000",
                       "--set", "record_stride=64")
        assert code == 0
        names = {p.name for p in tmp_path.iterdir()}
        assert "fig5-varying.boundary.csv" in names
        assert "fig5-varying.boundary2.csv" in names


class TestAnalyze:
    def test_two_weight_report(self, tmp_path, capsys):
        code = run_cli("analyze", "fig3-static", "--output-dir", str(tmp_path))
        assert code == 0
        report = json.loads(
            (tmp_path / "fig3-static.analysis.json").read_text())
        np.testing.assert_allclose(report["w_opt"], [1.76, 1.25], atol=0.05)
        np.testing.assert_allclose(report["w_subopt_derived"], [0.89, 0.66],
                                   atol=0.05)
        assert report["mu1_within_bound"] is True
        assert report["flags"] == []
        out = capsys.readouterr().out
        assert "w_opt" in out and "lambda_max" in out

    def test_kappa_zero_bound(self, tmp_path):
        code = run_cli("analyze", "fig3-static", "--output-dir", str(tmp_path),
                       "--set", "algorithm.kappa=0")
        assert code == 0
        report = json.loads(
            (tmp_path / "fig3-static.analysis.json").read_text())
        assert report["mu1_bound"] == pytest.approx(
            1.0 / report["lambda_max"])

    def test_unstable_configuration_flagged(self, tmp_path):
        code = run_cli("analyze", "fig3-static", "--output-dir", str(tmp_path),
                       "--set", "algorithm.mu1_initial=5.0",
                       "--set", "algorithm.mu_min=0.5")
        assert code == 0
        report = json.loads(
            (tmp_path / "fig3-static.analysis.json").read_text())
        assert "unstable-configuration" in report["flags"]


class TestSweep:
    def test_single_value_matches_run(self, tmp_path):
        assert run_cli("sweep", "fig3-static", "--output-dir", str(tmp_path),
                       "--parameter", "kappa", "--values", "0.5",
                       "--algorithm", "2gd-momentum-vss", *SMALL) == 0
        sweep_rows = (tmp_path / "fig3-static.sweep.kappa.csv").read_text().splitlines()
        assert sweep_rows[0].startswith("kappa,")
        value, power, conv, violations, status = sweep_rows[1].split(",")

        assert run_cli("run", "fig3-static", "--output-dir", str(tmp_path),
                       "--algorithms", "2gd-momentum-vss",
                       "--set", "algorithm.kappa=0.5", *SMALL) == 0
        summary = json.loads((tmp_path / "fig3-static.2gd-momentum-vss.summary.json").read_text())
        assert float(power) == pytest.approx(summary["steady_state_error_power"])
        assert int(conv) == summary["convergence_samples"]
        assert int(violations) == summary["violations"]

    def test_rejects_bad_values(self, tmp_path):
        assert run_cli("sweep", "fig3-static", "--output-dir", str(tmp_path),
                       "--parameter", "kappa", "--values", "a,b") == 2

    def test_unknown_parameter_rejected(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli("sweep", "fig3-static", "--output-dir", str(tmp_path),
                    "--parameter", "leakage", "--values", "0.1")
        assert exc.value.code == 2
