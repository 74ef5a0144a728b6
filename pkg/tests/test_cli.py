"""End-to-end CLI checks: artifacts, determinism, exit codes."""

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from misinfosim.cli import main
from misinfosim.game import EquilibriumResult


@pytest.fixture()
def runner():
    return CliRunner()


def _text(result) -> str:
    try:
        err = result.stderr
    except (ValueError, AttributeError):
        err = ""
    return result.output + err


def _write_json(path: Path, payload: dict) -> str:
    path.write_text(json.dumps(payload))
    return str(path)


def _tiny_cfg(tmp_path: Path, **extra) -> str:
    payload = {"n_individuals": 8, "n_sources": 10, "horizon_T": 3, "seed": 5}
    payload.update(extra)
    return _write_json(tmp_path / "config.json", payload)


def _profile_file(tmp_path: Path) -> str:
    payload = {
        "hi": [1.0, 0.9],
        "mid": [0.7, 0.3],
        "lo": [0.1, 0.0],
    }
    return _write_json(tmp_path / "profiles.json", payload)


def _read_rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestSimulate:
    def test_writes_expected_artifacts(self, runner, tmp_path):
        cfg = _tiny_cfg(tmp_path)
        out = tmp_path / "sim"
        result = runner.invoke(
            main, ["simulate", "--config", cfg, "--profiles", "P2,P4", "--out", str(out)]
        )
        assert result.exit_code == 0, _text(result)
        for name in (
            "trajectory.csv",
            "histogram_over_time.csv",
            "metrics.json",
            "opinion_heatmap.png",
            "manifest.json",
        ):
            assert (out / name).is_file(), name
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["root_seed"] == 5
        assert sorted(manifest["artifacts"]) == [
            "histogram_over_time.csv",
            "metrics.json",
            "opinion_heatmap.png",
            "trajectory.csv",
        ]
        assert "manifest.json" not in manifest["artifacts"]
        assert manifest["duration_seconds"] > 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["profile_L"] == "P2"
        assert metrics["profile_R"] == "P4"
        assert "bimodality" in metrics and "config_digest" in metrics

    def test_trajectory_layout(self, runner, tmp_path):
        cfg = _tiny_cfg(tmp_path)
        out = tmp_path / "sim"
        result = runner.invoke(main, ["simulate", "--config", cfg, "--out", str(out)])
        assert result.exit_code == 0, _text(result)
        rows = _read_rows(out / "trajectory.csv")
        assert len(rows) == 4 * (8 + 10)  # (T+1) * (individuals + sources)
        individuals = [r for r in rows if r["series"] == "individual"]
        sources = [r for r in rows if r["series"] == "source"]
        assert all(r["credibility"] == "" and r["action"] == "" for r in individuals)
        assert all(r["susceptibility"] == "" for r in sources)
        final = [r for r in sources if r["t"] == "3"]
        assert final and all(r["action"] == "" for r in final)  # no action after the last step
        live = [r for r in sources if r["t"] != "3"]
        assert all(r["action"] in ("0", "1") for r in live)

    def test_histogram_densities_integrate_to_one(self, runner, tmp_path):
        cfg = _tiny_cfg(tmp_path)
        out = tmp_path / "sim"
        result = runner.invoke(main, ["simulate", "--config", cfg, "--out", str(out)])
        assert result.exit_code == 0, _text(result)
        rows = _read_rows(out / "histogram_over_time.csv")
        by_t = {}
        for row in rows:
            by_t.setdefault(row["t"], []).append(float(row["density"]))
        width = 2.0 / 20  # default domain and bin count
        for t, densities in by_t.items():
            assert len(densities) == 20
            assert sum(densities) * width == pytest.approx(1.0, abs=1e-9), t

    def test_seed_override_and_rerun_determinism(self, runner, tmp_path):
        cfg = _tiny_cfg(tmp_path)
        out_a, out_b, out_c = (tmp_path / n for n in ("a", "b", "c"))
        for out in (out_a, out_b):
            result = runner.invoke(
                main, ["simulate", "--config", cfg, "--seed", "9", "--out", str(out)]
            )
            assert result.exit_code == 0, _text(result)
        result = runner.invoke(main, ["simulate", "--config", cfg, "--out", str(out_c)])
        assert result.exit_code == 0, _text(result)
        same = (out_a / "trajectory.csv").read_bytes()
        assert same == (out_b / "trajectory.csv").read_bytes()
        assert same != (out_c / "trajectory.csv").read_bytes()

    def test_curve_csv_input(self, runner, tmp_path):
        curve = tmp_path / "curve.csv"
        curve.write_text("bias,credibility\n-1.0,0.2\n0.0,1.0\n1.0,0.4\n")
        cfg = _tiny_cfg(tmp_path)
        out = tmp_path / "sim"
        result = runner.invoke(
            main, ["simulate", "--config", cfg, "--curve-csv", str(curve), "--out", str(out)]
        )
        assert result.exit_code == 0, _text(result)

    def test_curve_csv_missing_columns_is_usage_error(self, runner, tmp_path):
        curve = tmp_path / "curve.csv"
        curve.write_text("bias,trust\n0.0,1.0\n")
        result = runner.invoke(
            main, ["simulate", "--config", _tiny_cfg(tmp_path), "--curve-csv", str(curve)]
        )
        assert result.exit_code == 2
        assert "credibility" in _text(result)

    def test_unknown_profile_is_usage_error(self, runner, tmp_path):
        result = runner.invoke(
            main, ["simulate", "--config", _tiny_cfg(tmp_path), "--profiles", "P1,NOPE"]
        )
        assert result.exit_code == 2
        assert "unknown profile" in _text(result)

    def test_profile_length_mismatch_is_usage_error(self, runner, tmp_path):
        cfg = _tiny_cfg(tmp_path, n_sources=4)
        result = runner.invoke(main, ["simulate", "--config", cfg, "--profiles", "P1,P1"])
        assert result.exit_code == 2
        assert "covers" in _text(result)

    def test_invalid_config_is_usage_error(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        result = runner.invoke(main, ["simulate", "--config", str(bad)])
        assert result.exit_code == 2
        unknown = _write_json(tmp_path / "unknown.json", {"population": 5})
        result = runner.invoke(main, ["simulate", "--config", unknown])
        assert result.exit_code == 2


class TestPayoffAndSolve:
    def _payoff(self, runner, tmp_path, out_name, extra_args=()):
        cfg = _tiny_cfg(tmp_path, n_sources=4, n_rollouts=3)
        profs = _profile_file(tmp_path)
        out = tmp_path / out_name
        result = runner.invoke(
            main,
            ["payoff", "--config", cfg, "--profiles", profs, "--out", str(out), *extra_args],
        )
        assert result.exit_code == 0, _text(result)
        return out

    def test_payoff_artifacts(self, runner, tmp_path):
        out = self._payoff(runner, tmp_path, "pay")
        for name in (
            "payoff_values.csv",
            "payoff_std_errors.csv",
            "payoff_metadata.json",
            "payoff_heatmap.png",
            "manifest.json",
        ):
            assert (out / name).is_file(), name
        rows = _read_rows(out / "payoff_values.csv")
        assert [r["profile"] for r in rows] == ["hi", "mid", "lo"]
        meta = json.loads((out / "payoff_metadata.json").read_text())
        assert meta["n_rollouts"] == 3  # picked up from the config file
        assert meta["antisymmetry"] is not None
        assert set(meta["profiles"]) == {"hi", "mid", "lo"}

    def test_payoff_byte_identical_across_reruns_and_workers(self, runner, tmp_path):
        out_a = self._payoff(runner, tmp_path, "pay-a")
        out_b = self._payoff(runner, tmp_path, "pay-b")
        out_c = self._payoff(runner, tmp_path, "pay-c", extra_args=("--workers", "2"))
        for name in ("payoff_values.csv", "payoff_std_errors.csv"):
            reference = (out_a / name).read_bytes()
            assert reference == (out_b / name).read_bytes(), name
            assert reference == (out_c / name).read_bytes(), name

    def test_solve_roundtrip_and_overwrite_guard(self, runner, tmp_path):
        pay = self._payoff(runner, tmp_path, "pay")
        out = tmp_path / "eq"
        result = runner.invoke(main, ["solve", str(pay), "--out", str(out)])
        assert result.exit_code == 0, _text(result)
        record = json.loads((out / "equilibrium.json").read_text())
        assert record["profiles"] == ["hi", "mid", "lo"]
        assert record["residual"] <= 1e-6
        assert sum(record["mu"]) == pytest.approx(1.0, abs=1e-9)
        assert record["entropy_mu"] >= 0.0
        assert (out / "equilibrium_bars.png").is_file()
        again = runner.invoke(main, ["solve", str(pay), "--out", str(out)])
        assert again.exit_code == 2
        assert "--force" in _text(again)
        forced = runner.invoke(main, ["solve", str(pay), "--out", str(out), "--force"])
        assert forced.exit_code == 0, _text(forced)

    def test_solve_handcrafted_zero_matrix_gives_uniform(self, runner, tmp_path):
        csv_path = tmp_path / "values.csv"
        csv_path.write_text("profile,a,b\na,0.0,0.0\nb,0.0,0.0\n")
        out = tmp_path / "eq"
        result = runner.invoke(main, ["solve", str(csv_path), "--out", str(out)])
        assert result.exit_code == 0, _text(result)
        record = json.loads((out / "equilibrium.json").read_text())
        assert record["mu"] == pytest.approx([0.5, 0.5], abs=1e-9)
        assert record["entropy_nu"] == pytest.approx(math.log(2), abs=1e-9)

    def test_solve_rejects_malformed_input(self, runner, tmp_path):
        wrong_header = tmp_path / "bad1.csv"
        wrong_header.write_text("name,a,b\na,0,0\nb,0,0\n")
        result = runner.invoke(main, ["solve", str(wrong_header)])
        assert result.exit_code == 2
        not_square = tmp_path / "bad2.csv"
        not_square.write_text("profile,a,b\na,0.0,0.0\n")
        result = runner.invoke(main, ["solve", str(not_square)])
        assert result.exit_code == 2
        assert "square" in _text(result)

    def test_solve_rejects_bad_tau(self, runner, tmp_path):
        csv_path = tmp_path / "values.csv"
        csv_path.write_text("profile,a,b\na,0.0,0.0\nb,0.0,0.0\n")
        result = runner.invoke(main, ["solve", str(csv_path), "--tau-l", "0"])
        assert result.exit_code == 2

    def test_solve_nonconvergence_exits_3(self, runner, tmp_path, monkeypatch):
        def fake_solve(matrix, solver, init=None):
            return EquilibriumResult(
                mu=np.array([0.5, 0.5]),
                nu=np.array([0.5, 0.5]),
                value=0.0,
                residual=1.0,
                iterations=99,
                converged=False,
            )

        monkeypatch.setattr("misinfosim.cli.qre_solve", fake_solve)
        csv_path = tmp_path / "values.csv"
        csv_path.write_text("profile,a,b\na,0.0,0.0\nb,0.0,0.0\n")
        result = runner.invoke(main, ["solve", str(csv_path), "--out", str(tmp_path / "eq")])
        assert result.exit_code == 3
        assert "did not converge" in _text(result)


class TestDeviate:
    def test_artifacts_and_content(self, runner, tmp_path):
        cfg = _tiny_cfg(tmp_path, n_rollouts=2, n_replications=2)
        out = tmp_path / "dev"
        result = runner.invoke(main, ["deviate", "--config", cfg, "--out", str(out)])
        assert result.exit_code == 0, _text(result)
        record = json.loads((out / "deviation_report.json").read_text())
        assert record["forced_name"] == "P5"
        assert "replications" not in record  # samples live in the CSV instead
        assert len(record["response"]) == 9
        rows = _read_rows(out / "deviation_samples.csv")
        assert len(rows) == 2 * 8  # replications * individuals
        assert set(r["replication"] for r in rows) == {"0", "1"}
        assert all(r["response_profile"].startswith("P") for r in rows)
        assert (out / "deviation_response.png").is_file()
        manifest = json.loads((out / "manifest.json").read_text())
        assert "deviation_samples.csv" in manifest["artifacts"]

    def test_unknown_forced_profile(self, runner, tmp_path):
        cfg = _tiny_cfg(tmp_path)
        result = runner.invoke(main, ["deviate", "--config", cfg, "--profiles", "Q1"])
        assert result.exit_code == 2
        assert "unknown profile" in _text(result)


class TestSweep:
    def test_one_axis_sweep_end_to_end(self, runner, tmp_path):
        spec = _write_json(
            tmp_path / "spec.json",
            {
                "axes": {"eta": [0.0, 1.0]},
                "config": {"n_individuals": 6, "n_sources": 10, "horizon_T": 3, "seed": 3},
                "payoff_rollouts": 2,
                "replications": 2,
            },
        )
        out = tmp_path / "sw"
        result = runner.invoke(main, ["sweep", spec, "--out", str(out)])
        assert result.exit_code == 0, _text(result)
        rows = _read_rows(out / "sweep_results.csv")
        assert len(rows) == 2
        assert rows[0]["cell"] == "0" and rows[1]["cell"] == "1"
        assert {row["eta"] for row in rows} == {"0.0", "1.0"}
        assert all(row["phase"] in ("phase-1", "phase-2") for row in rows)
        assert (out / "cells" / "cell_000.json").is_file()
        assert (out / "cells" / "cell_001.json").is_file()
        assert (out / "sweep_metrics.png").is_file()
        manifest = json.loads((out / "manifest.json").read_text())
        assert "cells/cell_001.json" in manifest["artifacts"]
        cell = json.loads((out / "cells" / "cell_000.json").read_text())
        assert cell["params"] == {"eta": 0.0}
        assert len(cell["mu"]) == 9

    def test_rejects_bad_specs(self, runner, tmp_path):
        bad_json = tmp_path / "bad.json"
        bad_json.write_text("[1, 2")
        assert runner.invoke(main, ["sweep", str(bad_json)]).exit_code == 2
        unknown_axes = _write_json(tmp_path / "s1.json", {"axes": "eta_vs_world"})
        result = runner.invoke(main, ["sweep", unknown_axes])
        assert result.exit_code == 2
        assert "unknown axes" in _text(result)
        empty_axis = _write_json(tmp_path / "s2.json", {"axes": {"eta": []}})
        assert runner.invoke(main, ["sweep", empty_axis]).exit_code == 2
        bad_config = _write_json(
            tmp_path / "s3.json", {"axes": {"eta": [0.0]}, "config": {"n_individuals": -4}}
        )
        assert runner.invoke(main, ["sweep", bad_config]).exit_code == 2

    def test_all_cells_failing_exits_3(self, runner, tmp_path):
        spec = _write_json(
            tmp_path / "spec.json",
            {
                "axes": {"tau": [0.0]},
                "config": {"n_individuals": 6, "n_sources": 10, "horizon_T": 2, "seed": 1},
                "payoff_rollouts": 2,
                "replications": 2,
            },
        )
        result = runner.invoke(main, ["sweep", spec, "--out", str(tmp_path / "sw")])
        assert result.exit_code == 3
        assert "every cell failed" in _text(result)


def test_version_flag(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert "misinfosim" in result.output
