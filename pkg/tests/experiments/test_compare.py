"""Tests for the experiment drivers and the command line."""

import json
import math
from pathlib import Path

import numpy as np
import pytest
import yaml

from lineage_lab.cli import main
from lineage_lab.experiments import (
    check_rows,
    config_observables,
    run_compare,
    run_estimate_mean,
    run_lineage_check,
    run_simulate,
    run_solve,
    summarize_exponents,
    window_sup,
)
from lineage_lab.parsers import ConfigError, ExperimentConfig, load_config
from lineage_lab.scenario.builtins import constant_supercritical
from lineage_lab.simulation import initial_profile
from lineage_lab.solvers import ValueField
from lineage_lab.utils.constants import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_STATISTICAL_FAILURE
from lineage_lab.utils.sentinel import NEG_INF

CONFIGS = Path(__file__).parents[2] / "configs"


def small_settings(out, **changes):
    settings = {
        "grid": {"T": 1.0, "dt": 0.05, "dx": 0.05, "domain": [-3.0, 3.0]},
        "simulation": {"K": [50, 100], "t": 1.0, "replicas": 4, "seed": 3},
        "estimation": {"n_spines": 50},
        "observables": {"windows": [{"x": 0.0, "delta": 0.5}]},
        "output": {"directory": str(out)},
    }
    for section, values in changes.items():
        settings[section] = {**settings.get(section, {}), **values}
    return settings


def small_config(out, **changes) -> ExperimentConfig:
    return ExperimentConfig.model_validate(small_settings(out, **changes))


def write_yaml(tmp_path, settings, name="config.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(settings))
    return path


def test_summarize_exponents():
    summary = summarize_exponents([0, 100, 10], 100)
    assert summary.usable == 3
    assert summary.zero_fraction == pytest.approx(1 / 3)
    assert summary.mean == pytest.approx(0.75)
    assert summary.max == pytest.approx(1.0)
    assert summary.sd == pytest.approx(math.sqrt(0.125))
    extinct = summarize_exponents([0, 0], 100, capped=1)
    assert extinct.mean is NEG_INF
    assert extinct.zero_fraction == 1.0
    assert extinct.capped == 1


def test_window_sup_skips_masked_cells():
    values = np.array([[0.0, 1.0, 2.0, 3.0], [0.0, 1.5, np.nan, 0.5]])
    field = ValueField.from_values(values, [0.0, 1.0], [0.0, 1.0, 2.0, 3.0])
    assert window_sup(field, 1.0, 0.0, 1.0) == pytest.approx(1.5)
    assert window_sup(field, 1.0, 2.5, 9.0) == pytest.approx(0.5)
    assert window_sup(field, 1.0, 5.0, 6.0) is NEG_INF
    assert window_sup(field, 1.0, 1.5, 2.0) is NEG_INF


def test_observables_list_windows_then_tubes(tmp_path):
    config = small_config(tmp_path, observables={"tubes": [{"eps": 0.3, "constant": 0.2}]})
    window, tube = config_observables(config)
    assert (window.kind, window.x, window.radius) == ("window", 0.0, 0.5)
    assert (tube.kind, tube.x, tube.radius) == ("tube", 0.2, 0.3)
    assert tube.reference.t_end == pytest.approx(1.0)


def test_compare_holds_for_stay_put_window(tmp_path, workers_env):
    report = run_compare(small_config(tmp_path / "out"))
    assert report.exit_code == EXIT_OK, report.failures
    assert [row["K"] for row in report.rows] == [50.0, 100.0]
    top = report.rows[-1]
    assert top["u0_sup"] == pytest.approx(2.0, abs=0.05)
    assert top["U_sup"] >= top["u0_sup"] - 1e-12
    assert abs(top["gap"]) <= 0.35
    assert top["capped"] == 0
    assert not top["fk_degenerate"]
    summary = json.loads((tmp_path / "out" / "compare.json").read_text())
    assert summary["exit_code"] == EXIT_OK
    assert summary["failures"] == []
    assert set(summary["fields"]["constrained"]) == {"0.0", "0.02", "0.05"}
    header = (tmp_path / "out" / "compare.csv").read_text().splitlines()[0]
    assert header.startswith("K,t,observable,kind")


def test_compare_flags_a_tight_tolerance(tmp_path, workers_env):
    config = small_config(tmp_path / "out", acceptance={"exponent_tolerance": 0.01})
    report = run_compare(config)
    assert report.exit_code == EXIT_STATISTICAL_FAILURE
    assert any("gap to u_0" in failure for failure in report.failures)
    assert report.rows[-1]["holds"] is False


def test_compare_is_reproducible(tmp_path, workers_env):
    run_compare(small_config(tmp_path / "first"))
    run_compare(small_config(tmp_path / "second"))
    for name in ("compare.csv", "compare.json"):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


@pytest.mark.slow
def test_worker_count_does_not_change_results(tmp_path):
    run_compare(small_config(tmp_path / "serial"), workers=1)
    run_compare(small_config(tmp_path / "parallel"), workers=2)
    serial = (tmp_path / "serial" / "compare.csv").read_bytes()
    assert serial == (tmp_path / "parallel" / "compare.csv").read_bytes()


def test_horizon_beyond_solver_grid(tmp_path, workers_env):
    config = small_config(tmp_path, simulation={"t": 2.0})
    with pytest.raises(ConfigError):
        run_compare(config)


def test_lineage_check(tmp_path, workers_env):
    out = tmp_path / "out"
    report = run_lineage_check(small_config(out))
    assert report.exit_code == EXIT_OK, report.failures
    optimizer = report.optimizers["window(x=0,delta=0.5)"]
    assert np.max(np.abs(optimizer.values)) <= 0.05 + 1e-12
    assert len(report.histogram) == 2 * 20
    top = report.rows[-1]
    assert top["used"] + top["skipped"] == 4
    assert abs(top["exponent_diff"]) <= 0.2
    for name in ("lineage.csv", "lineage_histogram.csv", "lineage.json", "optimizer_0.csv"):
        assert (out / name).exists()


def test_simulate_writes_one_row_per_replica(tmp_path, workers_env):
    out = tmp_path / "out"
    config = small_config(out, output={"dump_ancestry": True})
    outcomes = run_simulate(config)
    assert [(o.K, o.replica) for o in outcomes] == [(K, r) for K in (50.0, 100.0) for r in range(4)]
    lines = (out / "simulate.csv").read_text().splitlines()
    assert len(lines) == 1 + 8
    assert lines[0].endswith("count:window(x=0,delta=0.5)")
    assert (out / "ancestry" / "ancestry_K50_r0.csv").exists()
    assert all(o.stats["births_clonal"] >= 0 for o in outcomes)


def test_replicas_of_different_k_use_different_streams(tmp_path, workers_env):
    config = small_config(tmp_path, simulation={"K": [100, 100.5]})
    outcomes = run_simulate(config)
    first = [o.initial for o in outcomes[:4]]
    second = [o.initial for o in outcomes[4:]]
    assert first != second


def test_estimate_mean(tmp_path):
    config = small_config(tmp_path / "out")
    rows = run_estimate_mean(config)
    assert [row["observable"] for row in rows] == ["total", "window(x=0,delta=0.5)"] * 2
    total = rows[2]
    mass = initial_profile(constant_supercritical(), 100).mass
    assert total["estimate"] == pytest.approx(100 * mass, rel=1e-9)
    assert rows[3]["estimate"] <= total["estimate"]
    assert (tmp_path / "out" / "estimate_mean.csv").exists()


def test_solve_writes_fields_and_profiles(tmp_path):
    out = tmp_path / "out"
    fields = run_solve(small_config(out))
    assert set(fields.constrained) == {0.0, 0.02, 0.05}
    for name in ("a0", "a0.02", "a0.05", "unconstrained"):
        assert (out / f"field_{name}.csv").exists()
        assert (out / f"field_{name}.json").exists()
    assert (out / "optimizer_a0_0.csv").exists()
    assert (out / "profile_unconstrained_0.csv").exists()
    rows = (out / "solve.csv").read_text().splitlines()
    assert len(rows) == 1 + 4
    residual = json.loads((out / "solve.json").read_text())["residual"]
    assert residual["max"] >= 0.0


def test_cli_without_command_prints_help(capsys):
    assert main([]) == EXIT_OK
    assert "lineage-lab" in capsys.readouterr().out


def test_cli_validate(tmp_path, capsys):
    assert main(["validate"]) == EXIT_OK
    assert "valid" in capsys.readouterr().out
    bad = write_yaml(tmp_path, {"simulation": {"K": [1]}})
    assert main(["validate", "--config", str(bad)]) == EXIT_CONFIG_ERROR


def test_cli_reports_violations(tmp_path, capsys):
    settings = {
        "scenario": {
            "birth": 1.0,
            "death": 0.5,
            "mutation_rate": 0.0,
            "beta0": {"kind": "tents", "tents": [[1.0, 1.0, 0.0]]},
            "bounds": {"b_bar": 1, "p_bar": 0.5, "p_low": 0.5, "r_bar": 1, "beta_bar": 1, "decay_alpha": 1},
            "domain": [-5, 5],
        }
    }
    assert main(["validate", "--config", str(write_yaml(tmp_path, settings))]) == EXIT_CONFIG_ERROR
    assert "Violation" in capsys.readouterr().out


def test_cli_compare_and_overrides(tmp_path, workers_env):
    config = write_yaml(tmp_path, small_settings(tmp_path / "ignored"))
    out = tmp_path / "cli"
    assert main(["compare", "--config", str(config), "--out", str(out), "--seed", "5"]) == EXIT_OK
    summary = json.loads((out / "compare.json").read_text())
    assert summary["config"]["simulation"]["seed"] == 5
    assert not (tmp_path / "ignored").exists()


def test_cli_simulate_dump_ancestry(tmp_path, workers_env):
    config = write_yaml(tmp_path, small_settings(tmp_path / "out", simulation={"K": [50], "replicas": 2}))
    assert main(["simulate", "--config", str(config), "--dump-ancestry"]) == EXIT_OK
    assert (tmp_path / "out" / "ancestry" / "ancestry_K50_r1.csv").exists()


def test_cli_grid_error_is_a_config_error(tmp_path):
    settings = small_settings(tmp_path / "out", grid={"dx": 0.07})
    assert main(["solve", "--config", str(write_yaml(tmp_path, settings))]) == EXIT_CONFIG_ERROR


def window_row(K, **changes):
    row = {
        "K": float(K),
        "observable": "window(x=0,delta=0.5)",
        "kind": "window",
        "capped": 0,
        "zero_fraction": 0.0,
        "exponent_mean": 1.8,
        "exponent_max": 1.9,
        "fk_log_estimate": 1.9,
        "fk_degenerate": False,
        "u0_sup": 2.0,
        "U_sup": 2.0,
        "gap": -0.2,
        "holds": True,
        "note": "",
    }
    row.update(changes)
    return row


def masked_row(K=1000, **changes):
    values = {
        "zero_fraction": 0.99,
        "exponent_mean": NEG_INF,
        "exponent_max": NEG_INF,
        "fk_log_estimate": 0.44,
        "u0_sup": NEG_INF,
        "U_sup": 0.8,
        "gap": None,
    }
    return window_row(K, **{**values, **changes})


def acceptance_config(**acceptance):
    return ExperimentConfig.model_validate({"acceptance": acceptance})


def test_check_rows_accepts_shrinking_gaps():
    rows = [window_row(100, exponent_mean=1.7, gap=-0.3), window_row(1000)]
    assert check_rows(rows, acceptance_config(gap_decreasing=True)) == []
    assert all(row["holds"] for row in rows)


def test_check_rows_flags_growing_gaps():
    rows = [window_row(100, gap=-0.1), window_row(1000)]
    failures = check_rows(rows, acceptance_config(gap_decreasing=True))
    assert len(failures) == 1 and "not decreasing" in failures[0]
    assert rows[-1]["holds"] is False
    assert check_rows([window_row(100, gap=-0.1), window_row(1000)], acceptance_config()) == []


def test_check_rows_bounds_largest_exponent_by_u0():
    rows = [window_row(100, exponent_max=2.4)]
    failures = check_rows(rows, acceptance_config())
    assert len(failures) == 1 and "largest exponent" in failures[0]
    assert check_rows([window_row(100, exponent_max=2.3)], acceptance_config()) == []


def test_check_rows_rejects_capped_rows():
    rows = [window_row(1000, capped=3)]
    failures = check_rows(rows, acceptance_config())
    assert failures == ["K=1000 window(x=0,delta=0.5): 3 capped replicas make the row unusable"]


def test_check_rows_masked_u0():
    config = acceptance_config(masked_u_min=0.2, masked_fk_min=0.1)
    assert check_rows([masked_row()], config) == []
    assert "extinct" in check_rows([masked_row(zero_fraction=0.9)], config)[0]
    assert "U=0.1" in check_rows([masked_row(U_sup=0.1)], config)[0]
    assert "U=-inf" in check_rows([masked_row(U_sup=NEG_INF)], config)[0]
    assert "spine estimate" in check_rows([masked_row(fk_log_estimate=0.05)], config)[0]
    assert "spine estimate" in check_rows([masked_row(fk_degenerate=True)], config)[0]
    # without thresholds only the extinction share is checked
    assert check_rows([masked_row(U_sup=0.1, fk_log_estimate=0.05)], acceptance_config()) == []


def test_check_rows_masked_u0_only_at_largest_k():
    rows = [masked_row(100, zero_fraction=0.5), masked_row(1000)]
    assert check_rows(rows, acceptance_config()) == []


@pytest.mark.slow
def test_shipped_constant_config_passes(tmp_path):
    config = load_config(CONFIGS / "constant.yaml").with_overrides(out=str(tmp_path))
    report = run_compare(config)
    assert report.exit_code == EXIT_OK, report.failures
    windows = [row for row in report.rows if row["kind"] == "window"]
    assert [row["K"] for row in windows] == [100.0, 300.0, 1000.0]
    gaps = [abs(row["gap"]) for row in windows]
    assert gaps == sorted(gaps, reverse=True)
    assert gaps[-1] <= 0.35
    assert all(row["capped"] == 0 for row in report.rows)


@pytest.mark.slow
def test_shipped_valley_config_masks_far_window(tmp_path):
    config = load_config(CONFIGS / "valley.yaml").with_overrides(out=str(tmp_path))
    report = run_compare(config)
    assert report.exit_code == EXIT_OK, report.failures
    (row,) = report.rows
    assert row["u0_sup"] is NEG_INF
    assert row["zero_fraction"] >= 0.95
    assert row["U_sup"] >= 0.2
    assert not row["fk_degenerate"]
    assert row["fk_log_estimate"] >= 0.1


@pytest.mark.slow
def test_shipped_constant_config_lineages_follow_optimizer(tmp_path):
    config = load_config(CONFIGS / "constant.yaml").with_overrides(out=str(tmp_path))
    report = run_lineage_check(config)
    assert report.exit_code == EXIT_OK, report.failures
    top = report.rows[-1]
    assert top["K"] == 1000.0
    assert abs(top["exponent_diff"]) <= 0.2


@pytest.mark.slow
def test_quadratic_lineages_concentrate_as_k_grows(tmp_path):
    config = small_config(
        tmp_path / "out",
        scenario={"builtin": "quadratic"},
        simulation={"K": [100, 1000], "replicas": 10},
    )
    report = run_lineage_check(config)
    near, far = report.rows[0], report.rows[-1]
    assert (near["K"], far["K"]) == (100.0, 1000.0)
    assert far["median_distance"] < near["median_distance"]
