"""Tests for experiment configs, the sweep runner and solver validation."""

import json
import math
import time

import numpy as np
import pandas as pd
import pytest

from uepopt.core.errors import ConfigError, DomainError
from uepopt.core.importance import normalize, synthetic_profile
from uepopt.core.matching import ChannelState
from uepopt.core.solver import ResourceBudget, Strategy, solve_ophd
from uepopt.harness.config import config_from_dict, load_config
from uepopt.harness.runner import (
    RESULT_COLUMNS,
    run_experiment,
    run_trials,
    sample_channel,
    write_results,
)
from uepopt.harness.validation import (
    ValidationSettings,
    kkt_residual,
    matching_gap,
    validate,
)


def small_config(**overrides):
    data = {
        "n_features": 4,
        "gamma_avg_db": [0.0],
        "p_max": [1.0],
        "m_min": [4.0],
        "strategies": ["JCFMP"],
        "trials": 3,
        "seed": 11,
    }
    data.update(overrides)
    return config_from_dict(data)


def test_sample_channel_db_range():
    ch = sample_channel(5.0, 3.0, 200, seed=1)
    db = 10 * np.log10(ch.as_array())
    assert db.min() >= 2.0 and db.max() <= 8.0
    assert sample_channel(5.0, 3.0, 200, seed=1) == ch


def test_sample_channel_linear_and_errors():
    ch = sample_channel(0.0, 10.0, 100, seed=2, domain="linear")
    assert ch.as_array().min() >= 0.1 and ch.as_array().max() <= 10.0
    with pytest.raises(DomainError):
        sample_channel(0.0, -1.0, 4, seed=0)
    with pytest.raises(DomainError):
        sample_channel(0.0, 1.0, 4, seed=0, domain="log")


def test_grid_order():
    cfg = small_config(gamma_avg_db=[-5.0, 5.0], p_max=[1.0, 2.0], m_min=[2.0])
    assert cfg.grid == [(-5.0, 1.0, 2.0), (-5.0, 2.0, 2.0), (5.0, 1.0, 2.0), (5.0, 2.0, 2.0)]


def test_strategy_names_are_parsed():
    cfg = small_config(strategies=["jcfmp", "jcfp-w"])
    assert cfg.strategies == [Strategy.JCFMP, Strategy.JCFP_W]


def test_config_errors_name_fields():
    with pytest.raises(ConfigError) as excinfo:
        small_config(trails=3)
    assert "trails" in excinfo.value.fields
    with pytest.raises(ConfigError) as excinfo:
        small_config(m_min=[8.0])
    assert "m_min" in excinfo.value.fields
    with pytest.raises(ConfigError):
        small_config(weights={"kind": "isfr_geometric", "file": "w.txt"})
    with pytest.raises(ConfigError):
        small_config(strategies=["SIMPLEX"])


def test_load_config_toml_resolves_paths(tmp_path):
    (tmp_path / "weights.txt").write_text("4\n3\n2\n1\n", encoding="utf-8")
    config = tmp_path / "sweep.toml"
    config.write_text(
        "\n".join(
            [
                "n_features = 4",
                "gamma_avg_db = [0.0, 10.0]",
                "p_max = [2.0]",
                "m_min = [4.0]",
                'output = "out/results.csv"',
                "[weights]",
                'file = "weights.txt"',
            ]
        ),
        encoding="utf-8",
    )
    cfg = load_config(config)
    assert cfg.output == str(tmp_path / "out" / "results.csv")
    assert cfg.weights.resolve(4).weights == pytest.approx((0.4, 0.3, 0.2, 0.1))
    with pytest.raises(ConfigError):
        cfg.weights.resolve(5)


def test_load_config_json_and_bad_files(tmp_path):
    path = tmp_path / "sweep.json"
    path.write_text(
        json.dumps({"gamma_avg_db": [0], "p_max": [1], "m_min": [2], "trials": 2}),
        encoding="utf-8",
    )
    assert load_config(path).trials == 2
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    other = tmp_path / "sweep.yaml"
    other.write_text("trials: 2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(other)
    broken = tmp_path / "broken.toml"
    broken.write_text("trials = [\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(broken)


def test_single_point_baseline_row():
    table = run_experiment(small_config(strategies=["EEP"]))
    assert list(table.columns) == RESULT_COLUMNS
    assert len(table) == 1
    row = table.iloc[0]
    assert row["strategy"] == "EEP"
    assert row["trials"] == 3
    assert row["mean_k"] == 4
    assert row["stderr_j"] == pytest.approx(row["std_j"] / np.sqrt(3))
    assert pd.isna(row["mean_j_empirical"])


def test_rows_follow_grid_then_strategy_order():
    cfg = small_config(gamma_avg_db=[-5.0, 5.0], strategies=["EEP", "JCFMP", "CA"], trials=2)
    table = run_experiment(cfg)
    assert list(table["strategy"]) == ["EEP", "JCFMP", "CA"] * 2
    assert list(table["gamma_avg_db"]) == [-5.0] * 3 + [5.0] * 3


def test_sweep_is_reproducible():
    cfg = small_config(strategies=["JCFMP", "JCFP_W"], gamma_avg_db=[-5.0, 5.0])
    pd.testing.assert_frame_equal(run_experiment(cfg), run_experiment(cfg))


def test_trials_share_channels_across_strategies_and_budgets():
    cfg = small_config(
        strategies=["JCFMP", "JCMP"], p_max=[1.0, 2.0], trials=4, early_stop=False
    )
    trials = run_trials(cfg)
    by_key = trials.set_index(["point", "trial", "strategy"])["j"]
    for t in range(4):
        for point in (0, 1):
            assert by_key[(point, t, "JCFMP")] <= by_key[(point, t, "JCMP")] * (1 + 1e-12)
        assert by_key[(1, t, "JCFMP")] <= by_key[(0, t, "JCFMP")] * (1 + 1e-9)


def test_empirical_column_filled_when_simulating():
    table = run_experiment(small_config(trials=2, empirical_bits=200, gamma_avg_db=[10.0]))
    assert table.iloc[0]["mean_j_empirical"] >= 0.0


@pytest.mark.slow
def test_worker_count_does_not_change_results():
    cfg = small_config(gamma_avg_db=[-5.0, 0.0, 5.0], strategies=["JCFMP", "CA"], trials=4)
    parallel = cfg.model_copy(update={"workers": 2})
    pd.testing.assert_frame_equal(run_experiment(cfg), run_experiment(parallel))


def test_write_results(tmp_path):
    table = run_experiment(small_config(trials=2))
    path = write_results(table, tmp_path / "nested" / "results.csv", json_mirror=True)
    assert path.exists()
    assert path.read_text(encoding="utf-8").splitlines()[0] == ",".join(RESULT_COLUMNS)
    records = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    assert records[0]["strategy"] == "JCFMP"


def test_validation_on_small_instances():
    settings = ValidationSettings(instances=20, n_features=4, check_every=2)
    report = validate(settings)
    assert report.instances == 20
    assert report.match_rate >= 0.99
    assert report.budget_residual_max <= 1e-5
    assert report.mean_candidates_oracle > report.mean_candidates_ophd
    assert report.shortcut_instances == 10
    assert report.no_early_stop_max_gap >= -1e-12
    assert report.early_stop_mean_gap >= 0.0
    assert report.pruning_instances == 10
    assert 0.0 <= report.pruning_soundness_rate <= 1.0
    assert report.pruning_max_gap >= -1e-12
    # every even instance draws ordered weights, so the subset search runs on all of them
    assert report.prefix_subset_instances == 10
    assert 0.0 <= report.prefix_violation_rate <= 1.0
    assert report.prefix_subset_max_gain >= -1e-12
    assert report.matching_instances == 0
    assert report.matching_gap_mean is None


def test_validation_reports_measured_shortcut_violations():
    # low SNR with a tight budget is where prefix-only subsets and pruning fail
    settings = ValidationSettings(
        instances=40, n_features=4, gamma_avg_db=[-10.0], p_max=[0.4], check_every=1
    )
    report = validate(settings)
    assert report.pruning_instances == 40
    losses = round((1 - report.pruning_soundness_rate) * 40)
    assert (losses > 0) == (report.pruning_max_gap > 1e-9)
    violations = round(report.prefix_violation_rate * report.prefix_subset_instances)
    assert (violations > 0) == (report.prefix_subset_max_gain > 1e-9)


def test_shortcut_checks_can_be_turned_off():
    report = validate(ValidationSettings(instances=3, n_features=3, check_every=0))
    assert report.shortcut_instances == 0
    assert report.pruning_soundness_rate is None
    assert report.prefix_violation_rate is None
    assert report.no_early_stop_max_gap is None


def test_validation_matching_gap():
    settings = ValidationSettings(instances=4, n_features=3, check_every=0, matching_every=2)
    report = validate(settings)
    assert report.matching_instances == 2
    assert report.matching_gap_max >= report.matching_gap_mean >= 0.0


def test_matching_gap_vanishes_on_equal_channels():
    w = synthetic_profile("isfr_paper_like", 4, seed=2)
    ch = ChannelState.from_values([2.0] * 4)
    assert matching_gap(w, ch, ResourceBudget(p_max=1.0, m_min=4.0)) == pytest.approx(0.0)


def test_matching_gap_size_guard():
    w = synthetic_profile("isfr_paper_like", 7, seed=2)
    with pytest.raises(DomainError):
        matching_gap(w, ChannelState.from_values([1.0] * 7), ResourceBudget(1.0, 4.0))


def test_validation_workers_do_not_change_report():
    settings = ValidationSettings(instances=6, n_features=3, check_every=3)
    parallel = settings.model_copy(update={"workers": 2})
    assert validate(settings) == validate(parallel)


def test_kkt_residual_finite_at_high_snr():
    w = normalize([3, 2, 1])
    ch = ChannelState.from_values([1e5, 1e5, 1e5])
    plan, _ = solve_ophd(w, ch, ResourceBudget(p_max=4.0, m_min=2.0))
    residual = kkt_residual(plan, w.as_array())
    assert math.isfinite(residual)
    assert residual <= 1e-4


@pytest.mark.slow
def test_default_validation_runs_within_two_minutes():
    start = time.perf_counter()
    report = validate(ValidationSettings())
    elapsed = time.perf_counter() - start
    assert report.instances == 1000
    assert report.match_rate >= 0.99
    assert report.mean_gap <= 1e-3
    assert elapsed < 120.0


def test_validation_size_guard():
    with pytest.raises(DomainError):
        validate(ValidationSettings(instances=1, n_features=7))
