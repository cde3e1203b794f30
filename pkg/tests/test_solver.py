"""Tests for the hierarchical solver, the exhaustive oracle and the baselines."""

import math

import numpy as np
import pytest

from uepopt.core.ber_model import coefficients
from uepopt.core.errors import DomainError
from uepopt.core.importance import ImportanceProfile, normalize, synthetic_profile
from uepopt.core.matching import ChannelState, greedy_match
from uepopt.core.solver import (
    BASELINES,
    AllocationPlan,
    ResourceBudget,
    SolveOptions,
    Strategy,
    audit_constraints,
    exhaustive_oracle,
    objective,
    solve,
    solve_baseline,
    solve_ophd,
)


def reference_distortion(w, plan, d_t):
    """Term-by-term re-evaluation with math.erfc and math.fsum."""
    terms = []
    for rank, feature in enumerate(plan.retained):
        cf = coefficients(plan.orders[rank])
        x = math.sqrt(cf.d * plan.powers[rank] * plan.gamma_of(feature))
        terms.append(w.weights[feature] * (cf.a * math.erfc(x) + cf.b * math.erfc(3 * x)))
    terms.extend(w.weights[f] * d_t for f in plan.discarded)
    return math.fsum(terms)


def relative_gap(value, reference):
    return (value - reference) / reference


def test_budget_validation():
    with pytest.raises(DomainError):
        ResourceBudget(p_max=0.0, m_min=4)
    with pytest.raises(DomainError):
        ResourceBudget(p_max=1.0, m_min=7)
    with pytest.raises(DomainError):
        ResourceBudget(p_max=1.0, m_min=4, d_t=-0.1)
    assert ResourceBudget(p_max=1.0, m_min=4).d_t == 0.22


def test_strategy_parse():
    assert Strategy.parse("jcfp-w") is Strategy.JCFP_W
    assert Strategy.parse(" eep ") is Strategy.EEP
    with pytest.raises(DomainError, match="unknown strategy"):
        Strategy.parse("greedy")


def test_objective_full_and_single(small_instance):
    w, ch, budget = small_instance
    matching = greedy_match(w, ch)
    order = matching.feature_order
    full = AllocationPlan(4, matching, (2, 2, 4, 4), (1.0, 2.0, 2.0, 3.0), order)
    report = objective(w, full, budget)
    assert report.truncation_term == 0.0
    assert report.total_j == pytest.approx(reference_distortion(w, full, budget.d_t), rel=1e-13)

    single = AllocationPlan(1, matching, (2,), (8.0,), order[:1])
    report = objective(w, single, budget)
    top = order[0]
    mu = report.per_feature_ber[0]
    assert report.total_j == pytest.approx(
        w.weights[top] * mu + (1 - w.weights[top]) * budget.d_t, rel=1e-12
    )
    assert abs(report.total_j - (report.transmission_term + report.truncation_term)) <= 1e-12


def test_objective_dimension_mismatch(small_instance):
    w, ch, budget = small_instance
    plan, _ = solve_ophd(w, ch, budget)
    with pytest.raises(DomainError):
        objective(normalize([1, 1, 1]), plan, budget)


@pytest.mark.parametrize("seed", range(10))
def test_reported_distortion_matches_reference(make_instance, seed):
    w, ch, budget = make_instance(seed, n_features=6, gamma_avg_db=0.0)
    plan, report = solve_ophd(w, ch, budget)
    assert report.total_j == pytest.approx(reference_distortion(w, plan, budget.d_t), rel=1e-12)
    expected_truncation = math.fsum(w.weights[f] * budget.d_t for f in plan.discarded)
    assert report.truncation_term == expected_truncation


def test_high_snr_keeps_everything():
    w = synthetic_profile("isfr_paper_like", 8, seed=1)
    ch = ChannelState.from_values([1e6 * (1 + 0.1 * i) for i in range(8)])
    plan, report = solve_ophd(w, ch, ResourceBudget(p_max=1.0, m_min=4))
    assert plan.k == 8
    assert report.truncation_term == 0.0


@pytest.mark.parametrize("gamma_db", [20.0, 25.0, 30.0])
def test_high_snr_equal_channels(gamma_db):
    w = synthetic_profile("isfr_paper_like", 8, seed=4)
    ch = ChannelState.from_db([gamma_db] * 8)
    budget = ResourceBudget(p_max=4.0, m_min=4)
    plan, report = solve_ophd(w, ch, budget)
    assert plan.k == 8
    assert math.fsum(plan.powers) == pytest.approx(32.0, rel=1e-5)
    assert audit_constraints(plan, w, ch, budget) == []
    assert report.total_j < 1e-3


def test_plan_reports_original_indices():
    w = normalize([1, 5, 3, 2])
    ch = ChannelState.from_values([2.0, 8.0, 1.0, 4.0])
    plan, _ = solve_ophd(w, ch, ResourceBudget(p_max=2.0, m_min=2))
    assert plan.retained == (1, 2, 3, 0)[: plan.k]
    assert plan.matching.channel_of(1) == 1
    assert plan.feature_order == plan.retained


@pytest.mark.parametrize("strategy", list(Strategy))
@pytest.mark.parametrize("seed", range(4))
def test_every_strategy_satisfies_constraints(make_instance, strategy, seed):
    w, ch, budget = make_instance(seed, n_features=5, gamma_avg_db=-5.0 + 5 * seed, m_min=4.5)
    plan, report = solve(strategy, w, ch, budget)
    assert audit_constraints(plan, w, ch, budget) == []
    assert report.strategy_name == strategy.value


def test_audit_flags_violations(small_instance):
    w, ch, budget = small_instance
    matching = greedy_match(w, ch)
    plan = AllocationPlan(4, matching, (2,) * 4, (10.0,) * 4, matching.feature_order)
    problems = audit_constraints(plan, w, ch, budget)
    assert any(p.startswith("C1") for p in problems)
    assert any(p.startswith("C3") for p in problems)


def test_ophd_matches_oracle(make_instance):
    matches = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        w, ch, budget = make_instance(
            seed,
            n_features=5,
            gamma_avg_db=float(rng.choice([-10.0, -5.0, 0.0, 5.0, 10.0])),
            p_max=float(rng.choice([0.4, 2.0, 4.0])),
            m_min=float(rng.choice([2.0, 4.0, 6.0])),
            kind="isfr_paper_like" if seed % 2 else "uniform_noisy",
        )
        _, ophd = solve_ophd(w, ch, budget)
        _, oracle = exhaustive_oracle(w, ch, budget)
        assert ophd.total_j >= oracle.total_j * (1 - 1e-12)
        matches.append(relative_gap(ophd.total_j, oracle.total_j) <= 1e-4)
    assert np.mean(matches) >= 0.99


def test_free_truncation_matches_oracle(make_instance):
    matches = []
    for seed in range(10):
        w, ch, budget = make_instance(seed, n_features=5, gamma_avg_db=10.0, p_max=4.0, d_t=0.0)
        _, ophd = solve_ophd(w, ch, budget, SolveOptions(early_stop=False))
        _, oracle = exhaustive_oracle(w, ch, budget)
        matches.append(relative_gap(ophd.total_j, oracle.total_j) <= 1e-4)
    assert all(matches)


@pytest.mark.parametrize("seed", range(8))
def test_best_subset_is_a_prefix_when_bers_are_below_the_penalty(make_instance, seed):
    # the prefix property is not universal: at low SNR a retained feature can
    # cost more than d_t and a non-prefix subset wins (reported by validate)
    w, ch, budget = make_instance(seed, n_features=4, gamma_avg_db=5.0 + 5 * (seed % 2))
    assert w.is_ordered
    _, prefix = exhaustive_oracle(w, ch, budget)
    _, subset = exhaustive_oracle(w, ch, budget, subset_search=True)
    assert max(subset.per_feature_ber) < budget.d_t
    assert subset.total_j <= prefix.total_j
    assert prefix.total_j <= subset.total_j * (1 + 1e-9)


def test_oracle_size_guard_and_trivial_case():
    with pytest.raises(DomainError):
        exhaustive_oracle(
            synthetic_profile("isfr_geometric", 11, 0.8),
            ChannelState.from_values([1.0] * 11),
            ResourceBudget(p_max=1.0, m_min=4),
        )
    plan, report = exhaustive_oracle(
        ImportanceProfile((1.0,)), ChannelState.from_values([3.0]), ResourceBudget(1.0, 4)
    )
    assert plan.k == 1
    assert report.truncation_term == 0.0


def test_oracle_with_fixed_matching(small_instance):
    w, ch, budget = small_instance
    _, default = exhaustive_oracle(w, ch, budget)
    _, greedy = exhaustive_oracle(w, ch, budget, matching=greedy_match(w, ch))
    assert greedy.total_j == default.total_j
    three = greedy_match(normalize([3, 2, 1]), ChannelState.from_values([1.0, 2.0, 3.0]))
    with pytest.raises(DomainError):
        exhaustive_oracle(w, ch, budget, matching=three)


@pytest.mark.parametrize("m_min", [2.0, 4.0, 6.0])
@pytest.mark.parametrize("seed", range(6))
def test_nested_strategies(make_instance, m_min, seed):
    w, ch, budget = make_instance(seed, n_features=6, gamma_avg_db=-10.0 + 4 * seed, m_min=m_min)
    _, jcfmp = solve("JCFMP", w, ch, budget)
    _, jcmp = solve("JCMP", w, ch, budget)
    _, jcp = solve("JCP", w, ch, budget)
    assert jcfmp.total_j <= jcmp.total_j * (1 + 1e-12)
    assert jcmp.total_j <= jcp.total_j * (1 + 1e-12)


def test_symmetric_instance_strategies_coincide():
    w = normalize([1] * 4)
    ch = ChannelState.from_values([2.0] * 4)
    budget = ResourceBudget(p_max=1.0, m_min=2)
    totals = {}
    for name in ("JCMP", "JCP", "CA", "EEP"):
        plan, report = solve_baseline(name, w, ch, budget)
        assert plan.k == 4
        totals[name] = report.total_j
    reference = totals["EEP"]
    assert all(v == pytest.approx(reference, rel=1e-9) for v in totals.values())


def test_eep_uses_identity_matching():
    w = normalize([1, 5, 3])
    ch = ChannelState.from_values([1.0, 2.0, 4.0])
    plan, _ = solve_baseline("EEP", w, ch, ResourceBudget(p_max=1.0, m_min=4))
    assert plan.matching.permutation == (0, 1, 2)
    assert plan.powers == pytest.approx((1.0, 1.0, 1.0))
    assert set(plan.orders) == {4}


def test_waterfill_baseline_spends_budget(make_instance):
    w, ch, budget = make_instance(3, n_features=6, gamma_avg_db=-5.0)
    plan, _ = solve_baseline("JCFP_W", w, ch, budget)
    assert math.fsum(plan.powers) == pytest.approx(6 * budget.p_max)


def test_solve_baseline_rejects_main_strategy(small_instance):
    with pytest.raises(DomainError):
        solve_baseline("JCFMP", *small_instance)
    assert Strategy.JCFMP not in BASELINES


@pytest.mark.parametrize("seed", range(10))
def test_early_stop_never_beats_full_search(make_instance, seed):
    w, ch, budget = make_instance(seed, n_features=8, gamma_avg_db=-10.0 + 2 * seed)
    _, stopped = solve_ophd(w, ch, budget)
    _, full = solve_ophd(w, ch, budget, SolveOptions(early_stop=False))
    assert full.total_j <= stopped.total_j
    assert sorted(full.solve_stats.k_visited) == list(range(1, 9))


def test_distortion_trace_recorded(make_instance):
    w, ch, budget = make_instance(2, n_features=6)
    _, report = solve_ophd(w, ch, budget, SolveOptions(early_stop=False))
    trace = report.solve_stats.best_j_by_k
    assert set(trace) == set(range(1, 7))
    assert min(trace.values()) == pytest.approx(report.total_j, rel=1e-12)


def test_monotone_in_budget_and_snr(make_instance):
    w, ch, budget = make_instance(5, n_features=6, gamma_avg_db=0.0)
    options = SolveOptions(early_stop=False)
    by_power = [
        solve_ophd(w, ch, ResourceBudget(p, budget.m_min), options)[1].total_j
        for p in (0.4, 1.0, 2.0, 4.0)
    ]
    by_snr = [
        solve_ophd(w, ch.scaled(s), budget, options)[1].total_j for s in (0.25, 1.0, 4.0, 16.0)
    ]
    for series in (by_power, by_snr):
        assert all(b <= a * (1 + 1e-9) for a, b in zip(series, series[1:]))


def test_truncation_deepens_at_low_snr(make_instance):
    low, high = [], []
    for seed in range(20):
        w, ch_low, budget = make_instance(seed, n_features=8, gamma_avg_db=-10.0, p_max=1.0)
        _, ch_high, _ = make_instance(seed, n_features=8, gamma_avg_db=10.0, p_max=1.0)
        low.append(solve_ophd(w, ch_low, budget)[0].k)
        high.append(solve_ophd(w, ch_high, budget)[0].k)
    assert np.mean(low) < np.mean(high)


@pytest.mark.parametrize("n", [4, 8, 16, 32])
def test_candidate_count_is_polynomial(make_instance, n):
    w, ch, budget = make_instance(1, n_features=n, gamma_avg_db=5.0, m_min=4.0)
    _, report = solve_ophd(w, ch, budget, SolveOptions(early_stop=False))
    assert report.solve_stats.candidates_evaluated <= (n + 1) * (n + 2) // 2


def test_oracle_does_far_more_work():
    w = synthetic_profile("isfr_paper_like", 6, seed=3)
    ch = ChannelState.from_db([8.0, 6.0, 4.0, 2.0, 0.0, -2.0])
    budget = ResourceBudget(p_max=2.0, m_min=2.0)
    _, ophd = solve_ophd(w, ch, budget)
    _, oracle = exhaustive_oracle(w, ch, budget)
    assert oracle.solve_stats.candidates_evaluated == 83
    assert oracle.solve_stats.candidates_evaluated >= 10 * ophd.solve_stats.candidates_evaluated
