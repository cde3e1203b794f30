#!/usr/bin/env python3
"""
Acceptance suite for uepopt.
Runs the oracle, power, BER-model, perturbation, complexity, trend and
determinism checks and prints a PASS/FAIL report. The prefix-subset,
pruning and matching shortcuts are measured and reported, not gated.
"""

import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

try:
    from uepopt.core.ber_model import ber, ber_array
    from uepopt.core.importance import synthetic_profile
    from uepopt.core.matching import greedy_match
    from uepopt.core.power import allocate
    from uepopt.core.solver import ResourceBudget, SolveOptions, exhaustive_oracle, solve_ophd
    from uepopt.harness.config import config_from_dict
    from uepopt.harness.runner import run_experiment, run_trials, sample_channel, write_results
    from uepopt.harness.validation import (
        ValidationSettings,
        kkt_residual,
        matching_gap,
        pruning_gap,
        validate,
    )
    from uepopt.sim.link import simulate_ber
    from uepopt.sim.perturb import draw_matched_bers, nested_dropout_mask
    from uepopt.sim.streams import derive_seed
except ImportError:
    print("ERROR: uepopt not installed. Run: pip install -e .")
    sys.exit(1)

SEED = 2024
GAMMAS_DB = [-10.0, -5.0, 0.0, 5.0, 10.0]


def random_instance(i, n):
    seed = derive_seed(SEED, i)
    rng = np.random.default_rng(seed)
    w = synthetic_profile("isfr_paper_like", n, seed=seed)
    ch = sample_channel(float(rng.choice(GAMMAS_DB)), 5.0, n, seed)
    budget = ResourceBudget(float(rng.choice([0.4, 2.0, 4.0])), float(rng.choice([2.0, 4.0, 6.0])))
    return w, ch, budget


def oracle_equivalence():
    start = time.perf_counter()
    report = validate(ValidationSettings(instances=1000, n_features=6, seed=SEED))
    elapsed = time.perf_counter() - start
    print(f"  match rate {report.match_rate:.4f}, mean gap {report.mean_gap:.3e}")
    print(f"  {elapsed:.1f}s for 1000 instances")
    return report.match_rate >= 0.99 and report.mean_gap <= 1e-3 and elapsed < 120.0


def prefix_optimality():
    """Measured, not gated: the best subset is not always a prefix."""
    gains = []
    for i in range(200):
        n = 3 + i % 3
        w, ch, budget = random_instance(i, n)
        _, prefix = exhaustive_oracle(w, ch, budget)
        _, subset = exhaustive_oracle(w, ch, budget, subset_search=True)
        gains.append((prefix.total_j - subset.total_j) / subset.total_j)
    gains = np.array(gains)
    violations = int(np.sum(gains > 1e-9))
    print(f"  best subset not a prefix on {violations}/{len(gains)} instances")
    print(f"  largest subset gain over the best prefix: {gains.max():.3e}")
    return None


def pruning_soundness():
    """Measured, not gated: non-monotone or non-minimal vectors can win."""
    gaps = []
    for i in range(200):
        n = 6
        w, ch, budget = random_instance(i, n)
        matching = greedy_match(w, ch)
        ranked_w = w.as_array()[list(matching.feature_order)]
        k = 1 + i % n
        gaps.append(pruning_gap(ranked_w, matching.ranked_gammas(), budget, n, k))
    gaps = np.array(gaps)
    losses = int(np.sum(gaps > 1e-9))
    print(f"  pruning lost distortion on {losses}/{len(gaps)} instances")
    print(f"  largest pruning loss: {gaps.max():.3e}")
    return None


def matching_optimality():
    """Measured, not gated: greedy matching against all N! matchings."""
    for n, count in ((5, 10), (6, 2)):
        gaps = np.array([matching_gap(*random_instance(i, n)) for i in range(count)])
        print(
            f"  N={n}: {int(np.sum(gaps > 1e-9))}/{count} instances beaten, "
            f"mean gap {gaps.mean():.3e}, max gap {gaps.max():.3e}"
        )
    return None


def power_optimality():
    worst_kkt, worst_budget = 0.0, 0.0
    for i in range(200):
        w, ch, budget = random_instance(i, 6)
        plan, _ = solve_ophd(w, ch, budget)
        worst_kkt = max(worst_kkt, kkt_residual(plan, w.as_array()))
        spent = math.fsum(plan.powers)
        worst_budget = max(worst_budget, abs(spent - 6 * budget.p_max) / (6 * budget.p_max))

    # two features against a 1e-3 step line search over the split
    worst_grid = -math.inf
    for i in range(20):
        rng = np.random.default_rng(i)
        weights = np.sort(rng.uniform(0.1, 1.0, size=2))[::-1]
        gammas = np.sort(rng.uniform(0.5, 10.0, size=2))[::-1]
        orders = (2, 4)
        total = 2.0
        optimum = allocate(weights, orders, gammas, 1.0, 2)
        j_opt = math.fsum(weights * ber_array(orders, optimum.as_array(), gammas))
        split = np.arange(1, 1000) * total / 1000
        grid = np.stack([split, total - split], axis=1)
        per_feature = [ber(m, grid[:, c], gammas[c]) for c, m in enumerate(orders)]
        j_grid = (weights * np.stack(per_feature, axis=1)).sum(axis=1)
        worst_grid = max(worst_grid, (j_opt - j_grid.min()) / j_grid.min())
    print(f"  KKT residual max {worst_kkt:.3e}, budget residual max {worst_budget:.3e}")
    print(f"  excess over grid search {worst_grid:.3e}")
    return worst_kkt <= 1e-4 and worst_budget <= 1e-5 and worst_grid <= 1e-6


def ber_fidelity():
    ok = True
    for m, p, gamma in [(2, 1.0, 2.0), (4, 2.0, 5.0), (6, 4.0, 96.6 / 4.0)]:
        n_bits = 1_000_002
        expected = float(ber(m, p, gamma))
        measured = simulate_ber(m, p, gamma, n_bits, seed=SEED)
        sigma = math.sqrt(expected * (1 - expected) / n_bits)
        tol = max(0.1 * expected, 3 * sigma)
        print(f"  m={m}: analytic {expected:.4e}, empirical {measured:.4e}")
        ok &= abs(measured - expected) <= tol
    return ok


def perturbation_statistics():
    n, draws, ber_max = 8, 100_000, 0.2
    masks = nested_dropout_mask(n, SEED, size=draws)
    keep = (n - np.arange(n)) / n
    spread = 3 * np.sqrt(keep * (1 - keep) / draws) + 1e-12
    dropout_ok = np.all(np.abs(masks.mean(0) - keep) <= spread)
    bers = draw_matched_bers(n, ber_max, SEED, size=draws)
    i = np.arange(1, n + 1)
    mean = i * ber_max / (n + 1)
    sd = ber_max * np.sqrt(i * (n + 1 - i) / ((n + 1) ** 2 * (n + 2)))
    order_ok = np.all(np.abs(bers.mean(0) - mean) <= 3 * sd / math.sqrt(draws))
    print(f"  dropout frequencies ok: {bool(dropout_ok)}, order statistics ok: {bool(order_ok)}")
    return bool(dropout_ok and order_ok)


def complexity_trend():
    sizes = [4, 8, 16, 32]
    counts = []
    for n in sizes:
        w = synthetic_profile("isfr_paper_like", n, seed=SEED)
        ch = sample_channel(5.0, 5.0, n, SEED)
        _, report = solve_ophd(w, ch, ResourceBudget(2.0, 4.0), SolveOptions(early_stop=False))
        counts.append(report.solve_stats.candidates_evaluated)
    slope = np.polyfit(np.log(sizes), np.log(counts), 1)[0]
    w = synthetic_profile("isfr_paper_like", 6, seed=SEED)
    ch = sample_channel(5.0, 5.0, 6, SEED)
    budget = ResourceBudget(2.0, 2.0)
    _, ophd = solve_ophd(w, ch, budget)
    _, oracle = exhaustive_oracle(w, ch, budget)
    ratio = oracle.solve_stats.candidates_evaluated / ophd.solve_stats.candidates_evaluated
    print(f"  candidates {counts}, log-log slope {slope:.2f}, oracle/solver ratio {ratio:.1f}")
    return slope <= 3 and ratio >= 10


def qualitative_trends():
    low, high = [], []
    for t in range(200):
        seed = derive_seed(SEED, 8, t)
        w = synthetic_profile("isfr_paper_like", 8, seed=seed)
        budget = ResourceBudget(1.0, 4.0)
        low.append(solve_ophd(w, sample_channel(-10.0, 5.0, 8, seed), budget)[0].k)
        high.append(solve_ophd(w, sample_channel(10.0, 5.0, 8, seed), budget)[0].k)
    cfg = config_from_dict(
        {
            "gamma_avg_db": GAMMAS_DB,
            "p_max": [0.4, 2.0],
            "m_min": [2.0, 4.0, 6.0],
            "strategies": ["JCFMP", "JCMP", "JCP"],
            "trials": 10,
            "seed": SEED,
        }
    )
    trials = run_trials(cfg).pivot_table(index=["point", "trial"], columns="strategy", values="j")
    slack = 1 + 1e-12
    first = trials["JCFMP"] <= trials["JCMP"] * slack
    second = trials["JCMP"] <= trials["JCP"] * slack
    ordered = bool((first & second).all())
    print(f"  mean k*: {np.mean(low):.2f} at -10 dB, {np.mean(high):.2f} at +10 dB")
    print(f"  JCFMP <= JCMP <= JCP on every paired trial: {ordered}")
    return np.mean(low) < np.mean(high) and ordered


def determinism():
    data = {
        "gamma_avg_db": [-5.0, 5.0],
        "p_max": [1.0],
        "m_min": [4.0],
        "strategies": ["JCFMP", "CA", "JCFP_W"],
        "trials": 8,
        "seed": SEED,
    }
    with tempfile.TemporaryDirectory() as tmp:
        outputs = []
        for run, workers in enumerate([1, 1, 2]):
            cfg = config_from_dict({**data, "workers": workers})
            path = write_results(run_experiment(cfg), Path(tmp) / f"run{run}.csv")
            outputs.append(path.read_bytes())
    print(f"  {len(outputs)} runs, identical: {len(set(outputs)) == 1}")
    return len(set(outputs)) == 1


CHECKS = [
    ("Oracle equivalence", oracle_equivalence),
    ("Prefix optimality of feature selection", prefix_optimality),
    ("Modulation pruning soundness", pruning_soundness),
    ("Greedy matching optimality", matching_optimality),
    ("Power allocation optimality", power_optimality),
    ("BER model fidelity", ber_fidelity),
    ("Perturbation statistics", perturbation_statistics),
    ("Complexity trend", complexity_trend),
    ("Qualitative trends", qualitative_trends),
    ("Determinism", determinism),
]


def main():
    print("=" * 60)
    print("uepopt Acceptance Suite")
    print("=" * 60)

    results = []
    for number, (name, check) in enumerate(CHECKS, start=1):
        print(f"\n[{number}] {name}")
        start = time.perf_counter()
        outcome = check()
        elapsed = time.perf_counter() - start
        if outcome is None:
            print(f"  MEASURED ({elapsed:.1f}s)")
            continue
        print(f"  {'PASS' if outcome else 'FAIL'} ({elapsed:.1f}s)")
        results.append(bool(outcome))

    print("\n" + "=" * 60)
    print(f"ACCEPTANCE: {sum(results)}/{len(results)} checks passed")
    print("=" * 60)
    sys.exit(0 if all(results) else 1)


if __name__ == "__main__":
    main()
