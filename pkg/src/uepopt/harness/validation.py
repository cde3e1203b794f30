"""
Solver validation against exhaustive search.

Draws seeded random instances and compares the hierarchical solver with
the exhaustive oracle. A sampled fraction of the instances also measures
how often the shortcuts the solver relies on hold: early stopping,
prefix-only subsets, modulation pruning and greedy matching. Those are
reported as rates and gaps, not assumed.
"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, Field

from uepopt.core.ber_model import ber_array
from uepopt.core.errors import DomainError
from uepopt.core.importance import ImportanceProfile, ProfileKind, synthetic_profile
from uepopt.core.matching import ChannelState, Matching, greedy_match
from uepopt.core.modulation import all_feasible_vectors, candidate_set
from uepopt.core.power import MarginalProblem, allocate
from uepopt.core.solver import (
    DEFAULT_DISCARD_PENALTY,
    AllocationPlan,
    ResourceBudget,
    SolveOptions,
    exhaustive_oracle,
    solve_ophd,
)
from uepopt.harness.config import DEFAULT_SPREAD_DB
from uepopt.harness.runner import sample_channel
from uepopt.sim.streams import derive_seed

logger = logging.getLogger(__name__)

VALIDATION_MAX_FEATURES = 6
SUBSET_MAX_FEATURES = 5
PRUNING_MAX_K = 6
MATCHING_MAX_FEATURES = 6
SHORTCUT_TOLERANCE = 1e-9


class ValidationSettings(BaseModel):
    """
    Instance distribution of a validation run.

    check_every and matching_every pick the sampled instances for the
    shortcut and matching checks; 0 turns a check off.
    """

    instances: int = Field(1000, ge=1)
    n_features: int = Field(VALIDATION_MAX_FEATURES, ge=1)
    seed: int = Field(0, ge=0)
    gamma_avg_db: list[float] = Field(default_factory=lambda: [-10.0, -5.0, 0.0, 5.0, 10.0])
    p_max: list[float] = Field(default_factory=lambda: [0.4, 2.0, 4.0])
    m_min: list[float] = Field(default_factory=lambda: [2.0, 4.0, 6.0])
    spread_db: float = Field(DEFAULT_SPREAD_DB, ge=0)
    d_t: float = DEFAULT_DISCARD_PENALTY
    tolerance: float = 1e-4
    check_every: int = Field(50, ge=0)
    matching_every: int = Field(0, ge=0)
    workers: int = Field(1, ge=1)


class ValidationReport(BaseModel):
    """Agreement, residual and shortcut statistics of a validation run."""

    instances: int
    n_features: int
    match_rate: float
    mean_gap: float
    max_gap: float
    kkt_residual_p99: float
    budget_residual_max: float
    mean_candidates_ophd: float
    mean_candidates_oracle: float
    shortcut_instances: int = 0
    no_early_stop_max_gap: Optional[float] = None
    early_stop_mean_gap: Optional[float] = None
    prefix_subset_instances: int = 0
    prefix_violation_rate: Optional[float] = None
    prefix_subset_max_gain: Optional[float] = None
    pruning_instances: int = 0
    pruning_soundness_rate: Optional[float] = None
    pruning_max_gap: Optional[float] = None
    matching_instances: int = 0
    matching_gap_mean: Optional[float] = None
    matching_gap_max: Optional[float] = None


def _relative_gap(value: float, reference: float) -> float:
    return (value - reference) / reference if reference > 0 else value - reference


def kkt_residual(plan: AllocationPlan, weights: np.ndarray) -> float:
    """
    Relative spread max/min - 1 of the marginals of a plan's powers.

    Computed from log marginals, so it stays finite at SNRs where the
    marginals themselves underflow.
    """
    if plan.k < 2:
        return 0.0
    retained = list(plan.retained)
    gammas = [plan.gamma_of(f) for f in retained]
    problem = MarginalProblem(weights[retained], plan.orders, gammas)
    log_t = problem.log_marginals(np.array(plan.powers))
    return math.expm1(float(log_t.max() - log_t.min()))


def _best_distortion(vectors, weights, gammas, budget: ResourceBudget, n: int) -> float:
    best = math.inf
    for vector in vectors:
        powers = allocate(weights, vector.orders, gammas, budget.p_max, n).as_array()
        best = min(best, math.fsum(weights * ber_array(vector.orders, powers, gammas)))
    return best


def pruning_gap(weights, gammas, budget: ResourceBudget, n: int, k: int) -> float:
    """
    Relative excess of the pruned candidate set over all 3**k feasible vectors.

    Zero when pruning loses nothing; the truncation term is shared and omitted.
    """
    w, g = np.asarray(weights)[:k], np.asarray(gammas)[:k]
    pruned = _best_distortion(candidate_set(k, n, budget.m_min), w, g, budget, n)
    everything = all_feasible_vectors(k, n, budget.m_min, monotone=False)
    full = _best_distortion(everything, w, g, budget, n)
    return _relative_gap(pruned, full)


def matching_gap(w: ImportanceProfile, ch: ChannelState, budget: ResourceBudget) -> float:
    """
    Relative excess of greedy matching over the best of all N! matchings.

    Each matching gets the same exhaustive truncation, modulation and power
    search, so a positive value means greedy matching is not jointly optimal
    on this instance.

    Raises:
        DomainError: If N exceeds the size guard.
    """
    n = w.n_features
    if n > MATCHING_MAX_FEATURES:
        raise DomainError(f"matching search is limited to N <= {MATCHING_MAX_FEATURES}, got {n}")
    _, greedy = exhaustive_oracle(w, ch, budget)
    feature_order = tuple(int(f) for f in w.ranked()[0])
    gammas = ch.as_array()
    best = greedy.total_j
    for permutation in itertools.permutations(range(n)):
        matching = Matching(
            permutation=permutation,
            sorted_gammas=tuple(float(g) for g in gammas[list(permutation)]),
            feature_order=feature_order,
        )
        _, report = exhaustive_oracle(w, ch, budget, matching=matching)
        best = min(best, report.total_j)
    return _relative_gap(greedy.total_j, best)


def _run_instance(settings: ValidationSettings, i: int) -> dict:
    n = settings.n_features
    seed = derive_seed(settings.seed, i)
    rng = np.random.default_rng(seed)
    kind = ProfileKind.ISFR_PAPER_LIKE if i % 2 == 0 else ProfileKind.UNIFORM_NOISY
    w = synthetic_profile(kind, n, seed=seed)
    ch = sample_channel(float(rng.choice(settings.gamma_avg_db)), settings.spread_db, n, seed)
    budget = ResourceBudget(
        p_max=float(rng.choice(settings.p_max)),
        m_min=float(rng.choice(settings.m_min)),
        d_t=settings.d_t,
    )

    plan, report = solve_ophd(w, ch, budget)
    _, oracle = exhaustive_oracle(w, ch, budget)
    budget_total = n * budget.p_max
    record = {
        "gap": _relative_gap(report.total_j, oracle.total_j),
        "kkt": kkt_residual(plan, w.as_array()),
        "budget": abs(math.fsum(plan.powers) - budget_total) / budget_total,
        "candidates_ophd": report.solve_stats.candidates_evaluated,
        "candidates_oracle": oracle.solve_stats.candidates_evaluated,
    }

    if settings.check_every and i % settings.check_every == 0:
        _, free = solve_ophd(w, ch, budget, SolveOptions(early_stop=False))
        record["free_gap"] = _relative_gap(free.total_j, oracle.total_j)
        record["stop_gap"] = _relative_gap(report.total_j, free.total_j)
        if n <= SUBSET_MAX_FEATURES and w.is_ordered:
            _, subset = exhaustive_oracle(w, ch, budget, subset_search=True)
            record["subset_gain"] = _relative_gap(oracle.total_j, subset.total_j)
        k = int(rng.integers(1, min(n, PRUNING_MAX_K) + 1))
        matching = greedy_match(w, ch)
        ranked_w = w.as_array()[list(matching.feature_order)]
        record["pruning_gap"] = pruning_gap(ranked_w, matching.ranked_gammas(), budget, n, k)

    if settings.matching_every and i % settings.matching_every == 0:
        record["matching_gap"] = matching_gap(w, ch, budget)
    return record


def _run_instance_star(args: tuple) -> dict:
    return _run_instance(*args)


def _summarize(values: list[float]) -> tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    return float(np.mean(values)), float(np.max(values))


def validate(
    settings: ValidationSettings = ValidationSettings(),
    on_instance: Optional[Callable[[], None]] = None,
) -> ValidationReport:
    """
    Compare the hierarchical solver with exhaustive search on random instances.

    Weights alternate between the ordered and the near-uniform synthetic
    families. Every check_every-th instance also re-solves without early
    stopping, runs the 2**N subset search (N <= 5, ordered weights) and
    compares the pruned candidates with all 3**k vectors. Every
    matching_every-th instance searches all N! matchings. Results do not
    depend on the worker count.

    Raises:
        DomainError: If n_features exceeds the size guard, or the matching
            check is on with N above its guard.
    """
    n = settings.n_features
    if n > VALIDATION_MAX_FEATURES:
        raise DomainError(f"validation is limited to N <= {VALIDATION_MAX_FEATURES}, got {n}")
    if settings.matching_every and n > MATCHING_MAX_FEATURES:
        raise DomainError(f"matching search is limited to N <= {MATCHING_MAX_FEATURES}, got {n}")

    tasks = [(settings, i) for i in range(settings.instances)]
    records: list[dict] = []
    if settings.workers > 1:
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            chunksize = max(1, len(tasks) // (4 * settings.workers))
            for record in pool.map(_run_instance_star, tasks, chunksize=chunksize):
                records.append(record)
                if on_instance:
                    on_instance()
    else:
        for task in tasks:
            records.append(_run_instance(*task))
            if on_instance:
                on_instance()

    def column(key: str) -> list[float]:
        return [r[key] for r in records if key in r]

    gaps = np.array(column("gap"))
    stop_mean, _ = _summarize(column("stop_gap"))
    _, free_max = _summarize(column("free_gap"))
    subset_gains = column("subset_gain")
    _, subset_max = _summarize(subset_gains)
    pruning = column("pruning_gap")
    _, pruning_max = _summarize(pruning)
    matching_mean, matching_max = _summarize(column("matching_gap"))

    report = ValidationReport(
        instances=settings.instances,
        n_features=n,
        match_rate=float(np.mean(gaps <= settings.tolerance)),
        mean_gap=float(gaps.mean()),
        max_gap=float(gaps.max()),
        kkt_residual_p99=float(np.percentile(column("kkt"), 99)),
        budget_residual_max=float(max(column("budget"))),
        mean_candidates_ophd=float(np.mean(column("candidates_ophd"))),
        mean_candidates_oracle=float(np.mean(column("candidates_oracle"))),
        shortcut_instances=len(column("stop_gap")),
        no_early_stop_max_gap=free_max,
        early_stop_mean_gap=stop_mean,
        prefix_subset_instances=len(subset_gains),
        prefix_violation_rate=(
            float(np.mean(np.array(subset_gains) > SHORTCUT_TOLERANCE)) if subset_gains else None
        ),
        prefix_subset_max_gain=subset_max,
        pruning_instances=len(pruning),
        pruning_soundness_rate=(
            float(np.mean(np.array(pruning) <= SHORTCUT_TOLERANCE)) if pruning else None
        ),
        pruning_max_gap=pruning_max,
        matching_instances=len(column("matching_gap")),
        matching_gap_mean=matching_mean,
        matching_gap_max=matching_max,
    )
    logger.info(
        "validated %d instances: match rate %.4f, mean gap %.3g",
        report.instances,
        report.match_rate,
        report.mean_gap,
    )
    if report.prefix_violation_rate:
        logger.warning(
            "best subset was not a prefix on %.1f%% of checked instances",
            100 * report.prefix_violation_rate,
        )
    if report.pruning_soundness_rate is not None and report.pruning_soundness_rate < 1.0:
        logger.warning(
            "modulation pruning lost distortion on %.1f%% of checked instances",
            100 * (1 - report.pruning_soundness_rate),
        )
    return report
