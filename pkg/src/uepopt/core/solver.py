"""
Joint channel matching, feature selection, modulation and power allocation.

The hierarchical solver runs greedy matching once, then walks the truncation
index k down from N. For each k it evaluates the pruned modulation
candidates, each with its optimal convex power allocation, and stops once
the best distortion at k rises above the best at k + 1.

The exhaustive oracle and the baseline strategies share the same
evaluation path, so their distortions are directly comparable.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from uepopt.core.ber_model import MOD_ORDERS, ber_array
from uepopt.core.errors import DomainError, InfeasibleError
from uepopt.core.importance import ImportanceProfile
from uepopt.core.matching import ChannelState, Matching, greedy_match, identity_match
from uepopt.core.modulation import (
    ModVector,
    all_feasible_vectors,
    candidate_set,
    uniform_order,
)
from uepopt.core.power import PowerVector, allocate, equal_power, waterfill

logger = logging.getLogger(__name__)

DEFAULT_DISCARD_PENALTY = 0.22
EXHAUSTIVE_MAX_FEATURES = 10
BUDGET_TOLERANCE = 1e-9


class Strategy(str, Enum):
    """Allocation strategies, named by the jointly optimized dimensions."""

    JCFMP = "JCFMP"
    JCFMP_ES = "JCFMP_ES"
    JCMP = "JCMP"
    JCFP = "JCFP"
    JCP = "JCP"
    CA = "CA"
    EEP = "EEP"
    JCFP_W = "JCFP_W"

    @classmethod
    def parse(cls, name: "str | Strategy") -> "Strategy":
        if isinstance(name, Strategy):
            return name
        key = str(name).strip().upper().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(s.value for s in cls)
            raise DomainError(f"unknown strategy {name!r}; choose from {choices}") from None


BASELINES = (
    Strategy.JCMP,
    Strategy.JCFP,
    Strategy.JCP,
    Strategy.CA,
    Strategy.EEP,
    Strategy.JCFP_W,
)


@dataclass(frozen=True)
class ResourceBudget:
    """
    Power, rate and truncation settings of one allocation problem.

    Attributes:
        p_max: Average per-channel power budget (W).
        m_min: Average rate budget (bits/symbol), within [2, 6].
        d_t: Distortion charged per unit weight of a discarded feature.
    """

    p_max: float
    m_min: float
    d_t: float = DEFAULT_DISCARD_PENALTY

    def __post_init__(self) -> None:
        if not (self.p_max > 0 and math.isfinite(self.p_max)):
            raise DomainError(f"p_max must be positive, got {self.p_max}")
        if not min(MOD_ORDERS) <= self.m_min <= max(MOD_ORDERS):
            raise DomainError(f"m_min must lie in [2, 6], got {self.m_min}")
        if not (self.d_t >= 0 and math.isfinite(self.d_t)):
            raise DomainError(f"d_t must be non-negative, got {self.d_t}")


@dataclass(frozen=True)
class SolveOptions:
    early_stop: bool = True


@dataclass
class SolveStats:
    """Search effort counters of one solve."""

    k_visited: list[int] = field(default_factory=list)
    candidates_evaluated: int = 0
    newton_iterations: int = 0
    bisection_iterations: int = 0
    best_j_by_k: dict[int, float] = field(default_factory=dict)

    def absorb(self, powers: PowerVector) -> None:
        self.candidates_evaluated += 1
        self.newton_iterations += powers.newton_iterations
        self.bisection_iterations += powers.bisection_iterations


@dataclass(frozen=True)
class AllocationPlan:
    """
    A complete allocation decision.

    Orders and powers are listed in rank order of the retained features;
    retained[r] is the original index of the r-th transmitted feature.
    """

    k: int
    matching: Matching
    orders: tuple[int, ...]
    powers: tuple[float, ...]
    retained: tuple[int, ...]

    @property
    def n_features(self) -> int:
        return len(self.matching.permutation)

    @property
    def feature_order(self) -> tuple[int, ...]:
        """Original index of each transmitted feature, in rank order."""
        return self.retained

    @property
    def discarded(self) -> tuple[int, ...]:
        kept = set(self.retained)
        return tuple(f for f in self.matching.feature_order if f not in kept)

    def gamma_of(self, feature: int) -> float:
        return self.matching.sorted_gammas[feature]


@dataclass(frozen=True)
class DistortionReport:
    """Importance-weighted distortion of a plan, split into its two terms."""

    per_feature_ber: tuple[float, ...]
    transmission_term: float
    truncation_term: float
    total_j: float
    strategy_name: str = ""
    solve_stats: SolveStats = field(default_factory=SolveStats, compare=False)


@dataclass(frozen=True)
class _Candidate:
    j: float
    positions: tuple[int, ...]
    orders: tuple[int, ...]
    powers: tuple[float, ...]


class _RankedInstance:
    """Weights and matched SNRs in feature rank order."""

    def __init__(self, w: ImportanceProfile, matching: Matching, budget: ResourceBudget):
        self.matching = matching
        self.budget = budget
        self.n = w.n_features
        order = list(matching.feature_order)
        self.weights = w.as_array()[order]
        self.gammas = matching.ranked_gammas()
        self.total_power = self.n * budget.p_max

    def distortion(self, positions: Sequence[int], orders, powers) -> float:
        idx = list(positions)
        bers = ber_array(orders, powers, self.gammas[idx])
        dropped = np.ones(self.n, dtype=bool)
        dropped[idx] = False
        transmission = math.fsum(self.weights[idx] * bers)
        truncation = math.fsum(self.weights[dropped] * self.budget.d_t)
        return transmission + truncation

    def optimal_power(
        self, positions: Sequence[int], vector: ModVector, stats: SolveStats
    ) -> _Candidate:
        idx = list(positions)
        powers = allocate(
            self.weights[idx], vector.orders, self.gammas[idx], self.budget.p_max, self.n
        )
        stats.absorb(powers)
        j = self.distortion(positions, vector.orders, powers.as_array())
        return _Candidate(j, tuple(positions), vector.orders, powers.powers)

    def best_of(
        self, positions: Sequence[int], vectors: Sequence[ModVector], stats: SolveStats
    ) -> Optional[_Candidate]:
        best = None
        for vector in vectors:
            cand = self.optimal_power(positions, vector, stats)
            if best is None or cand.j < best.j:
                best = cand
        return best

    def to_plan(self, cand: _Candidate) -> AllocationPlan:
        order = self.matching.feature_order
        return AllocationPlan(
            k=len(cand.positions),
            matching=self.matching,
            orders=cand.orders,
            powers=cand.powers,
            retained=tuple(order[p] for p in cand.positions),
        )


def _truncation_search(
    inst: _RankedInstance,
    evaluate_k: Callable[[int], Optional[_Candidate]],
    early_stop: bool,
    stats: SolveStats,
) -> _Candidate:
    best: Optional[_Candidate] = None
    previous: Optional[float] = None
    for k in range(inst.n, 0, -1):
        try:
            local = evaluate_k(k)
        except InfeasibleError as exc:
            logger.warning("skipping k=%d: %s", k, exc)
            continue
        stats.k_visited.append(k)
        if local is None:
            continue
        stats.best_j_by_k[k] = local.j
        if best is None or local.j < best.j:
            best = local
        if early_stop and previous is not None and local.j > previous:
            logger.debug("early stop at k=%d (J %.6g > %.6g)", k, local.j, previous)
            break
        previous = local.j
    if best is None:
        raise InfeasibleError("no truncation index admits a feasible allocation", "C3")
    return best


def _finish(
    w: ImportanceProfile,
    inst: _RankedInstance,
    cand: _Candidate,
    strategy: Strategy,
    stats: SolveStats,
) -> tuple[AllocationPlan, DistortionReport]:
    plan = inst.to_plan(cand)
    report = objective(w, plan, inst.budget, strategy_name=strategy.value, stats=stats)
    logger.debug(
        "%s: k*=%d J=%.6g candidates=%d",
        strategy.value,
        plan.k,
        report.total_j,
        stats.candidates_evaluated,
    )
    return plan, report


def objective(
    w: ImportanceProfile,
    plan: AllocationPlan,
    budget: ResourceBudget,
    strategy_name: str = "",
    stats: Optional[SolveStats] = None,
) -> DistortionReport:
    """
    Importance-weighted distortion of a plan.

    J = sum over transmitted features of w_j * mu_j + sum over discarded
    features of w_j * d_t. The BER model is used unclamped.

    Raises:
        DomainError: If the plan does not fit the profile.
    """
    if plan.n_features != w.n_features:
        raise DomainError(
            f"dimension mismatch: plan covers {plan.n_features} features, profile {w.n_features}"
        )
    if not (plan.k == len(plan.orders) == len(plan.powers) == len(plan.retained)):
        raise DomainError("plan fields disagree with its truncation index")
    weights = w.as_array()
    retained = list(plan.retained)
    gammas = np.array([plan.gamma_of(f) for f in retained], dtype=float)
    bers = ber_array(plan.orders, np.array(plan.powers, dtype=float), gammas)
    transmission = math.fsum(weights[retained] * bers)
    truncation = math.fsum(weights[f] * budget.d_t for f in plan.discarded)
    return DistortionReport(
        per_feature_ber=tuple(float(b) for b in bers),
        transmission_term=transmission,
        truncation_term=truncation,
        total_j=transmission + truncation,
        strategy_name=strategy_name,
        solve_stats=stats if stats is not None else SolveStats(),
    )


def solve_ophd(
    w: ImportanceProfile,
    ch: ChannelState,
    budget: ResourceBudget,
    options: SolveOptions = SolveOptions(),
) -> tuple[AllocationPlan, DistortionReport]:
    """
    Hierarchical solve: greedy matching, ordered truncation search,
    pruned modulation search and convex power allocation.

    Args:
        w: Importance profile; sorted by rank internally.
        ch: Subchannel SNRs.
        budget: Power, rate and truncation settings.
        options: early_stop halts the k search on the first strict rise.

    Returns:
        Tuple of (plan, distortion report).

    Raises:
        InfeasibleError: If no k admits a rate-feasible allocation.
    """
    inst = _RankedInstance(w, greedy_match(w, ch), budget)
    stats = SolveStats()

    def evaluate_k(k: int) -> Optional[_Candidate]:
        vectors = candidate_set(k, inst.n, budget.m_min)
        return inst.best_of(range(k), vectors, stats)

    best = _truncation_search(inst, evaluate_k, options.early_stop, stats)
    return _finish(w, inst, best, Strategy.JCFMP, stats)


def exhaustive_oracle(
    w: ImportanceProfile,
    ch: ChannelState,
    budget: ResourceBudget,
    subset_search: bool = False,
    matching: Optional[Matching] = None,
) -> tuple[AllocationPlan, DistortionReport]:
    """
    Reference solve without pruning or early stopping.

    Every k from 1 to N and every non-decreasing rate-feasible modulation
    vector is evaluated with optimal power. With subset_search, every
    non-empty feature subset is tried instead of rank prefixes only; each
    feature keeps its greedily matched channel. A fixed matching replaces
    the greedy one when given.

    Raises:
        DomainError: If N exceeds the size guard.
    """
    if w.n_features > EXHAUSTIVE_MAX_FEATURES:
        raise DomainError(
            f"exhaustive search is limited to N <= {EXHAUSTIVE_MAX_FEATURES}, got {w.n_features}"
        )
    if matching is None:
        matching = greedy_match(w, ch)
    elif len(matching.permutation) != w.n_features:
        raise DomainError("matching size differs from the feature count")
    inst = _RankedInstance(w, matching, budget)
    stats = SolveStats()
    best: Optional[_Candidate] = None
    for k in range(1, inst.n + 1):
        vectors = all_feasible_vectors(k, inst.n, budget.m_min, monotone=True)
        if not vectors:
            continue
        stats.k_visited.append(k)
        subsets = itertools.combinations(range(inst.n), k) if subset_search else [range(k)]
        for positions in subsets:
            local = inst.best_of(positions, vectors, stats)
            if local is None:
                continue
            if tuple(positions) == tuple(range(k)):
                stats.best_j_by_k[k] = local.j
            if best is None or local.j < best.j:
                best = local
    if best is None:
        raise InfeasibleError("no truncation index admits a feasible allocation", "C3")
    return _finish(w, inst, best, Strategy.JCFMP_ES, stats)


def _uniform_vector(k: int, n: int, m_min: float) -> ModVector:
    return ModVector((uniform_order(k, n, m_min),) * k)


def solve_baseline(
    name: "str | Strategy",
    w: ImportanceProfile,
    ch: ChannelState,
    budget: ResourceBudget,
    options: SolveOptions = SolveOptions(),
) -> tuple[AllocationPlan, DistortionReport]:
    """
    Solve with one of the reduced strategies.

    JCMP: matching, modulation and power with all N features kept.
    JCFP: matching, truncation and power with uniform modulation.
    JCP: matching and power only. CA: matching only, equal power.
    EEP: identity matching, equal power. JCFP_W: matching, truncation and
    waterfilling power. Uniform modulation is the smallest order meeting
    the rate constraint at the current k.
    """
    strategy = Strategy.parse(name)
    if strategy not in BASELINES:
        raise DomainError(f"{strategy.value} is not a baseline strategy")

    matching = identity_match(w, ch) if strategy is Strategy.EEP else greedy_match(w, ch)
    inst = _RankedInstance(w, matching, budget)
    stats = SolveStats()
    n = inst.n

    if strategy is Strategy.JCMP:
        best = inst.best_of(range(n), candidate_set(n, n, budget.m_min), stats)
        stats.k_visited.append(n)
    elif strategy is Strategy.JCP:
        best = inst.best_of(range(n), [_uniform_vector(n, n, budget.m_min)], stats)
        stats.k_visited.append(n)
    elif strategy in (Strategy.CA, Strategy.EEP):
        vector = _uniform_vector(n, n, budget.m_min)
        powers = equal_power(n, budget.p_max, n)
        stats.candidates_evaluated += 1
        stats.k_visited.append(n)
        j = inst.distortion(range(n), vector.orders, powers.as_array())
        best = _Candidate(j, tuple(range(n)), vector.orders, powers.powers)
    elif strategy is Strategy.JCFP:

        def evaluate_k(k: int) -> Optional[_Candidate]:
            return inst.best_of(range(k), [_uniform_vector(k, n, budget.m_min)], stats)

        best = _truncation_search(inst, evaluate_k, options.early_stop, stats)
    else:

        def evaluate_k(k: int) -> Optional[_Candidate]:
            vector = _uniform_vector(k, n, budget.m_min)
            powers, _ = waterfill(inst.gammas[:k], inst.total_power)
            stats.candidates_evaluated += 1
            j = inst.distortion(range(k), vector.orders, powers)
            return _Candidate(j, tuple(range(k)), vector.orders, tuple(float(p) for p in powers))

        best = _truncation_search(inst, evaluate_k, options.early_stop, stats)

    assert best is not None
    return _finish(w, inst, best, strategy, stats)


def solve(
    strategy: "str | Strategy",
    w: ImportanceProfile,
    ch: ChannelState,
    budget: ResourceBudget,
    options: SolveOptions = SolveOptions(),
) -> tuple[AllocationPlan, DistortionReport]:
    """Dispatch to the solver for any strategy name."""
    strategy = Strategy.parse(strategy)
    if strategy is Strategy.JCFMP:
        return solve_ophd(w, ch, budget, options)
    if strategy is Strategy.JCFMP_ES:
        return exhaustive_oracle(w, ch, budget)
    return solve_baseline(strategy, w, ch, budget, options)


def audit_constraints(
    plan: AllocationPlan,
    w: ImportanceProfile,
    ch: ChannelState,
    budget: ResourceBudget,
) -> list[str]:
    """
    List the constraints C1-C8 a plan violates.

    Returns:
        Human-readable violation messages; empty for a valid plan.
    """
    violations = []
    n = w.n_features
    budget_total = n * budget.p_max
    if math.fsum(plan.powers) > budget_total * (1 + BUDGET_TOLERANCE) + BUDGET_TOLERANCE:
        violations.append(f"C1: powers sum to {math.fsum(plan.powers)} > {budget_total}")
    if any(p < 0 for p in plan.powers):
        violations.append("C2: negative power")
    if any(m not in MOD_ORDERS for m in plan.orders):
        violations.append(f"C4: orders {plan.orders} outside {MOD_ORDERS}")
    elif 1 <= plan.k <= n and not ModVector(plan.orders).meets_rate(n, budget.m_min):
        violations.append(f"C3: {sum(plan.orders)} bits below the rate requirement")
    perm = plan.matching.permutation
    if sorted(perm) != list(range(n)):
        violations.append("C5-C7: matching is not a bijection")
    elif any(plan.matching.sorted_gammas[j] != ch.gammas[perm[j]] for j in range(n)):
        violations.append("C5-C7: matched SNRs disagree with the channel state")
    if not 1 <= plan.k <= n:
        violations.append(f"C8: k={plan.k} outside [1, {n}]")
    if not (plan.k == len(plan.orders) == len(plan.powers) == len(set(plan.retained))):
        violations.append("C8: plan fields disagree with k")
    return violations
