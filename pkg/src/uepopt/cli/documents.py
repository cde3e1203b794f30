"""
JSON documents exchanged by the CLI.

`uepopt solve --json` prints a SolveDocument; `uepopt simulate --plan`
reads one back, so a plan can be solved once and simulated many times.
"""

from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ValidationError

from uepopt.core.errors import ConfigError
from uepopt.core.importance import ImportanceProfile
from uepopt.core.matching import ChannelState, Matching
from uepopt.core.solver import AllocationPlan, DistortionReport, ResourceBudget


class InstanceModel(BaseModel):
    """Problem instance."""

    weights: list[float]
    gammas: list[float]
    p_max: float
    m_min: float
    d_t: float

    def profile(self) -> ImportanceProfile:
        return ImportanceProfile(tuple(self.weights))

    def channel(self) -> ChannelState:
        return ChannelState.from_values(self.gammas)

    def budget(self) -> ResourceBudget:
        return ResourceBudget(p_max=self.p_max, m_min=self.m_min, d_t=self.d_t)


class PlanModel(BaseModel):
    """Allocation plan; per-feature lists are in rank order."""

    strategy: str
    k: int
    retained: list[int]
    discarded: list[int]
    orders: list[int]
    powers: list[float]
    permutation: list[int]
    matched_gammas: list[float]
    rank_order: list[int]

    def to_plan(self) -> AllocationPlan:
        matching = Matching(
            permutation=tuple(self.permutation),
            sorted_gammas=tuple(self.matched_gammas),
            feature_order=tuple(self.rank_order),
        )
        return AllocationPlan(
            k=self.k,
            matching=matching,
            orders=tuple(self.orders),
            powers=tuple(self.powers),
            retained=tuple(self.retained),
        )


class StatsModel(BaseModel):
    k_visited: list[int]
    candidates_evaluated: int
    newton_iterations: int
    bisection_iterations: int
    best_j_by_k: dict[str, float]


class ReportModel(BaseModel):
    """Distortion of a plan."""

    per_feature_ber: list[float]
    transmission_term: float
    truncation_term: float
    total_j: float
    solve_stats: Optional[StatsModel] = None


class SolveDocument(BaseModel):
    """Instance, plan and report of one solve."""

    instance: InstanceModel
    plan: PlanModel
    report: ReportModel

    @classmethod
    def build(
        cls,
        w: ImportanceProfile,
        ch: ChannelState,
        budget: ResourceBudget,
        plan: AllocationPlan,
        report: DistortionReport,
    ) -> "SolveDocument":
        stats = report.solve_stats
        return cls(
            instance=InstanceModel(
                weights=list(w.weights),
                gammas=list(ch.gammas),
                p_max=budget.p_max,
                m_min=budget.m_min,
                d_t=budget.d_t,
            ),
            plan=PlanModel(
                strategy=report.strategy_name,
                k=plan.k,
                retained=list(plan.retained),
                discarded=list(plan.discarded),
                orders=list(plan.orders),
                powers=list(plan.powers),
                permutation=list(plan.matching.permutation),
                matched_gammas=list(plan.matching.sorted_gammas),
                rank_order=list(plan.matching.feature_order),
            ),
            report=ReportModel(
                per_feature_ber=list(report.per_feature_ber),
                transmission_term=report.transmission_term,
                truncation_term=report.truncation_term,
                total_j=report.total_j,
                solve_stats=StatsModel(
                    k_visited=list(stats.k_visited),
                    candidates_evaluated=stats.candidates_evaluated,
                    newton_iterations=stats.newton_iterations,
                    bisection_iterations=stats.bisection_iterations,
                    best_j_by_k={str(k): j for k, j in stats.best_j_by_k.items()},
                ),
            ),
        )


def load_document(path: str | Path) -> SolveDocument:
    """
    Read a SolveDocument written by `uepopt solve --json`.

    Raises:
        ConfigError: On a missing or invalid file.
    """
    path = Path(path).expanduser()
    if not path.exists():
        raise ConfigError(f"plan file not found: {path}")
    try:
        return SolveDocument.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        fields = [".".join(str(p) for p in err["loc"]) for err in exc.errors()]
        raise ConfigError(f"invalid plan document {path}", fields) from None
