"""
Monte Carlo sweeps over SNR, power and rate budgets.

Each (grid point, trial) task samples one channel, solves it with every
configured strategy and optionally runs the link simulator on the result.
The channel seed depends only on the SNR grid index and the trial index, so
all strategies and all power and rate settings at the same SNR see the
same channel draws. Tasks are independent; results are sorted back into
task order before aggregation, so the table does not depend on the number
of workers.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel

from uepopt.core.errors import DomainError
from uepopt.core.importance import ImportanceProfile
from uepopt.core.matching import ChannelState
from uepopt.core.solver import ResourceBudget, SolveOptions, solve
from uepopt.harness.config import ExperimentConfig
from uepopt.sim.link import (
    DEFAULT_N_BITS,
    FadingChannel,
    Quantizer,
    end_to_end_run,
    synthetic_features,
)
from uepopt.sim.streams import derive_seed

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"


class ResultRow(BaseModel):
    """One aggregated line of the result table."""

    gamma_avg_db: float
    p_max: float
    m_min: float
    strategy: str
    trials: int
    mean_j: float
    std_j: float
    stderr_j: float
    mean_k: float
    mean_ber: float
    mean_candidates: float
    mean_newton_iterations: float
    mean_j_empirical: Optional[float] = None


RESULT_COLUMNS = list(ResultRow.model_fields)


def sample_channel(
    gamma_avg_db: float,
    spread_db: float,
    n_features: int,
    seed: int,
    domain: str = "db",
) -> ChannelState:
    """
    Draw N normalized SNRs around an average.

    In the "db" domain each SNR is uniform on [gamma_avg - spread,
    gamma_avg + spread] dB; in the "linear" domain it is uniform between
    the two linear endpoints.

    Raises:
        DomainError: On a negative spread or an unknown domain.
    """
    if spread_db < 0:
        raise DomainError(f"spread must be non-negative, got {spread_db}")
    if n_features < 1:
        raise DomainError("n_features must be at least 1")
    rng = np.random.default_rng(seed)
    low, high = gamma_avg_db - spread_db, gamma_avg_db + spread_db
    if domain == "db":
        gammas = 10.0 ** (rng.uniform(low, high, size=n_features) / 10.0)
    elif domain == "linear":
        gammas = rng.uniform(10.0 ** (low / 10.0), 10.0 ** (high / 10.0), size=n_features)
    else:
        raise DomainError(f"unknown spread domain {domain!r}")
    return ChannelState.from_values(gammas)


def _run_task(
    cfg: ExperimentConfig,
    profile: ImportanceProfile,
    point_index: int,
    trial: int,
) -> list[dict]:
    gamma_avg_db, p_max, m_min = cfg.grid[point_index]
    gamma_index = point_index // (len(cfg.p_max) * len(cfg.m_min))
    channel_seed = derive_seed(cfg.seed, gamma_index, trial)
    ch = sample_channel(
        gamma_avg_db, cfg.spread_db, cfg.n_features, channel_seed, cfg.spread_domain
    )
    budget = ResourceBudget(p_max=p_max, m_min=m_min, d_t=cfg.d_t)
    options = SolveOptions(early_stop=cfg.early_stop)

    records = []
    for strategy in cfg.strategies:
        plan, report = solve(strategy, profile, ch, budget, options)
        record = {
            "point": point_index,
            "trial": trial,
            "strategy": strategy.value,
            "j": report.total_j,
            "k": plan.k,
            "ber": float(np.mean(report.per_feature_ber)),
            "candidates": report.solve_stats.candidates_evaluated,
            "newton": report.solve_stats.newton_iterations,
            "j_empirical": math.nan,
        }
        if cfg.empirical_bits:
            length = max(1, math.ceil(cfg.empirical_bits / DEFAULT_N_BITS))
            sim_seed = derive_seed(cfg.seed, gamma_index, trial, 1)
            features = synthetic_features(cfg.n_features, length, sim_seed)
            channels = [
                FadingChannel.from_gamma(g, 1.0, sim_seed, feature=c)
                for c, g in enumerate(ch.gammas)
            ]
            measured = end_to_end_run(
                features, plan, profile, Quantizer.uniform(), channels, sim_seed, cfg.d_t
            )
            record["j_empirical"] = measured.total_j
        records.append(record)
    return records


def _run_task_star(args: tuple) -> list[dict]:
    return _run_task(*args)


def _aggregate(cfg: ExperimentConfig, frame: pd.DataFrame) -> pd.DataFrame:
    rows = []
    order = {s.value: i for i, s in enumerate(cfg.strategies)}
    frame = frame.assign(order=frame["strategy"].map(order))
    for (point, _), group in frame.groupby(["point", "order"], sort=True):
        gamma_avg_db, p_max, m_min = cfg.grid[point]
        count = len(group)
        std = float(group["j"].std(ddof=1)) if count > 1 else 0.0
        empirical = group["j_empirical"]
        rows.append(
            ResultRow(
                gamma_avg_db=gamma_avg_db,
                p_max=p_max,
                m_min=m_min,
                strategy=group["strategy"].iloc[0],
                trials=count,
                mean_j=float(group["j"].mean()),
                std_j=std,
                stderr_j=std / math.sqrt(count),
                mean_k=float(group["k"].mean()),
                mean_ber=float(group["ber"].mean()),
                mean_candidates=float(group["candidates"].mean()),
                mean_newton_iterations=float(group["newton"].mean()),
                mean_j_empirical=None if empirical.isna().all() else float(empirical.mean()),
            ).model_dump()
        )
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def run_trials(
    cfg: ExperimentConfig,
    on_task: Optional[Callable[[], None]] = None,
) -> pd.DataFrame:
    """
    Run every (grid point, trial) task and return the per-trial records.

    Args:
        cfg: Validated experiment config.
        on_task: Called once per finished task (progress reporting).
    """
    profile = cfg.weights.resolve(cfg.n_features)
    tasks = [(cfg, profile, p, t) for p in range(len(cfg.grid)) for t in range(cfg.trials)]
    logger.info(
        "running %d grid points x %d trials x %d strategies",
        len(cfg.grid),
        cfg.trials,
        len(cfg.strategies),
    )

    records: list[dict] = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunksize = max(1, len(tasks) // (4 * cfg.workers))
            for batch in pool.map(_run_task_star, tasks, chunksize=chunksize):
                records.extend(batch)
                if on_task:
                    on_task()
    else:
        for task in tasks:
            records.extend(_run_task(*task))
            if on_task:
                on_task()

    frame = pd.DataFrame.from_records(records)
    return frame.sort_values(["point", "trial"], kind="stable").reset_index(drop=True)


def run_experiment(
    cfg: ExperimentConfig,
    on_task: Optional[Callable[[], None]] = None,
) -> pd.DataFrame:
    """
    Run a sweep and aggregate per grid point and strategy.

    Returns:
        DataFrame with one row per (grid point, strategy), columns as ResultRow.
    """
    table = _aggregate(cfg, run_trials(cfg, on_task))
    logger.info("sweep finished: %d result rows", len(table))
    return table


def write_results(table: pd.DataFrame, path: str | Path, json_mirror: bool = False) -> Path:
    """Write the result table as CSV, and as JSON next to it when asked."""
    path = Path(path).expanduser()
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    if json_mirror:
        table.to_json(path.with_suffix(".json"), orient="records", indent=2, double_precision=12)
    return path
