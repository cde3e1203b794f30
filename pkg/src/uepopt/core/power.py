"""
Power allocation for a fixed feature set and fixed modulation orders.

Minimizes sum_j w_j * mu_j(p_j) subject to sum_j p_j <= N * P_max. Each
mu_j is strictly convex and decreasing in p_j, so the optimum spends the
whole budget and equalizes the marginals

    t_j(p) = w_j * sqrt(d_j g_j / (pi p)) * [a_j exp(-d_j g_j p) + b_j c exp(-c^2 d_j g_j p)]

at a common multiplier lambda. For a given lambda each t_j is inverted by a
bracketed Newton iteration; lambda itself is found by a bracketing root
search on the budget residual. Both run on log scales: log t_j is smooth
and free of underflow where t_j itself would vanish.

Also provides the equal-power and waterfilling allocations used by the
baseline strategies.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from uepopt.core.ber_model import C_FACTOR, ber_array, coefficient_arrays
from uepopt.core.errors import DomainError, NumericalError

logger = logging.getLogger(__name__)

DUAL_TOLERANCE = 1e-5
NEWTON_TOLERANCE = 1e-12
NEWTON_MAX_ITERATIONS = 64
BRACKET_MAX_WIDENINGS = 60
LOW_POWER_FRACTION = 1e-6
MAX_LOG_POWER = 700.0


@dataclass(frozen=True)
class DualState:
    """Multiplier of the budget constraint and the budget residual (W)."""

    lam: float
    residual: float
    log_lam: Optional[float] = None


@dataclass(frozen=True)
class PowerVector:
    """Per-feature powers (W) in rank order, with solver diagnostics."""

    powers: tuple[float, ...]
    dual: Optional[DualState] = None
    newton_iterations: int = 0
    bisection_iterations: int = 0

    def __post_init__(self) -> None:
        if any(not (p >= 0 and math.isfinite(p)) for p in self.powers):
            raise DomainError("powers must be finite and non-negative")

    @property
    def total(self) -> float:
        return math.fsum(self.powers)

    def as_array(self) -> np.ndarray:
        return np.array(self.powers, dtype=float)


class MarginalProblem:
    """
    Weighted-sum BER of k features as a function of their powers.

    Args:
        weights: Importance weights of the retained features.
        orders: Modulation orders, bits per symbol.
        gammas: Matched normalized SNRs.
    """

    def __init__(self, weights: Sequence[float], orders: Sequence[int], gammas: Sequence[float]):
        self.weights = np.asarray(weights, dtype=float)
        self.orders = tuple(int(m) for m in orders)
        self.gammas = np.asarray(gammas, dtype=float)
        if not (len(self.weights) == len(self.orders) == len(self.gammas)):
            raise DomainError(
                f"dimension mismatch: {len(self.weights)} weights, {len(self.orders)} orders, "
                f"{len(self.gammas)} SNRs"
            )
        if np.any(self.weights <= 0) or np.any(self.gammas <= 0):
            raise DomainError("weights and SNRs must be strictly positive")
        self.a, self.b, d = coefficient_arrays(self.orders)
        self.g = d * self.gammas
        self._log_scale = np.log(self.weights) + 0.5 * np.log(self.g / math.pi)
        self._bc = self.b * C_FACTOR
        self._decay = C_FACTOR**2 - 1.0
        self.newton_iterations = 0

    @property
    def k(self) -> int:
        return len(self.weights)

    def _log_t(self, u: np.ndarray, idx: np.ndarray) -> np.ndarray:
        x = self.g[idx] * np.exp(u)
        inner = self.a[idx] + self._bc[idx] * np.exp(-self._decay * x)
        return self._log_scale[idx] - 0.5 * u - x + np.log(inner)

    def _dlog_t(self, u: np.ndarray, idx: np.ndarray) -> np.ndarray:
        x = self.g[idx] * np.exp(u)
        tail = self._bc[idx] * np.exp(-self._decay * x)
        ratio = (self.a[idx] + C_FACTOR**2 * tail) / (self.a[idx] + tail)
        return -0.5 - x * ratio

    def marginal_t(self, j: int, p: float) -> float:
        """
        Marginal distortion reduction t_j(p) = -w_j * dmu_j/dp.

        Raises:
            DomainError: If p <= 0.
        """
        if not p > 0:
            raise DomainError(f"marginal is undefined at p={p}")
        idx = np.array([j])
        return float(np.exp(self._log_t(np.array([math.log(p)]), idx))[0])

    def log_marginals(self, powers: np.ndarray) -> np.ndarray:
        """log t_j at the given powers; finite where t_j itself underflows."""
        powers = np.asarray(powers, dtype=float)
        if np.any(powers <= 0):
            raise DomainError("marginals are undefined at zero power")
        return self._log_t(np.log(powers), np.arange(self.k))

    def marginals(self, powers: np.ndarray) -> np.ndarray:
        return np.exp(self.log_marginals(powers))

    def _bracket(self, log_lam: float, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # upper: log t <= scale + log(a + bc) - u/2 - x, so u = 2R always works;
        # where x alone dominates, g e^u = |R| + 1 is much tighter
        reach = self._log_scale[idx] + np.log(self.a[idx] + self._bc[idx]) - log_lam
        hi = 2.0 * reach
        tight = np.log((np.abs(reach) + 1.0) / self.g[idx])
        usable = (tight < hi) & (self._log_t(tight, idx) < log_lam)
        hi = np.minimum(np.where(usable, tight, hi), MAX_LOG_POWER)
        # lower: u/2 + g e^u <= scale + log a - log lam guarantees t >= lam
        slack = self._log_scale[idx] + np.log(self.a[idx]) - log_lam
        lo = np.minimum(2.0 * (slack - 1.0), -np.log(self.g[idx]))
        lo = np.minimum(lo, hi - 1.0)
        return lo, hi

    def invert_all(self, lam: float, start: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Powers at which every marginal equals lam.

        Args:
            lam: Multiplier, strictly positive.
            start: Optional log-power warm start, one entry per feature.

        Returns:
            Powers (W), all strictly positive.

        Raises:
            DomainError: If lam <= 0.
            NumericalError: If Newton fails to converge within the cap.
        """
        if not lam > 0:
            raise DomainError(f"multiplier must be positive, got {lam}")
        return self.invert_log(math.log(lam), start)

    def invert_log(self, log_lam: float, start: Optional[np.ndarray] = None) -> np.ndarray:
        """Like invert_all, with the multiplier given as its logarithm."""
        if not math.isfinite(log_lam):
            raise DomainError(f"log multiplier must be finite, got {log_lam}")
        idx = np.arange(self.k)
        lo, hi = self._bracket(log_lam, idx)
        u = 0.5 * (lo + hi) if start is None else np.clip(start, lo, hi)
        active = np.ones(self.k, dtype=bool)
        # log t is of order |log_lam| at high SNR; resolve it to relative precision
        tolerance = NEWTON_TOLERANCE * max(1.0, abs(log_lam))

        for iteration in range(1, NEWTON_MAX_ITERATIONS + 1):
            sel = idx[active]
            f = self._log_t(u[sel], sel) - log_lam
            resolution = 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(u[sel]))
            collapsed = hi[sel] - lo[sel] <= resolution
            done = (np.abs(f) <= tolerance) | collapsed
            lo[sel] = np.where(f > 0, u[sel], lo[sel])
            hi[sel] = np.where(f < 0, u[sel], hi[sel])
            step = u[sel] - f / self._dlog_t(u[sel], sel)
            fallback = ~np.isfinite(step) | (step <= lo[sel]) | (step >= hi[sel])
            if np.any(fallback & ~done):
                logger.debug("newton step rejected for %d features", int(np.sum(fallback & ~done)))
            step = np.where(fallback, 0.5 * (lo[sel] + hi[sel]), step)
            u[sel] = np.where(done, u[sel], step)
            active[sel[done]] = False
            if not active.any():
                self.newton_iterations += iteration
                return np.exp(u)

        raise NumericalError(
            "Newton inversion of the marginal did not converge",
            {
                "log_lam": log_lam,
                "iterations": NEWTON_MAX_ITERATIONS,
                "unconverged": int(active.sum()),
                "bracket_width": float(np.max(hi[active] - lo[active])),
            },
        )

    def invert_t(self, j: int, lam: float) -> float:
        """Power at which feature j's marginal equals lam."""
        if not lam > 0:
            raise DomainError(f"multiplier must be positive, got {lam}")
        single = MarginalProblem(self.weights[[j]], [self.orders[j]], self.gammas[[j]])
        power = float(single.invert_all(lam)[0])
        self.newton_iterations += single.newton_iterations
        return power

    def objective(self, powers: np.ndarray) -> float:
        """Weighted BER sum at the given powers."""
        values = self.weights * ber_array(self.orders, powers, self.gammas)
        return math.fsum(values)


def allocate(
    weights: Sequence[float],
    orders: Sequence[int],
    gammas: Sequence[float],
    p_max: float,
    n_features: int,
) -> PowerVector:
    """
    Optimal powers for k features under the total budget N * P_max.

    Args:
        weights: Weights of the retained features, rank order.
        orders: Their modulation orders.
        gammas: Their matched normalized SNRs.
        p_max: Average per-channel power budget (W), strictly positive.
        n_features: Total feature count N; the budget does not shrink with k.

    Returns:
        PowerVector spending the full budget with equal marginals.

    Raises:
        DomainError: On a non-positive budget or inconsistent inputs.
        NumericalError: If the multiplier cannot be bracketed or the
            budget residual stays above tolerance.
    """
    if not p_max > 0:
        raise DomainError(f"power budget must be positive, got {p_max}")
    problem = MarginalProblem(weights, orders, gammas)
    budget = n_features * p_max
    k = problem.k
    if k == 1:
        log_lam = float(problem.log_marginals(np.array([budget]))[0])
        return PowerVector((budget,), DualState(math.exp(log_lam), 0.0, log_lam))

    warm: dict[str, np.ndarray] = {}

    def residual(log_lam: float) -> float:
        powers = problem.invert_log(log_lam, warm.get("u"))
        warm["u"] = np.log(powers)
        return math.log(math.fsum(powers)) - math.log(budget)

    # log space: at high SNR the marginals themselves underflow to zero
    log_lo = float(np.min(problem.log_marginals(np.full(k, budget))))
    log_hi = float(np.max(problem.log_marginals(np.full(k, budget * LOW_POWER_FRACTION / k))))
    widen = 1.0
    for _ in range(BRACKET_MAX_WIDENINGS):
        f_lo, f_hi = residual(log_lo), residual(log_hi)
        if f_lo >= 0 >= f_hi:
            break
        logger.debug("widening multiplier bracket [%g, %g]", log_lo, log_hi)
        if f_lo < 0:
            log_lo -= widen
        if f_hi > 0:
            log_hi += widen
        widen *= 2.0
    else:
        raise NumericalError(
            "could not bracket the budget multiplier",
            {"log_lam_lo": log_lo, "log_lam_hi": log_hi, "k": k},
        )

    log_lam, info = optimize.brentq(
        residual,
        log_lo,
        log_hi,
        xtol=1e-14,
        rtol=4 * np.finfo(float).eps,
        maxiter=200,
        full_output=True,
        disp=False,
    )
    if not info.converged:
        raise NumericalError(
            "budget multiplier search did not converge",
            {"iterations": info.iterations, "flag": info.flag},
        )

    lam = math.exp(log_lam)
    powers = problem.invert_log(log_lam, warm.get("u"))
    spent = math.fsum(powers)
    if abs(spent - budget) > DUAL_TOLERANCE * budget:
        raise NumericalError(
            "budget residual above tolerance",
            {"spent": spent, "budget": budget, "log_lam": log_lam},
        )
    if np.any(powers <= 0):
        raise NumericalError("a retained feature received no power", {"log_lam": log_lam})

    logger.debug(
        "allocated k=%d log_lam=%.6g newton=%d dual=%d",
        k,
        log_lam,
        problem.newton_iterations,
        info.iterations,
    )
    return PowerVector(
        powers=tuple(float(p) for p in powers),
        dual=DualState(lam, spent - budget, log_lam),
        newton_iterations=problem.newton_iterations,
        bisection_iterations=int(info.iterations),
    )


def equal_power(k: int, p_max: float, n_features: int) -> PowerVector:
    """Split the budget N * P_max evenly over k features."""
    if not p_max > 0:
        raise DomainError(f"power budget must be positive, got {p_max}")
    if k < 1:
        raise DomainError("k must be at least 1")
    share = n_features * p_max / k
    return PowerVector((share,) * k)


def waterfill(gammas: Sequence[float], total_power: float) -> tuple[np.ndarray, float]:
    """
    Classical waterfilling, p_j = max(0, 1/nu - 1/gamma_j), sum p_j = total.

    Channels are sorted by SNR; the weakest is dropped while the water
    level needed to keep it active would overspend the budget.

    Args:
        gammas: Normalized SNRs (linear).
        total_power: Power to distribute (W).

    Returns:
        Tuple of (powers in the input order, water level 1/nu).
    """
    gammas = np.asarray(gammas, dtype=float)
    if np.any(gammas <= 0):
        raise DomainError("normalized SNRs must be strictly positive")
    if not total_power > 0:
        raise DomainError(f"total power must be positive, got {total_power}")

    order = np.argsort(-gammas, kind="stable")
    inverse = 1.0 / gammas[order]
    active = gammas.size
    level = (total_power + inverse[:active].sum()) / active
    while active > 1 and level <= inverse[active - 1]:
        active -= 1
        level = (total_power + inverse[:active].sum()) / active

    powers = np.zeros(gammas.size)
    powers[order[:active]] = level - inverse[:active]
    return powers, float(level)
