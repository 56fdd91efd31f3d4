"""Monte Carlo summaries: normal-interval means and exact binomial intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats

__all__ = [
    "RiskEstimate",
    "ProportionEstimate",
    "clopper_pearson",
    "within_stderr",
    "paired_difference",
    "stderr_shrink_ratio",
]

Z95 = float(stats.norm.ppf(0.975))
# expected ~0.707 for a finite-variance mean
NONCONVERGENCE_RATIO = 0.9


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    stderr: float
    replicates: int
    ci_low: float
    ci_high: float
    degenerate_events: int = 0
    shrink_ratio: float = float("nan")

    @classmethod
    def from_samples(cls, values: ArrayLike, degenerate_events: int = 0) -> "RiskEstimate":
        values = np.asarray(values, dtype=np.float64)
        r = values.size
        if r == 0:
            raise ValueError("no replicates to summarize")
        mean = float(np.mean(values))
        se = float(np.std(values, ddof=1) / math.sqrt(r)) if r > 1 else 0.0
        ratio = stderr_shrink_ratio(values) if r >= 4 else float("nan")
        return cls(mean, se, r, mean - Z95 * se, mean + Z95 * se, degenerate_events, ratio)

    @property
    def converging(self) -> bool:
        """False when doubling the replicates failed to shrink the stderr."""
        return not self.shrink_ratio > NONCONVERGENCE_RATIO

    def as_dict(self) -> dict:
        return {
            "estimate": self.mean,
            "stderr": self.stderr,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "replicates": self.replicates,
            "degenerate_events": self.degenerate_events,
        }


def clopper_pearson(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Exact two-sided binomial interval."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials and trials >= 1")
    alpha = 1.0 - level
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(alpha / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(stats.beta.ppf(1 - alpha / 2, successes + 1, trials - successes))
    return lo, hi


@dataclass(frozen=True)
class ProportionEstimate:
    """Event frequency with an exact Clopper-Pearson interval."""

    successes: int
    trials: int
    frequency: float
    ci_low: float
    ci_high: float

    @classmethod
    def from_counts(cls, successes: int, trials: int, level: float = 0.95) -> "ProportionEstimate":
        lo, hi = clopper_pearson(successes, trials, level)
        return cls(int(successes), int(trials), successes / trials, lo, hi)

    @property
    def stderr(self) -> float:
        p = self.frequency
        return math.sqrt(p * (1 - p) / self.trials)


def within_stderr(a: RiskEstimate, b: RiskEstimate | float, k: float = 3.0) -> bool:
    """``|a - b| <= k * combined stderr`` for independent estimates."""
    if isinstance(b, RiskEstimate):
        return abs(a.mean - b.mean) <= k * math.hypot(a.stderr, b.stderr)
    return abs(a.mean - b) <= k * a.stderr


def paired_difference(x: ArrayLike, y: ArrayLike) -> RiskEstimate:
    """Estimate of ``E[x - y]`` from paired replicates."""
    return RiskEstimate.from_samples(np.asarray(x) - np.asarray(y))


def stderr_shrink_ratio(values: ArrayLike) -> float:
    """stderr on the full sample over stderr on its first half.

    About 1/sqrt(2) for a finite-variance mean; values near or above 1 signal
    that the estimate is not converging.
    """
    values = np.asarray(values, dtype=np.float64)
    half = values.size // 2
    if half < 2:
        raise ValueError("need at least 4 replicates")
    se_half = np.std(values[:half], ddof=1) / math.sqrt(half)
    se_full = np.std(values, ddof=1) / math.sqrt(values.size)
    return float(se_full / se_half) if se_half > 0 else 0.0
