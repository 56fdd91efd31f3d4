"""Closed-form bound values and the lower-tail constant they share."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

__all__ = ["BoundEnvelope", "c_prime", "log_c_prime", "safe_exp"]


@dataclass(frozen=True)
class BoundEnvelope:
    name: str
    value: float
    constants_used: dict[str, Any] = field(default_factory=dict)
    vacuous: bool = False
    note: str = ""

    def __float__(self) -> float:
        return self.value


def log_c_prime(C: float, alpha: float) -> float:
    return math.log(3.0) + 4.0 * math.log(C) + 1.0 + 9.0 / alpha


def c_prime(C: float, alpha: float) -> float:
    """Lower-tail constant ``3 C^4 exp(1 + 9 / alpha)``."""
    if not C > 0 or not 0 < alpha <= 1:
        raise ValueError("need C > 0 and alpha in (0, 1]")
    return math.exp(log_c_prime(C, alpha))


def safe_exp(x: float) -> float:
    """exp that saturates to inf instead of raising."""
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf
