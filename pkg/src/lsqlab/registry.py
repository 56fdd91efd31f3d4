"""Named noise-shape functions that configs can refer to.

Each entry is a factory taking the noise level ``sigma2`` and returning a
function of ``X`` (shape ``(..., d)``).  The ``half`` variants use half of
the variance budget so that a mean and an sd can be combined.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

Factory = Callable[[float], Callable[[np.ndarray], np.ndarray]]


def _constant(level: float):
    s = math.sqrt(level)
    return lambda X: np.full(np.shape(X)[:-1], s)


def _half_constant(level: float):
    s = math.sqrt(level / 2)
    return lambda X: np.full(np.shape(X)[:-1], s)


def _tanh_first(level: float):
    s = math.sqrt(level)
    return lambda X: s * np.abs(np.tanh(np.asarray(X)[..., 0]))


def _radial(level: float):
    s = math.sqrt(level)

    def sd(X):
        X = np.asarray(X)
        return s * np.minimum(1.0, np.linalg.norm(X, axis=-1) / math.sqrt(X.shape[-1]))

    return sd


def _even_cosine(level: float):
    # even in X, hence orthogonal to X for symmetric designs
    a = math.sqrt(level / 2)
    return lambda X: a * np.cos(np.linalg.norm(np.asarray(X), axis=-1))


def _even_square(level: float):
    a = math.sqrt(level / 2)
    return lambda X: a * np.tanh(np.asarray(X)[..., 0] ** 2 - 1.0)


NOISE_SDS: dict[str, Factory] = {
    "constant": _constant,
    "half_constant": _half_constant,
    "tanh_first": _tanh_first,
    "radial": _radial,
}

NOISE_MEANS: dict[str, Factory] = {
    "even_cosine": _even_cosine,
    "even_square": _even_square,
}
