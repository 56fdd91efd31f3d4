"""Shared plumbing for the replicate loops.

Each block stream is split into a covariate child (index 0) and an
auxiliary child (index 1, noise / priors / extra rows).  Any two drivers run
with the same ``RngStream`` and ``n`` therefore see identical covariate draws,
which is what the paired identity checks rely on.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateDesignError
from .linalg import batch_sample_covariance, inverse_sqrt, singular_mask
from .models import CovariateModel
from .rng import RngStream
from .stats import RiskEstimate

MAX_DEGENERATE_FRACTION = 0.01


def draw_designs(model: CovariateModel, block: RngStream, size: int, n: int) -> NDArray[np.float64]:
    return model.draw(block.child(0).generator(), (size, n))


def aux_generator(block: RngStream) -> np.random.Generator:
    return block.child(1).generator()


def whitened_designs(model: CovariateModel, X: NDArray[np.float64]) -> NDArray[np.float64]:
    """Rows mapped through ``Sigma^{-1/2}`` (skipped when Sigma is the identity)."""
    Sigma = model.covariance
    if np.array_equal(Sigma, np.eye(model.d)):
        return X
    return X @ inverse_sqrt(Sigma)


def eigh_stack(S: NDArray[np.float64]):
    """Eigendecomposition of a stack plus its singularity flags."""
    w, V = np.linalg.eigh(S)
    return w, V, singular_mask(w)


def trace_inverse_stack(S: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    w = np.linalg.eigvalsh(S)
    bad = singular_mask(w)
    with np.errstate(divide="ignore"):
        tr = np.sum(1.0 / np.where(bad[:, None], 1.0, w), axis=1)
    return tr, bad


def sample_covariance_stack(X: NDArray[np.float64]) -> NDArray[np.float64]:
    return batch_sample_covariance(X)


def summarize(values: NDArray[np.float64], bad: NDArray[np.bool_], what: str,
              max_fraction: float = MAX_DEGENERATE_FRACTION) -> RiskEstimate:
    """Apply the degenerate-draw policy: skip singular draws, abort above 1%."""
    n_bad = int(np.count_nonzero(bad))
    if n_bad > max_fraction * bad.size:
        raise DegenerateDesignError(
            f"{what}: {n_bad} of {bad.size} draws were singular "
            f"(> {max_fraction:.0%}); is the design degenerate or n too small?"
        )
    return RiskEstimate.from_samples(values[~bad], degenerate_events=n_bad)
