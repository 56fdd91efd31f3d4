"""Exact minimax risk of least squares, leverage scores and risk envelopes.

The minimax excess risk over well-specified problems with noise level
``sigma2`` equals ``(sigma2 / n) E[Tr(Sigma~_n^{-1})]``; the Monte Carlo
drivers here estimate that functional and its equivalent leverage form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .envelope import BoundEnvelope, c_prime
from .errors import PreconditionError, SingularMatrixError
from .linalg import SINGULAR_RTOL, _as_square, _check_symmetric, singular_mask
from .mc import draw_designs, summarize, trace_inverse_stack, whitened_designs
from .models import CovariateModel
from .rng import RngStream, run_blocks
from .stats import ProportionEstimate, RiskEstimate

__all__ = [
    "minimax_risk_mc",
    "estimation_risk_mc",
    "LeverageSample",
    "leverage_scores",
    "sherman_morrison_leverage",
    "LeverageIdentity",
    "leverage_identity_mc",
    "minimax_lower_bound",
    "gaussian_exact_risk",
    "upper_bound_well_specified",
    "upper_bound_misspecified",
    "trace_inverse_approx_check",
    "degeneracy_probe",
    "leverage_trend_highdim",
]


def _require_n_ge_d(n: int, d: int) -> None:
    if n < d:
        raise PreconditionError(f"need n >= d, got n={n}, d={d}", "n >= d")


def _trace_risk(model: CovariateModel, n: int, sigma2: float, replicates: int, rng: RngStream,
                threads, whiten: bool, what: str) -> RiskEstimate:
    _require_n_ge_d(n, model.d)

    def kernel(block: RngStream, size: int) -> dict[str, np.ndarray]:
        X = draw_designs(model, block, size, n)
        if whiten:
            X = whitened_designs(model, X)
        tr, bad = trace_inverse_stack(np.einsum("rni,rnj->rij", X, X) / n)
        return {"value": sigma2 / n * tr, "bad": bad}

    out = run_blocks(kernel, replicates, rng, threads)
    return summarize(out["value"], out["bad"], what)


def minimax_risk_mc(model: CovariateModel, n: int, sigma2: float, replicates: int, rng: RngStream,
                    threads: int | str | None = 1) -> RiskEstimate:
    """Monte Carlo estimate of ``(sigma2 / n) E[Tr(Sigma~_n^{-1})]``.

    ``Sigma~_n`` is the sample covariance of the whitened rows.  Singular
    draws are skipped and counted; more than 1% of them aborts with
    :class:`~lsqlab.errors.DegenerateDesignError`.  Check
    ``estimate.converging`` when the functional may be infinite.
    """
    return _trace_risk(model, n, sigma2, replicates, rng, threads, True, "minimax risk")


def estimation_risk_mc(model: CovariateModel, n: int, sigma2: float, replicates: int, rng: RngStream,
                       threads: int | str | None = 1) -> RiskEstimate:
    """Monte Carlo estimate of ``(sigma2 / n) E[Tr(Sigma_hat_n^{-1})]`` (parameter error)."""
    return _trace_risk(model, n, sigma2, replicates, rng, threads, False, "estimation risk")


@dataclass(frozen=True)
class LeverageSample:
    scores: NDArray[np.float64]
    m: int

    @property
    def d(self) -> int:
        return int(round(self.scores.sum()))


def _gram_inverse_quadratic(G: NDArray, rows: NDArray) -> tuple[NDArray, NDArray]:
    """``<G^{-1} x, x>`` for rows of stacked Gram matrices, plus singular flags."""
    w, V = np.linalg.eigh(G)
    bad = singular_mask(w)
    winv = 1.0 / np.where(bad[..., None], 1.0, w)
    proj = np.einsum("...ni,...ik->...nk", rows, V)
    return np.einsum("...nk,...k->...n", proj**2, winv), bad


def leverage_scores(X_pooled: ArrayLike) -> LeverageSample:
    """Leverage ``<(sum_j X_j X_j^T)^{-1} X_i, X_i>`` of every row."""
    X = np.asarray(X_pooled, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X_pooled must be an m x d matrix")
    G = X.T @ X
    w = np.linalg.eigvalsh(G)
    if singular_mask(w):
        raise SingularMatrixError("pooled Gram matrix is singular", float(w[0]))
    scores, _ = _gram_inverse_quadratic(G, X)
    return LeverageSample(np.clip(scores, 0.0, 1.0), X.shape[0])


def sherman_morrison_leverage(S: ArrayLike, v: ArrayLike) -> tuple[float, float]:
    """Both sides of ``<S^{-1} v, v> = u / (1 - u)``, ``u = <(S + v v^T)^{-1} v, v>``."""
    S = _as_square(S)
    _check_symmetric(S)
    v = np.asarray(v, dtype=np.float64)
    w, V = np.linalg.eigh(S)
    if not w[0] > SINGULAR_RTOL * np.sum(w) / len(w):
        raise SingularMatrixError("S must be positive definite", float(w[0]))
    lhs = float(np.sum((V.T @ v) ** 2 / w))
    w2, V2 = np.linalg.eigh(S + np.outer(v, v))
    u = float(np.sum((V2.T @ v) ** 2 / w2))
    if not 0.0 <= u < 1.0:
        raise ArithmeticError(f"updated leverage {u} outside [0, 1)")
    return lhs, u / (1.0 - u)


@dataclass(frozen=True)
class LeverageIdentity:
    trace_form: RiskEstimate
    leverage_form: RiskEstimate
    difference: RiskEstimate  # paired trace_form - leverage_form
    leverage_mean: RiskEstimate  # mean leverage of the designated point


def leverage_identity_mc(model: CovariateModel, n: int, sigma2: float, replicates: int, rng: RngStream,
                         threads: int | str | None = 1, designated: str = "last") -> LeverageIdentity:
    """The minimax functional in trace form and in leverage form, on shared draws.

    Each replicate draws ``n + 1`` rows.  The trace form uses the first ``n``;
    the leverage form is ``sigma2 * l / (1 - l)`` where ``l`` is the leverage
    of the designated row among all ``n + 1`` (the last row, or a uniformly
    chosen one when ``designated="random"``).
    """
    _require_n_ge_d(n, model.d)
    if designated not in ("last", "random"):
        raise ValueError("designated must be 'last' or 'random'")

    def kernel(block: RngStream, size: int) -> dict[str, np.ndarray]:
        X = draw_designs(model, block, size, n + 1)
        Xt = whitened_designs(model, X)
        head = Xt[:, :n]
        tr, bad_tr = trace_inverse_stack(np.einsum("rni,rnj->rij", head, head) / n)
        if designated == "last":
            idx = np.full(size, n)
        else:
            idx = block.child(1).generator().integers(0, n + 1, size)
        G = np.einsum("rni,rnj->rij", X, X)
        point = X[np.arange(size), idx][:, None, :]
        lev, bad_g = _gram_inverse_quadratic(G, point)
        lev = np.clip(lev[:, 0], 0.0, 1.0)
        with np.errstate(divide="ignore"):
            ratio = lev / (1.0 - lev)
        bad = bad_tr | bad_g | ~np.isfinite(ratio)
        return {"trace": sigma2 / n * tr, "lev_form": sigma2 * ratio, "lev": lev, "bad": bad}

    out = run_blocks(kernel, replicates, rng, threads)
    bad = out["bad"]
    what = "leverage identity"
    return LeverageIdentity(
        summarize(out["trace"], bad, what),
        summarize(out["lev_form"], bad, what),
        summarize(np.where(bad, 0.0, out["trace"] - out["lev_form"]), bad, what),
        summarize(out["lev"], bad, what),
    )


def minimax_lower_bound(d: int, n: int, sigma2: float) -> BoundEnvelope:
    """Distribution-free lower bound ``sigma2 d / (n - d + 1)``."""
    if d < 1:
        raise PreconditionError("dimension must be positive", "d >= 1")
    _require_n_ge_d(n, d)
    if sigma2 < 0:
        raise PreconditionError("sigma2 must be nonnegative", "sigma2 >= 0")
    return BoundEnvelope("minimax_lower_bound", sigma2 * d / (n - d + 1), {"d": d, "n": n, "sigma2": sigma2})


def gaussian_exact_risk(d: int, n: int, sigma2: float) -> BoundEnvelope:
    """Exact minimax risk ``sigma2 d / (n - d - 1)`` for centered Gaussian design."""
    if n <= d + 1:
        raise PreconditionError(
            f"Gaussian-design risk is infinite for n <= d + 1 (got n={n}, d={d})", "n >= d + 2"
        )
    return BoundEnvelope("gaussian_exact_risk", sigma2 * d / (n - d - 1), {"d": d, "n": n, "sigma2": sigma2})


def _check_small_ball_constants(alpha: float, C: float, kappa: float) -> None:
    if not 0 < alpha <= 1:
        raise PreconditionError(f"alpha must be in (0, 1], got {alpha}", "small-ball exponent alpha in (0, 1]")
    if C < 1:
        raise PreconditionError(f"small-ball constant must be >= 1, got {C}", "small-ball constant C >= 1")
    if kappa < 1:
        raise PreconditionError(f"kurtosis constant must be >= 1, got {kappa}", "kurtosis constant kappa >= 1")


def upper_bound_well_specified(d: int, n: int, alpha: float, C: float, kappa: float,
                               sigma2: float) -> BoundEnvelope:
    """``sigma2 (d/n) (1 + 8 C' kappa d / n)`` under small-ball and norm-kurtosis conditions."""
    _check_small_ball_constants(alpha, C, kappa)
    need = min(6 * d / alpha, 12 / alpha * math.log(12 / alpha))
    if n < need:
        raise PreconditionError(
            f"well-specified upper bound needs n >= {need:.4g}, got n={n}",
            "n >= min(6 d / alpha, 12 / alpha * log(12 / alpha))",
        )
    cp = c_prime(C, alpha)
    ratio = d / n
    return BoundEnvelope(
        "upper_bound_well_specified",
        sigma2 * ratio * (1 + 8 * cp * kappa * ratio),
        {"C": C, "alpha": alpha, "kappa": kappa, "C_prime": cp},
    )


def upper_bound_misspecified(d: int, n: int, alpha: float, C: float, kappa: float,
                             sigma2: float) -> BoundEnvelope:
    """``sigma2 (d/n) (1 + 276 C'^2 kappa sqrt(d/n))`` for misspecified problems."""
    _check_small_ball_constants(alpha, C, kappa)
    need = max(96, 6 * d) / alpha
    if n < need:
        raise PreconditionError(
            f"misspecified upper bound needs n >= {need:.4g}, got n={n}", "n >= max(96, 6 d) / alpha"
        )
    cp = c_prime(C, alpha)
    ratio = d / n
    return BoundEnvelope(
        "upper_bound_misspecified",
        sigma2 * ratio * (1 + 276 * cp**2 * kappa * math.sqrt(ratio)),
        {"C": C, "alpha": alpha, "kappa": kappa, "C_prime": cp},
    )


def trace_inverse_approx_check(A: ArrayLike, p: float) -> tuple[float, float]:
    """``(Tr(A^-1) + Tr(A) - 2d, max(1, 1/lambda_min) Tr(|A - I|^{2/p}))``; lhs <= rhs."""
    if not 1 <= p <= 2:
        raise PreconditionError(f"p must lie in [1, 2], got {p}", "p in [1, 2]")
    A = _as_square(A)
    _check_symmetric(A)
    w = np.linalg.eigvalsh(A)
    if not w[0] > SINGULAR_RTOL * np.sum(w) / len(w):
        raise SingularMatrixError("A must be positive definite", float(w[0]))
    # Tr(A^-1) + Tr(A) - 2d summed as (w - 1)^2 / w to avoid cancellation
    lhs = float(np.sum((w - 1.0) ** 2 / w))
    rhs = float(max(1.0, 1.0 / w[0]) * np.sum(np.abs(w - 1.0) ** (2.0 / p)))
    return lhs, rhs


def degeneracy_probe(model: CovariateModel, n: int, replicates: int, rng: RngStream,
                     threads: int | str | None = 1) -> ProportionEstimate:
    """Frequency of singular sample covariances, with an exact binomial interval."""

    def kernel(block: RngStream, size: int) -> dict[str, np.ndarray]:
        X = draw_designs(model, block, size, n)
        w = np.linalg.eigvalsh(np.einsum("rni,rnj->rij", X, X) / n)
        return {"bad": singular_mask(w)}

    bad = run_blocks(kernel, replicates, rng, threads)["bad"]
    return ProportionEstimate.from_counts(int(np.count_nonzero(bad)), bad.size)


def leverage_trend_highdim(family: Callable[[int], CovariateModel], ns: Sequence[int], gamma: float,
                           replicates: int, rng: RngStream, threads: int | str | None = 1,
                           quantiles: Sequence[float] = (0.25, 0.5, 0.75, 0.9)) -> list[dict]:
    """Dispersion of one leverage score among ``n + 1`` around ``gamma``, per ``n``.

    ``family(n)`` returns the design in dimension ``d_n``.  Reported only as a
    trend; no pass/fail threshold is attached.
    """
    if not 0 <= gamma < 1:
        raise PreconditionError(f"gamma must be in [0, 1), got {gamma}", "gamma in [0, 1)")
    rows = []
    for k, n in enumerate(ns):
        model = family(n)
        sub = rng.child(k)

        def kernel(block: RngStream, size: int, model=model, n=n) -> dict[str, np.ndarray]:
            X = draw_designs(model, block, size, n + 1)
            G = np.einsum("rni,rnj->rij", X, X)
            lev, bad = _gram_inverse_quadratic(G, X[:, n:])
            return {"lev": lev[:, 0], "bad": bad}

        out = run_blocks(kernel, replicates, sub, threads)
        lev = out["lev"][~out["bad"]]
        dev = np.abs(lev - gamma)
        row = {
            "n": int(n),
            "d": model.d,
            "mean_leverage": float(lev.mean()),
            "expected_mean": model.d / (n + 1),
            "mean_abs_dev": float(dev.mean()),
            "degenerate_events": int(np.count_nonzero(out["bad"])),
        }
        for q in quantiles:
            row[f"q{int(round(100 * q))}_abs_dev"] = float(np.quantile(dev, q))
        rows.append(row)
    return rows
