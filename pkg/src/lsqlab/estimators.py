"""OLS and ridge fits, excess risk, and Monte Carlo risk decompositions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import PreconditionError, SingularMatrixError
from .linalg import SINGULAR_RTOL, sample_covariance
from .mc import aux_generator, draw_designs, eigh_stack, summarize, whitened_designs
from .models import CovariateModel, NoiseModel
from .rng import RngStream, run_blocks
from .stats import RiskEstimate

__all__ = [
    "RegressionSample",
    "make_regression_sample",
    "ols_fit",
    "ridge_fit",
    "excess_risk",
    "OLSRiskDecomposition",
    "ols_risk_decomposition_mc",
    "RidgeBayesRisk",
    "ridge_bayes_risk_mc",
]


@dataclass(frozen=True, eq=False)
class RegressionSample:
    X: NDArray[np.float64]
    y: NDArray[np.float64]
    beta_star: NDArray[np.float64]
    noise: NoiseModel


def make_regression_sample(model: CovariateModel, noise: NoiseModel, beta_star: ArrayLike,
                           n: int, rng: RngStream) -> RegressionSample:
    beta_star = np.asarray(beta_star, dtype=np.float64)
    X = model.draw(rng.child(0).generator(), (n,))
    eps = noise.sample(X, rng.child(1).generator())
    return RegressionSample(X, X @ beta_star + eps, beta_star, noise)


def _moment_vector(X: NDArray, y: NDArray) -> NDArray:
    return X.T @ y / X.shape[0]


def ols_fit(X: ArrayLike, y: ArrayLike) -> NDArray[np.float64]:
    """Least-squares coefficients via the eigendecomposition of ``X^T X / n``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if y.shape != (n,):
        raise ValueError("y must have one entry per row of X")
    if n < d:
        raise PreconditionError(f"OLS needs n >= d, got n={n}, d={d}", "n >= d")
    w, V = np.linalg.eigh(sample_covariance(X))
    if not w[0] > SINGULAR_RTOL * np.sum(w) / d:
        raise SingularMatrixError("sample covariance is singular", float(w[0]))
    return V @ ((V.T @ _moment_vector(X, y)) / w)


def ridge_fit(X: ArrayLike, y: ArrayLike, lam: float) -> NDArray[np.float64]:
    """Minimizer of ``mean squared residual + lam * ||beta||^2``."""
    if lam < 0:
        raise PreconditionError(f"ridge penalty must be nonnegative, got {lam}", "lambda >= 0")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if lam == 0:
        return ols_fit(X, y)
    w, V = np.linalg.eigh(sample_covariance(X))
    return V @ ((V.T @ _moment_vector(X, y)) / (w + lam))


def excess_risk(beta_hat: ArrayLike, beta_star: ArrayLike, Sigma: ArrayLike) -> float:
    diff = np.asarray(beta_hat, dtype=np.float64) - np.asarray(beta_star, dtype=np.float64)
    Sigma = np.asarray(Sigma, dtype=np.float64)
    if Sigma.shape != (diff.size, diff.size):
        raise ValueError("dimension mismatch between coefficients and covariance")
    return max(float(diff @ Sigma @ diff), 0.0)


@dataclass(frozen=True)
class OLSRiskDecomposition:
    total: RiskEstimate
    variance_term: RiskEstimate
    misspec_term: RiskEstimate
    difference: RiskEstimate  # paired total - (variance_term + misspec_term)


def ols_risk_decomposition_mc(model: CovariateModel, noise: NoiseModel, beta_star: ArrayLike,
                              n: int, replicates: int, rng: RngStream,
                              threads: int | str | None = 1, validate: bool = True) -> OLSRiskDecomposition:
    """Direct OLS excess risk next to the two terms of its exact decomposition.

    Per replicate: the misspecification term ``||Sigma~^{-1} (1/n) sum m(X_i) X~_i||^2``,
    the variance term ``(1/n^2) sum sd^2(X_i) ||Sigma~^{-1} X~_i||^2`` and the
    excess risk of an OLS fit on freshly drawn noise, all on the same design.
    """
    d = model.d
    if n < d:
        raise PreconditionError(f"need n >= d, got n={n}, d={d}", "n >= d")
    beta_star = np.asarray(beta_star, dtype=np.float64)
    if beta_star.shape != (d,):
        raise ValueError("beta_star must have length d")
    if validate:
        noise.validate(model, rng.child(2**32))
    Sigma = model.covariance

    def kernel(block: RngStream, size: int) -> dict[str, np.ndarray]:
        X = draw_designs(model, block, size, n)
        Xt = whitened_designs(model, X)
        w, V, bad_t = eigh_stack(np.einsum("rni,rnj->rij", Xt, Xt) / n)
        winv = 1.0 / np.where(bad_t[:, None], 1.0, w)
        m = noise.mean(X)
        sd2 = noise.sd(X) ** 2
        u = np.einsum("rn,rni->ri", m, Xt) / n
        u_rot = np.einsum("rik,ri->rk", V, u) * winv
        mis = np.sum(u_rot**2, axis=1)
        P = np.einsum("rni,rik->rnk", Xt, V) * winv[:, None, :]
        var = np.einsum("rn,rn->r", sd2, np.sum(P**2, axis=2)) / n**2

        eps = noise.sample(X, aux_generator(block))
        y = X @ beta_star + eps
        ws, Vs, bad_s = eigh_stack(np.einsum("rni,rnj->rij", X, X) / n)
        b = np.einsum("rni,rn->ri", X, y) / n
        coef = np.einsum("rik,ri->rk", Vs, b) / np.where(bad_s[:, None], 1.0, ws)
        beta_hat = np.einsum("rik,rk->ri", Vs, coef)
        diff = beta_hat - beta_star
        total = np.einsum("ri,ij,rj->r", diff, Sigma, diff)
        return {"total": total, "var": var, "mis": mis, "bad": bad_t | bad_s}

    out = run_blocks(kernel, replicates, rng, threads)
    bad = out["bad"]
    what = "OLS risk decomposition"
    return OLSRiskDecomposition(
        summarize(out["total"], bad, what),
        summarize(out["var"], bad, what),
        summarize(out["mis"], bad, what),
        summarize(out["total"] - out["var"] - out["mis"], bad, what),
    )


@dataclass(frozen=True)
class RidgeBayesRisk:
    bayes_mc: RiskEstimate
    formula_mc: RiskEstimate
    difference: RiskEstimate  # paired bayes - formula


def ridge_bayes_risk_mc(model: CovariateModel, sigma2: float, lam: float, n: int, replicates: int,
                        rng: RngStream, threads: int | str | None = 1) -> RidgeBayesRisk:
    """Bayes risk of ridge under the prior ``N(0, sigma2 / (lam n) I)`` two ways.

    ``bayes_mc`` averages the realized excess risk of the ridge fit with a
    freshly drawn parameter and Gaussian noise; ``formula_mc`` averages
    ``(sigma2 / n) Tr((Sigma_hat + lam I)^{-1} Sigma)`` on the same designs.
    """
    if not lam > 0:
        raise PreconditionError(f"ridge Bayes risk needs lam > 0, got {lam}", "lambda > 0")
    d = model.d
    Sigma = model.covariance
    prior_sd = np.sqrt(sigma2 / (lam * n))
    noise_sd = np.sqrt(sigma2)

    def kernel(block: RngStream, size: int) -> dict[str, np.ndarray]:
        X = draw_designs(model, block, size, n)
        gen = aux_generator(block)
        beta_star = prior_sd * gen.standard_normal((size, d))
        y = np.einsum("rni,ri->rn", X, beta_star) + noise_sd * gen.standard_normal((size, n))
        w, V = np.linalg.eigh(np.einsum("rni,rnj->rij", X, X) / n)
        b = np.einsum("rni,rn->ri", X, y) / n
        beta_hat = np.einsum("rik,rk->ri", V, np.einsum("rik,ri->rk", V, b) / (w + lam))
        diff = beta_hat - beta_star
        bayes = np.einsum("ri,ij,rj->r", diff, Sigma, diff)
        rotated = np.einsum("rik,ij,rjk->rk", V, Sigma, V)
        formula = sigma2 / n * np.sum(rotated / (w + lam), axis=1)
        return {"bayes": bayes, "formula": formula}

    out = run_blocks(kernel, replicates, rng, threads)
    return RidgeBayesRisk(
        RiskEstimate.from_samples(out["bayes"]),
        RiskEstimate.from_samples(out["formula"]),
        RiskEstimate.from_samples(out["bayes"] - out["formula"]),
    )
