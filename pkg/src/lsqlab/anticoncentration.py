"""Levy concentration functions and the Fourier route to small-ball bounds.

For independent coordinates whose characteristic functions decay like
``(1 + |xi|/C0)^{-alpha}``, Esseen's inequality turns that decay into a
small-ball constant valid uniformly over directions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

from .errors import InvalidCharacteristicFunctionError, PreconditionError
from .lowertail import SmallBallFit, probe_directions
from .mc import whitened_designs
from .models import CoordLaw, CovariateModel
from .rng import RngStream
from .stats import clopper_pearson

__all__ = [
    "CharFnSpec",
    "levy_concentration_mc",
    "ConcentrationProfile",
    "marginal_concentration_profile",
    "uniform_marginal_concentration",
    "EsseenBound",
    "esseen_bound",
    "fourier_small_ball_constant",
    "DecayCheck",
    "decay_check",
    "law_cf",
    "marginal_cf",
    "empirical_cf",
    "subadditive_envelope_ratio",
]

CF_TOL = 1e-9
MIN_LEVY_SAMPLES = 1000
MAX_SEGMENTS = 400


@dataclass(frozen=True)
class CharFnSpec:
    """A characteristic function, optionally with claimed decay ``(C0, alpha)``."""

    evaluator: Callable[[NDArray[np.float64]], NDArray[np.complex128]]
    decay: tuple[float, float] | None = None
    name: str = ""
    stderr: float = 0.0  # pointwise stderr for Monte Carlo estimates

    def __call__(self, xi: ArrayLike) -> NDArray[np.complex128]:
        return np.asarray(self.evaluator(np.asarray(xi, dtype=np.float64)), dtype=np.complex128)

    def modulus(self, xi: ArrayLike) -> NDArray[np.float64]:
        return np.abs(self(xi))


def law_cf(law: CoordLaw | str, decay: tuple[float, float] | None = None, **law_params) -> CharFnSpec:
    """Analytic characteristic function of a standardized coordinate law."""
    if not isinstance(law, CoordLaw):
        law = CoordLaw(law, **law_params)
    return CharFnSpec(law.char_fn, decay, law.name)


def marginal_cf(law: CoordLaw | str, theta: ArrayLike, **law_params) -> CharFnSpec:
    """Characteristic function of ``<theta, X>`` for i.i.d. coordinates: ``prod_j Phi(theta_j xi)``."""
    if not isinstance(law, CoordLaw):
        law = CoordLaw(law, **law_params)
    theta = np.asarray(theta, dtype=np.float64)

    def evaluator(xi):
        xi = np.asarray(xi, dtype=np.float64)
        return np.prod(law.char_fn(xi[..., None] * theta), axis=-1)

    return CharFnSpec(evaluator, None, f"{law.name}-marginal")


def empirical_cf(samples: ArrayLike) -> CharFnSpec:
    """Monte Carlo characteristic function ``mean(exp(i xi Z))``; pointwise stderr <= 1/sqrt(N)."""
    z = np.asarray(samples, dtype=np.float64).ravel()

    def evaluator(xi):
        xi = np.asarray(xi, dtype=np.float64)
        return np.mean(np.exp(1j * xi[..., None] * z), axis=-1)

    return CharFnSpec(evaluator, None, "empirical", stderr=1.0 / math.sqrt(z.size))


# -- Levy concentration --------------------------------------------------------

def _window_max(sorted_x: NDArray, t: float) -> int:
    """Largest number of points in a closed window of width 2t (sorted input)."""
    right = np.searchsorted(sorted_x, sorted_x + 2 * t, side="right")
    return int(np.max(right - np.arange(sorted_x.size)))


def levy_concentration_mc(samples: ArrayLike, t: float) -> float:
    """``sup_a`` of the empirical mass of ``[a - t, a + t]`` (exact for the sample)."""
    if t < 0:
        raise PreconditionError(f"t must be nonnegative, got {t}", "t >= 0")
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if x.size < MIN_LEVY_SAMPLES:
        raise PreconditionError("need at least 1000 samples", "samples >= 1e3")
    return _window_max(x, t) / x.size


@dataclass(frozen=True)
class ConcentrationProfile:
    t_grid: NDArray[np.float64]
    q_max: NDArray[np.float64]  # sup over probed directions
    q_axes: NDArray[np.float64]  # max over the canonical axes
    q_diagonal: NDArray[np.float64]
    stderr: NDArray[np.float64]  # binomial stderr at q_max
    samples_per_theta: int
    ci_low: NDArray[np.float64] = field(repr=False, default=None)  # Bonferroni over directions
    ci_high: NDArray[np.float64] = field(repr=False, default=None)


def marginal_concentration_profile(model: CovariateModel, t_grid: ArrayLike, theta_budget: int,
                                   samples_per_theta: int, rng: RngStream,
                                   whiten: bool = False) -> ConcentrationProfile:
    """``Q_{<theta, X>}(t)`` maximized over random, axis and diagonal directions.

    All directions share one pool of draws.
    """
    if theta_budget < 1000:
        raise PreconditionError("direction budget must be at least 1000", "theta_budget >= 1e3")
    if samples_per_theta < MIN_LEVY_SAMPLES:
        raise PreconditionError("need at least 1000 samples per direction", "samples >= 1e3")
    t = np.atleast_1d(np.asarray(t_grid, dtype=np.float64))
    if np.any(t < 0):
        raise PreconditionError("t must be nonnegative", "t >= 0")
    d = model.d
    X = model.draw(rng.child(0).generator(), (samples_per_theta,))
    if whiten:
        X = whitened_designs(model, X)
    dirs = probe_directions(d, theta_budget, rng.child(1).generator())
    q = np.zeros((len(dirs), t.size))
    chunk = max(1, 2_000_000 // samples_per_theta)
    for start in range(0, len(dirs), chunk):
        proj = np.sort(X @ dirs[start:start + chunk].T, axis=0)
        for j in range(proj.shape[1]):
            col = proj[:, j]
            q[start + j] = [_window_max(col, tk) for tk in t]
    q /= samples_per_theta
    q_max = q.max(axis=0)
    level = 1.0 - 0.05 / len(dirs)
    ci = [clopper_pearson(int(round(p * samples_per_theta)), samples_per_theta, level) for p in q_max]
    return ConcentrationProfile(
        t,
        q_max,
        q[theta_budget:theta_budget + d].max(axis=0),
        q[-1],
        np.sqrt(q_max * (1 - q_max) / samples_per_theta),
        samples_per_theta,
        np.array([c[0] for c in ci]),
        np.array([c[1] for c in ci]),
    )


def uniform_marginal_concentration(model: CovariateModel, t: float, theta_budget: int,
                                   samples_per_theta: int, rng: RngStream) -> float:
    """Probe estimate of ``Q_X(t) = sup_theta Q_{<theta, X>}(t)``."""
    prof = marginal_concentration_profile(model, [t], theta_budget, samples_per_theta, rng)
    return float(prof.q_max[0])


# -- Esseen's inequality -----------------------------------------------------------

@dataclass(frozen=True)
class EsseenBound:
    value: float
    quad_error: float
    vacuous: bool


def esseen_bound(char: CharFnSpec, t: float, check_points: int = 2049) -> EsseenBound:
    """``t * integral of |Phi| over [-2 pi/t, 2 pi/t]`` by adaptive quadrature."""
    if not t > 0:
        raise PreconditionError(f"t must be positive, got {t}", "t > 0")
    upper = 2 * math.pi / t
    probe = char.modulus(np.linspace(0.0, upper, check_points))
    if np.any(probe > 1 + CF_TOL) or abs(char.modulus(0.0) - 1.0) > CF_TOL:
        raise InvalidCharacteristicFunctionError(
            f"{char.name or 'characteristic function'}: |Phi| exceeds 1 or Phi(0) != 1"
        )

    def integrand(xi: float) -> float:
        m = float(char.modulus(xi))
        if m > 1 + CF_TOL:
            raise InvalidCharacteristicFunctionError(f"|Phi({xi})| = {m} > 1")
        return m

    # |Phi(-xi)| = |Phi(xi)| for real variables; |Phi| has kinks at the zeros
    # of Phi, so integrate piecewise over segments of length <= pi
    edges = np.linspace(0.0, upper, min(MAX_SEGMENTS, max(1, math.ceil(upper / math.pi))) + 1)
    val = err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(integrand, a, b, epsabs=CF_TOL / len(edges), limit=200)
        val += v
        err += e
    value = 2 * t * val
    return EsseenBound(value, 2 * t * err, value >= 1)


def fourier_small_ball_constant(C0: float, alpha: float) -> SmallBallFit:
    """``C = 2^{1/alpha} (2 pi)^{1/alpha - 1} (1 - alpha)^{-1/alpha} C0`` for coordinates with decaying Phi."""
    if not 0 < alpha < 1:
        raise PreconditionError(f"alpha must lie in (0, 1), got {alpha}", "alpha in (0, 1)")
    if not C0 > 0:
        raise PreconditionError("C0 must be positive", "C0 > 0")
    log_c = (math.log(2) / alpha + (1 / alpha - 1) * math.log(2 * math.pi)
             - math.log1p(-alpha) / alpha + math.log(C0))
    if alpha > 0.95:
        warnings.warn(f"alpha={alpha} is close to 1: the constant diverges like (1 - alpha)^(-1/alpha)",
                      RuntimeWarning, stacklevel=2)
    return SmallBallFit(math.exp(log_c), alpha, analytic=True)


@dataclass(frozen=True)
class DecayCheck:
    passed: bool
    worst_ratio: float  # max of |Phi(xi)| (1 + |xi|/C0)^alpha
    worst_xi: float


def decay_check(char: CharFnSpec, xi_grid: ArrayLike) -> DecayCheck:
    """Check ``|Phi(xi)| <= (1 + |xi|/C0)^{-alpha}`` at every grid point.

    Any law with finite nonzero variance has ``|Phi| = 1 - O(xi^2)`` near 0,
    so the inequality fails on ``0 < |xi| < ~alpha/C0``-type neighborhoods;
    only the supplied grid is checked.
    """
    if char.decay is None:
        raise PreconditionError("no decay constants attached", "decay constants present")
    C0, alpha = char.decay
    xi = np.asarray(xi_grid, dtype=np.float64).ravel()
    ratio = char.modulus(xi) * (1 + np.abs(xi) / C0) ** alpha
    k = int(np.argmax(ratio))
    worst = float(ratio[k])
    return DecayCheck(worst <= 1 + 1e-12 + 3 * char.stderr, worst, float(xi[k]))


def subadditive_envelope_ratio(law: CoordLaw | str, C0: float, alpha: float, xi_grid: ArrayLike,
                               thetas: ArrayLike, **law_params) -> float:
    """Max over the grid of ``|Phi_{<theta, X>}(xi)| * exp(g(xi^2))``, ``g(u) = alpha log(1 + sqrt(u)/C0)``.

    Values <= 1 confirm that the coordinate decay transfers to every probed marginal.
    """
    xi = np.asarray(xi_grid, dtype=np.float64).ravel()
    envelope = (1 + np.abs(xi) / C0) ** alpha
    worst = 0.0
    for theta in np.atleast_2d(np.asarray(thetas, dtype=np.float64)):
        theta = theta / np.linalg.norm(theta)
        m = marginal_cf(law, theta, **law_params).modulus(xi)
        worst = max(worst, float(np.max(m * envelope)))
    return worst
