"""Lower tail of the smallest eigenvalue of the sample covariance.

Empirical tail curves, the two closed-form envelopes that sandwich them,
small-ball constant fitting, negative moments, and the spherical-cap
smoothing quantities behind the deviation certificate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, optimize, special

from .envelope import BoundEnvelope, c_prime, log_c_prime, safe_exp
from .errors import DegenerateDesignError, InsufficientSamplesError, PreconditionError
from .linalg import _as_square, _check_symmetric, singular_mask, truncate_covariates
from .mc import draw_designs, summarize, whitened_designs
from .models import CovariateModel
from .rng import RngStream, run_blocks
from .stats import Z95, ProportionEstimate, RiskEstimate, clopper_pearson

__all__ = [
    "TailCurve",
    "tail_curve_mc",
    "tail_lower_envelope",
    "tail_upper_envelope",
    "SmallBallFit",
    "SmallBallProbe",
    "fit_small_ball",
    "marginal_small_ball_probe",
    "negative_moment_mc",
    "negative_moment_envelope",
    "moment_tail_conversions",
    "LaplaceCheck",
    "laplace_small_ball_check",
    "truncated_small_ball_envelope",
    "squared_marginal_constants",
    "cap_mass",
    "sample_cap",
    "SmoothingCheck",
    "smoothing_functional",
    "EntropyCheck",
    "entropy_bound_check",
    "pac_bayes_certificate",
]

# lambda_min <= t is evaluated with this relative slack so exact ties count
TIE_RTOL = 1e-12
ALPHA_FLOOR = 1e-3
CAP_REJECTION_MIN_RATE = 1e-3
SMALL_BALL_LOWER_SLOPE = 0.16


# -- tail curves -------------------------------------------------------------

@dataclass(frozen=True)
class TailCurve:
    t_grid: NDArray[np.float64]
    prob: NDArray[np.float64]
    ci_low: NDArray[np.float64]
    ci_high: NDArray[np.float64]
    replicates: int
    counts: NDArray[np.int64] = field(repr=False, default=None)

    def point(self, i: int) -> ProportionEstimate:
        return ProportionEstimate.from_counts(int(self.counts[i]), self.replicates)


def _check_t_grid(t_grid: ArrayLike) -> NDArray[np.float64]:
    t = np.asarray(t_grid, dtype=np.float64).ravel()
    if t.size == 0 or np.any(t <= 0) or np.any(t > 1):
        raise PreconditionError("thresholds must lie in (0, 1]", "t in (0, 1]")
    if np.any(np.diff(t) <= 0):
        raise PreconditionError("t_grid must be strictly increasing", "increasing t_grid")
    return t


def lambda_min_mc(model: CovariateModel, n: int, replicates: int, rng: RngStream, whiten: bool = True,
                  threads: int | str | None = 1) -> NDArray[np.float64]:
    """One smallest eigenvalue of the (optionally whitened) sample covariance per replicate."""

    def kernel(block: RngStream, size: int) -> dict[str, np.ndarray]:
        X = draw_designs(model, block, size, n)
        if whiten:
            X = whitened_designs(model, X)
        S = np.einsum("rni,rnj->rij", X, X) / n
        return {"lam": np.linalg.eigvalsh(S)[:, 0]}

    return run_blocks(kernel, replicates, rng, threads)["lam"]


def tail_curve_mc(model: CovariateModel, n: int, t_grid: ArrayLike, replicates: int, rng: RngStream,
                  whiten: bool = True, threads: int | str | None = 1) -> TailCurve:
    """Empirical ``P(lambda_min <= t)`` on a grid, from one replicate pool."""
    t = _check_t_grid(t_grid)
    if replicates < 1000:
        raise PreconditionError("tail curves need at least 1000 replicates", "replicates >= 1e3")
    lam = np.sort(lambda_min_mc(model, n, replicates, rng, whiten, threads))
    counts = np.searchsorted(lam, t + TIE_RTOL * np.maximum(1.0, t), side="right")
    ci = [clopper_pearson(int(k), replicates) for k in counts]
    return TailCurve(
        t,
        counts / replicates,
        np.array([c[0] for c in ci]),
        np.array([c[1] for c in ci]),
        replicates,
        counts.astype(np.int64),
    )


def tail_lower_envelope(t: float, n: int) -> BoundEnvelope:
    """Universal lower bound ``(0.025 t)^{n/2}`` on the tail (dimension >= 2)."""
    if not 0 < t <= 1:
        raise PreconditionError(f"t must lie in (0, 1], got {t}", "t in (0, 1]")
    if n < 1:
        raise PreconditionError("n must be positive", "n >= 1")
    return BoundEnvelope("tail_lower", (0.025 * t) ** (n / 2), {"n": n, "base": 0.025})


@dataclass(frozen=True)
class SmallBallFit:
    """Constants with ``P(|<theta, X~>| <= t) <= (C t)^alpha`` for all unit ``theta``."""

    C: float
    alpha: float
    fit_residual: float = 0.0
    analytic: bool = False

    def __post_init__(self) -> None:
        if not self.C > 0 or not 0 < self.alpha <= 1:
            raise ValueError("need C > 0 and alpha in (0, 1]")

    def envelope(self, t: ArrayLike) -> NDArray[np.float64]:
        return np.minimum(1.0, (self.C * np.asarray(t, dtype=np.float64)) ** self.alpha)


def _require_aspect(n: int, d: int, alpha: float) -> None:
    if n < 6 * d / alpha:
        raise PreconditionError(
            f"the small-ball tail envelope needs n >= 6 d / alpha = {6 * d / alpha:.4g}, got n={n}",
            "n >= 6 d / alpha",
        )


def tail_upper_envelope(t: float, n: int, d: int, fit: SmallBallFit) -> BoundEnvelope:
    """``(C' t)^{alpha n / 6}`` with ``C' = 3 C^4 e^{1 + 9/alpha}``; flagged vacuous for ``t >= 1/C'``."""
    _require_aspect(n, d, fit.alpha)
    if not t > 0:
        raise PreconditionError(f"t must be positive, got {t}", "t > 0")
    if d >= 2 and t <= 1 and (fit.C * t) ** fit.alpha < SMALL_BALL_LOWER_SLOPE * t:
        raise PreconditionError(
            f"(C t)^alpha = {(fit.C * t) ** fit.alpha:.3g} is below the universal 0.16 t floor at t={t}",
            "small-ball constants consistent with the 0.16 t lower bound",
        )
    lc = log_c_prime(fit.C, fit.alpha)
    exponent = fit.alpha * n / 6
    value = safe_exp(exponent * (lc + math.log(t)))
    threshold = math.exp(-lc)
    return BoundEnvelope(
        "tail_upper",
        value,
        {"C": fit.C, "alpha": fit.alpha, "C_prime": math.exp(lc), "exponent": exponent,
         "nonvacuity_threshold": threshold},
        vacuous=t >= threshold,
    )


# -- small-ball probing ------------------------------------------------------

@dataclass(frozen=True)
class SmallBallProbe:
    fit: SmallBallFit
    t_grid: NDArray[np.float64]
    probe_max: NDArray[np.float64]  # max over directions of the empirical probability
    probe_stderr: NDArray[np.float64]
    argmax_direction: NDArray[np.float64]  # unit direction attaining the max at each t, shape (T, d)
    samples_per_theta: int
    consistent: bool  # simultaneous lower confidence bound <= envelope everywhere
    ci_low: NDArray[np.float64] = field(repr=False, default=None)  # Bonferroni over directions
    ci_high: NDArray[np.float64] = field(repr=False, default=None)


def probe_directions(d: int, budget: int, gen: np.random.Generator) -> NDArray[np.float64]:
    """``budget`` uniform unit vectors, then the ``d`` axes and the normalized diagonal."""
    g = gen.standard_normal((budget, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([g, np.eye(d), np.full((1, d), 1.0 / math.sqrt(d))])


def fit_small_ball(t_grid: ArrayLike, probs: ArrayLike, alpha_floor: float = ALPHA_FLOOR) -> SmallBallFit:
    """Tightest upper envelope ``(C t)^alpha`` over the measured points.

    Solved as a linear program in ``(log C^alpha, alpha)``: every positive
    point must lie under the line in log-log coordinates while the summed gap
    is minimized.  ``fit_residual`` is the mean log gap.
    """
    t = np.asarray(t_grid, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    keep = p > 0
    if not np.any(keep):
        raise InsufficientSamplesError("every measured probability is 0; nothing to fit", suggested_budget=0)
    lt, lp = np.log(t[keep]), np.log(p[keep])
    # variables (a, alpha) with a = alpha log C; minimize sum(a + alpha lt - lp)
    c = np.array([lt.size, lt.sum()])
    A_ub = -np.column_stack([np.ones_like(lt), lt])
    res = optimize.linprog(c, A_ub=A_ub, b_ub=-lp, bounds=[(None, None), (alpha_floor, 1.0)], method="highs")
    if not res.success:
        raise ArithmeticError(f"small-ball envelope fit failed: {res.message}")
    a, alpha = res.x
    gaps = a + alpha * lt - lp
    return SmallBallFit(C=float(math.exp(a / alpha)), alpha=float(alpha), fit_residual=float(gaps.mean()))


def marginal_small_ball_probe(model: CovariateModel, t_grid: ArrayLike, theta_budget: int,
                              samples_per_theta: int, rng: RngStream, truncate: bool = False,
                              use_analytic: bool = True) -> SmallBallProbe:
    """Probe ``P(|<theta, X~>| <= t)`` over many directions and fit ``(C, alpha)``.

    One pool of ``samples_per_theta`` whitened draws is projected on every
    direction.  With ``truncate`` the draws are first shrunk to norm at most
    ``sqrt(d)``.  When the model carries analytic constants (and
    ``use_analytic``) those are returned and the probe only reports
    consistency.  A probability of 1 at the smallest ``t``, or an envelope fit
    that needs ``alpha`` at its floor, raises :class:`DegenerateDesignError`.
    """
    if theta_budget < 1000:
        raise PreconditionError("direction budget must be at least 1000", "theta_budget >= 1e3")
    t = np.asarray(t_grid, dtype=np.float64).ravel()
    if t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise PreconditionError("t_grid must be positive and strictly increasing", "increasing positive t_grid")
    d = model.d
    X = whitened_designs(model, model.draw(rng.child(0).generator(), (samples_per_theta,)))
    if truncate:
        X = truncate_covariates(X)
    dirs = probe_directions(d, theta_budget, rng.child(1).generator())

    best = np.zeros(t.size)
    best_dir = np.zeros((t.size, d))
    chunk = max(1, 2_000_000 // max(samples_per_theta, 1))
    for start in range(0, len(dirs), chunk):
        D = dirs[start:start + chunk]
        proj = np.sort(np.abs(X @ D.T), axis=0)  # (samples, k)
        counts = np.stack([np.searchsorted(proj[:, j], t, side="right") for j in range(D.shape[0])])
        probs = counts / samples_per_theta  # (k, T)
        j = np.argmax(probs, axis=0)
        cand = probs[j, np.arange(t.size)]
        better = cand > best
        best[better] = cand[better]
        best_dir[better] = D[j[better]]

    stderr = np.sqrt(best * (1 - best) / samples_per_theta)
    if best[0] >= 1.0:
        raise DegenerateDesignError(f"marginal probability is 1 at t={t[0]}: the design charges a hyperplane")
    if use_analytic and model.analytic_small_ball is not None and not truncate:
        C, alpha = model.analytic_small_ball
        fit = SmallBallFit(C, alpha, analytic=True)
    else:
        fit = fit_small_ball(t, best)
        if fit.alpha <= ALPHA_FLOOR * (1 + 1e-9):
            raise DegenerateDesignError(
                "no small-ball envelope with positive exponent fits the probe: marginal mass does not vanish as t -> 0"
            )
    # the max over many directions is biased upward; correct the level for multiplicity
    level = 1.0 - 0.05 / len(dirs)
    ci = [clopper_pearson(int(round(p * samples_per_theta)), samples_per_theta, level) for p in best]
    lo = np.array([c[0] for c in ci])
    hi = np.array([c[1] for c in ci])
    consistent = bool(np.all(lo <= (fit.C * t) ** fit.alpha))
    return SmallBallProbe(fit, t, best, stderr, best_dir, samples_per_theta, consistent, lo, hi)


def truncated_small_ball_envelope(t: ArrayLike, C: float, alpha: float) -> NDArray[np.float64]:
    """``2 (C t)^{2 alpha / (2 + alpha)}``: small ball after shrinking rows to norm ``sqrt(d)``."""
    t = np.asarray(t, dtype=np.float64)
    return 2.0 * (C * t) ** (2 * alpha / (2 + alpha))


def squared_marginal_constants(C: float, alpha: float) -> tuple[float, float]:
    """``(C_Z, alpha_Z)`` with ``P(<X', theta>^2 <= t) <= (C_Z t)^{alpha_Z}`` for truncated ``X'``."""
    alpha_z = alpha / (2 + alpha)
    return 2.0 ** (1 / alpha_z) * C * C, alpha_z


# -- negative moments ----------------------------------------------------------

def negative_moment_mc(model: CovariateModel, n: int, q: float, replicates: int, rng: RngStream,
                       threads: int | str | None = 1, alpha: float | None = None) -> RiskEstimate:
    """Estimate of ``E[max(1, 1/lambda_min)^q]^{1/q}`` for the whitened sample covariance.

    The stderr is the delta-method transfer of the stderr of the q-th power
    mean.  Warns when ``q`` leaves the range where the envelope applies
    (``q > alpha n / 12``) or where the moment may be infinite (``q >= n/2``).
    """
    if q < 1:
        raise PreconditionError(f"q must be >= 1, got {q}", "q >= 1")
    if alpha is None:
        alpha = model.analytic_small_ball[1] if model.analytic_small_ball else 1.0
    if q > alpha * n / 12:
        warnings.warn(f"q={q} exceeds alpha n / 12 = {alpha * n / 12:.3g}; the moment envelope does not apply",
                      RuntimeWarning, stacklevel=2)
    if q >= n / 2:
        warnings.warn(f"q={q} >= n/2: the negative moment can be infinite", RuntimeWarning, stacklevel=2)

    def kernel(block: RngStream, size: int) -> dict[str, np.ndarray]:
        X = whitened_designs(model, draw_designs(model, block, size, n))
        w = np.linalg.eigvalsh(np.einsum("rni,rnj->rij", X, X) / n)
        bad = singular_mask(w)
        lam = np.where(bad, 1.0, w[:, 0])
        return {"v": np.maximum(1.0, 1.0 / lam) ** q, "bad": bad}

    out = run_blocks(kernel, replicates, rng, threads)
    power = summarize(out["v"], out["bad"], "negative moment")
    est = power.mean ** (1 / q)
    se = power.stderr * est / (q * power.mean)
    return RiskEstimate(est, se, power.replicates, est - Z95 * se, est + Z95 * se,
                        power.degenerate_events, power.shrink_ratio)


def negative_moment_envelope(q: float, n: int, d: int, fit: SmallBallFit) -> BoundEnvelope:
    """``2^{1/q} C'`` bound on the q-th negative moment, for ``1 <= q <= alpha n / 12``."""
    _require_aspect(n, d, fit.alpha)
    if not 1 <= q <= fit.alpha * n / 12:
        raise PreconditionError(f"q must lie in [1, alpha n / 12], got q={q}", "1 <= q <= alpha n / 12")
    cp = c_prime(fit.C, fit.alpha)
    return BoundEnvelope("negative_moment", 2 ** (1 / q) * cp, {"C_prime": cp, "q": q})


def moment_tail_conversions(C: float, a: float | None, q: float, direction: str,
                            t: float | None = None) -> BoundEnvelope:
    """Convert between small-ball tails and negative moments of a nonnegative ``Z``.

    ``direction``:
      - ``"tail_to_moment"``: ``P(Z <= t) <= (C t)^a`` with ``C >= 1``, ``a >= 2``
        gives ``||max(1, 1/Z)||_q <= 2^{1/q} C`` for ``1 <= q <= a/2``;
      - ``"moment_to_tail"``: ``||1/Z||_q <= C`` gives ``P(Z <= t) <= (C t)^q``;
      - ``"divergence"``: ``P(Z <= t) >= (c t)^a`` forces ``||1/Z||_q = inf`` for ``q >= a``.
    """
    if direction == "tail_to_moment":
        if a is None or a < 2 or C < 1 or not 1 <= q <= a / 2:
            raise PreconditionError("need C >= 1, a >= 2 and 1 <= q <= a/2", "C >= 1, a >= 2, 1 <= q <= a/2")
        return BoundEnvelope("moment_from_tail", 2 ** (1 / q) * C, {"C": C, "a": a, "q": q})
    if direction == "moment_to_tail":
        if q < 1 or not C > 0:
            raise PreconditionError("need q >= 1 and C > 0", "q >= 1, C > 0")
        if t is None or t <= 0:
            raise PreconditionError("a positive threshold t is required", "t > 0")
        return BoundEnvelope("tail_from_moment", (C * t) ** q, {"C": C, "q": q, "t": t})
    if direction == "divergence":
        if a is None or not a > 0 or not C > 0:
            raise PreconditionError("need c > 0 and a > 0", "c > 0, a > 0")
        if q < a:
            raise PreconditionError(f"divergence needs q >= a, got q={q}, a={a}", "q >= a")
        return BoundEnvelope("moment_divergence", math.inf, {"c": C, "a": a, "q": q}, note="divergent")
    raise ValueError(f"unknown direction {direction!r}")


# -- Laplace transform of a small-ball variable --------------------------------

@dataclass(frozen=True)
class LaplaceCheck:
    bound: float
    measured: float
    stderr: float
    vacuous: bool

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound + 3 * self.stderr


def laplace_small_ball_check(C: float, alpha: float, lam: float,
                             Z: ArrayLike | Callable[[float], float],
                             support: tuple[float, float] = (0.0, math.inf)) -> LaplaceCheck:
    """Compare ``E[exp(-lam Z)]`` with ``(C / lam)^alpha``.

    ``Z`` is either an array of nonnegative samples (Monte Carlo) or a
    density on ``support`` (quadrature, where ``stderr`` is the quadrature
    error estimate).
    """
    if not lam > 0:
        raise PreconditionError(f"lambda must be positive, got {lam}", "lambda > 0")
    bound = (C / lam) ** alpha
    if callable(Z):
        measured, err = integrate.quad(lambda z: math.exp(-lam * z) * Z(z), *support, epsabs=1e-12)
        se = float(err)
    else:
        z = np.asarray(Z, dtype=np.float64)
        if np.any(z < 0):
            raise ValueError("Z must be nonnegative")
        v = np.exp(-lam * z)
        measured = float(v.mean())
        se = float(v.std(ddof=1) / math.sqrt(v.size))
    return LaplaceCheck(float(bound), float(measured), se, vacuous=bound >= 1)


# -- spherical caps ------------------------------------------------------------

def _cap_fraction(d: int, gamma: float) -> float:
    # (1 - <theta, v>)/2 ~ Beta((d-1)/2, (d-1)/2) under the uniform law on the sphere
    s = min(gamma * gamma / 4.0, 1.0)
    return float(special.betainc((d - 1) / 2, (d - 1) / 2, s))


def cap_mass(d: int, gamma: float) -> float:
    """Uniform-sphere mass of ``{theta : ||theta - v|| <= gamma}``."""
    if d < 2:
        raise PreconditionError("caps need d >= 2", "d >= 2")
    if not gamma > 0:
        raise PreconditionError("gamma must be positive", "gamma > 0")
    return _cap_fraction(d, gamma)


def _check_cap_args(d: int, gamma: float) -> None:
    if d < 2:
        raise PreconditionError("caps need d >= 2", "d >= 2")
    if not 0 < gamma <= 0.5:
        raise PreconditionError(f"gamma must lie in (0, 1/2], got {gamma}", "gamma in (0, 1/2]")


def _polar_cap(v: NDArray, gamma: float, size: int, gen: np.random.Generator) -> NDArray:
    d = v.size
    h = (d - 1) / 2
    u = gen.random(size) * special.betainc(h, h, gamma * gamma / 4.0)
    s = special.betaincinv(h, h, u)
    cos_a = 1.0 - 2.0 * s
    sin_a = np.sqrt(np.clip(1.0 - cos_a**2, 0.0, None))
    g = gen.standard_normal((size, d))
    g -= np.outer(g @ v, v)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return cos_a[:, None] * v + sin_a[:, None] * g


def sample_cap(v: ArrayLike, gamma: float, size: int, gen: np.random.Generator) -> NDArray[np.float64]:
    """Uniform draws from the cap of chordal radius ``gamma`` around unit ``v``.

    Rejection from the sphere while the acceptance rate is at least 1e-3;
    below that, the exact polar construction (angle by inverse Beta CDF,
    uniform tangent direction).
    """
    v = np.asarray(v, dtype=np.float64)
    d = v.size
    mass = cap_mass(d, gamma)
    if mass < CAP_REJECTION_MIN_RATE:
        return _polar_cap(v, gamma, size, gen)
    out = []
    have = 0
    while have < size:
        m = int(math.ceil(1.2 * (size - have) / mass)) + 16
        g = gen.standard_normal((m, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        keep = g[np.sum((g - v) ** 2, axis=1) <= gamma * gamma]
        out.append(keep)
        have += len(keep)
    return np.vstack(out)[:size]


@dataclass(frozen=True)
class SmoothingCheck:
    closed_form: float
    mc: float
    phi_mc: float
    stderr: float  # of the paired difference mc - closed_form
    phi_bound: float

    @property
    def agrees(self) -> bool:
        return abs(self.mc - self.closed_form) <= 3 * self.stderr + 1e-12 * max(1.0, abs(self.mc))

    @property
    def phi_in_range(self) -> bool:
        return 0.0 <= self.phi_mc <= self.phi_bound


def smoothing_functional(Sigma: ArrayLike, v: ArrayLike, gamma: float, samples: int,
                         rng: RngStream) -> SmoothingCheck:
    """Cap average of ``<Sigma theta, theta>`` against ``(1 - phi) <Sigma v, v> + phi Tr(Sigma)/d``."""
    Sigma = _as_square(Sigma)
    _check_symmetric(Sigma)
    v = np.asarray(v, dtype=np.float64)
    d = Sigma.shape[0]
    if v.shape != (d,):
        raise ValueError("v must have length d")
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise PreconditionError("v must be a unit vector", "||v|| = 1")
    _check_cap_args(d, gamma)
    theta = sample_cap(v, gamma, samples, rng.generator())
    quad = np.einsum("ri,ij,rj->r", theta, Sigma, theta)
    phi_i = d / (d - 1) * (1.0 - (theta @ v) ** 2)
    vSv = float(v @ Sigma @ v)
    closed_i = (1.0 - phi_i) * vSv + phi_i * np.trace(Sigma) / d
    phi = float(phi_i.mean())
    closed = (1.0 - phi) * vSv + phi * float(np.trace(Sigma)) / d
    diff = quad - closed_i
    se = float(diff.std(ddof=1) / math.sqrt(samples))
    return SmoothingCheck(closed, float(quad.mean()), phi, se, d / (d - 1) * gamma * gamma)


@dataclass(frozen=True)
class EntropyCheck:
    kl: float  # -log of the Monte Carlo cap fraction
    bound: float
    kl_exact: float
    kl_stderr: float
    hits: int
    samples: int

    @property
    def passed(self) -> bool:
        return self.kl <= self.bound + 3 * self.kl_stderr


def entropy_bound_check(d: int, gamma: float, mc_samples: int, rng: RngStream,
                        chunk: int = 1 << 20) -> EntropyCheck:
    """``KL(cap-uniform || sphere-uniform) = -log(cap mass)`` against ``d log(1 + 2/gamma)``.

    The cap fraction is estimated from uniform sphere points; only the
    coordinate along ``v`` matters, so it is drawn from its exact Beta law.
    """
    _check_cap_args(d, gamma)
    gen = rng.generator()
    s_max = gamma * gamma / 4.0
    h = (d - 1) / 2
    hits = 0
    left = mc_samples
    while left > 0:
        m = min(chunk, left)
        hits += int(np.count_nonzero(gen.beta(h, h, m) <= s_max))
        left -= m
    exact = _cap_fraction(d, gamma)
    if hits == 0:
        raise InsufficientSamplesError(
            f"no sample landed in the cap (mass {exact:.3g}); increase mc_samples",
            suggested_budget=int(math.ceil(10.0 / exact)),
        )
    p = hits / mc_samples
    se = math.sqrt((1 - p) / (p * mc_samples))
    return EntropyCheck(-math.log(p), d * math.log(1 + 2 / gamma), -math.log(exact), se, hits, mc_samples)


def pac_bayes_certificate(fit: SmallBallFit, d: int, n: int, u: float) -> BoundEnvelope:
    """Threshold ``t(u) = e^{-6u/alpha} / C'`` exceeded by ``lambda_min`` with probability >= 1 - e^{-nu}."""
    _require_aspect(n, d, fit.alpha)
    if not u > 0:
        raise PreconditionError(f"u must be positive, got {u}", "u > 0")
    lc = log_c_prime(fit.C, fit.alpha)
    return BoundEnvelope(
        "pac_bayes_threshold",
        math.exp(-lc - 6 * u / fit.alpha),
        {"C_prime": math.exp(lc), "u": u, "failure_probability": safe_exp(-n * u), "log_failure": -n * u},
    )
