"""Declarative covariate and noise laws, and how to sample them.

Coordinate laws of ``iid_coords`` designs are standardized to mean 0 and
variance 1, so such designs have identity population covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from .errors import PreconditionError
from .linalg import SINGULAR_RTOL, sqrt_psd
from .rng import RngStream

__all__ = [
    "CoordLaw",
    "CovariateModel",
    "NoiseModel",
    "sample_covariates",
    "COORD_LAWS",
]

COORD_LAWS = ("gaussian", "uniform", "rademacher", "student_t", "laplace", "bounded_density")

_SQRT3 = math.sqrt(3.0)
_LAPLACE_B = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class CoordLaw:
    """A standardized (mean 0, variance 1) law for one coordinate.

    ``bounded_density`` is a piecewise-constant density given by bin
    ``edges`` and bin probabilities ``weights``; it is recentred and rescaled
    internally.
    """

    name: str
    dof: float | None = None
    edges: tuple[float, ...] | None = None
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.name not in COORD_LAWS:
            raise ValueError(f"unknown coordinate law {self.name!r}; expected one of {COORD_LAWS}")
        if self.name == "student_t":
            if self.dof is None or not self.dof > 2:
                raise ValueError("student_t coordinates need dof > 2 for finite variance")
        if self.name == "bounded_density":
            if self.edges is None or self.weights is None:
                raise ValueError("bounded_density needs bin edges and weights")
            edges = np.asarray(self.edges, dtype=float)
            weights = np.asarray(self.weights, dtype=float)
            if edges.ndim != 1 or len(edges) != len(weights) + 1 or np.any(np.diff(edges) <= 0):
                raise ValueError("edges must be strictly increasing with one more entry than weights")
            if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
                raise ValueError("bin weights must be nonnegative and sum to 1")

    # bounded_density standardization: raw = loc + scale * standardized
    def _raw_moments(self) -> tuple[float, float]:
        a = np.asarray(self.edges[:-1], dtype=float)
        b = np.asarray(self.edges[1:], dtype=float)
        w = np.asarray(self.weights, dtype=float)
        mean = float(np.sum(w * (a + b) / 2))
        second = float(np.sum(w * (a * a + a * b + b * b) / 3))
        return mean, math.sqrt(second - mean * mean)

    @property
    def _t_scale(self) -> float:
        return math.sqrt((self.dof - 2.0) / self.dof)

    def sample(self, gen: np.random.Generator, size) -> NDArray[np.float64]:
        if self.name == "gaussian":
            return gen.standard_normal(size)
        if self.name == "uniform":
            return gen.uniform(-_SQRT3, _SQRT3, size)
        if self.name == "rademacher":
            return 2.0 * gen.integers(0, 2, size).astype(np.float64) - 1.0
        if self.name == "student_t":
            return gen.standard_t(self.dof, size) * self._t_scale
        if self.name == "laplace":
            return gen.laplace(0.0, _LAPLACE_B, size)
        a = np.asarray(self.edges[:-1], dtype=float)
        b = np.asarray(self.edges[1:], dtype=float)
        k = gen.choice(len(a), size=size, p=np.asarray(self.weights, dtype=float))
        raw = a[k] + (b[k] - a[k]) * gen.random(size)
        loc, scale = self._raw_moments()
        return (raw - loc) / scale

    @property
    def density_bound(self) -> float | None:
        """Supremum of the density, or None for atomic laws."""
        if self.name == "gaussian":
            return 1.0 / math.sqrt(2 * math.pi)
        if self.name == "uniform":
            return 1.0 / (2 * _SQRT3)
        if self.name == "rademacher":
            return None
        if self.name == "student_t":
            nu = self.dof
            f0 = math.exp(special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)) / math.sqrt(nu * math.pi)
            return f0 / self._t_scale
        if self.name == "laplace":
            return 1.0 / (2 * _LAPLACE_B)
        w = np.asarray(self.weights, dtype=float)
        widths = np.diff(np.asarray(self.edges, dtype=float))
        _, scale = self._raw_moments()
        return float(np.max(w / widths) * scale)

    def char_fn(self, xi: ArrayLike) -> NDArray[np.complex128]:
        """Characteristic function ``E[exp(i xi X)]`` of the standardized law."""
        xi = np.asarray(xi, dtype=np.float64)
        if self.name == "gaussian":
            return np.exp(-0.5 * xi * xi).astype(np.complex128)
        if self.name == "uniform":
            return np.sinc(_SQRT3 * xi / np.pi).astype(np.complex128)
        if self.name == "rademacher":
            return np.cos(xi).astype(np.complex128)
        if self.name == "laplace":
            return (1.0 / (1.0 + (_LAPLACE_B * xi) ** 2)).astype(np.complex128)
        if self.name == "student_t":
            nu = self.dof
            z = np.sqrt(nu) * np.abs(xi * self._t_scale)
            with np.errstate(invalid="ignore", over="ignore"):
                val = special.kv(nu / 2, z) * z ** (nu / 2) / (special.gamma(nu / 2) * 2 ** (nu / 2 - 1))
            return np.where(z == 0, 1.0, np.nan_to_num(val)).astype(np.complex128)
        a = np.asarray(self.edges[:-1], dtype=float)
        b = np.asarray(self.edges[1:], dtype=float)
        w = np.asarray(self.weights, dtype=float)
        loc, scale = self._raw_moments()
        s = xi[..., None] / scale
        mid = (a + b) / 2
        half = (b - a) / 2
        terms = w * np.exp(1j * s * mid) * np.sinc(s * half / np.pi)
        return np.exp(-1j * xi * loc / scale) * np.sum(terms, axis=-1)


@dataclass(frozen=True, eq=False)
class CovariateModel:
    """Law of the covariate vector X in dimension ``d``.

    Build with :meth:`gaussian`, :meth:`iid_coords`, :meth:`axis_mixture` or
    :meth:`linear_image`.  ``analytic_small_ball`` holds ``(C, alpha)`` with
    ``P(|<theta, X~>| <= t) <= (C t)^alpha`` when known in closed form.
    """

    family: str
    d: int
    params: dict[str, Any] = field(default_factory=dict)
    analytic_small_ball: tuple[float, float] | None = None
    degenerate: bool = False

    # -- constructors -----------------------------------------------------
    @classmethod
    def gaussian(cls, cov: ArrayLike | None = None, d: int | None = None) -> "CovariateModel":
        if cov is None:
            if d is None:
                raise ValueError("gaussian needs a covariance or a dimension")
            cov = np.eye(d)
        cov = np.array(cov, dtype=np.float64)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError("covariance must be square")
        if np.max(np.abs(cov - cov.T)) > 1e-10 * max(np.max(np.abs(cov)), 1e-300):
            raise ValueError("covariance must be symmetric")
        w = np.linalg.eigvalsh(cov)
        if not w[0] > SINGULAR_RTOL * np.sum(w) / len(w):
            raise ValueError(f"gaussian covariance is not positive definite (min eigenvalue {w[0]:.3e})")
        return cls(
            "gaussian",
            cov.shape[0],
            {"cov": cov, "root": sqrt_psd(cov)},
            analytic_small_ball=(math.sqrt(2 / math.pi), 1.0),
        )

    @classmethod
    def iid_coords(cls, law: str | CoordLaw, d: int, **law_params) -> "CovariateModel":
        if d < 1:
            raise ValueError("dimension must be positive")
        if not isinstance(law, CoordLaw):
            law = CoordLaw(law, **law_params)
        bound = law.density_bound
        small_ball = None if bound is None else (2 * math.sqrt(2) * bound, 1.0)
        # product of a Rademacher law charges hyperplanes
        return cls("iid_coords", d, {"law": law}, small_ball, degenerate=law.name == "rademacher")

    @classmethod
    def axis_mixture(cls, atoms: ArrayLike, weights: ArrayLike | None = None) -> "CovariateModel":
        """Finitely supported law on the given atoms (rows)."""
        atoms = np.atleast_2d(np.asarray(atoms, dtype=np.float64))
        k, d = atoms.shape
        weights = np.full(k, 1.0 / k) if weights is None else np.asarray(weights, dtype=np.float64)
        if weights.shape != (k,) or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be a probability vector matching the atoms")
        # a finite support charges some hyperplane unless d == 1 and 0 is not an atom
        degenerate = not (d == 1 and np.all(atoms[weights > 0] != 0))
        return cls("axis_mixture", d, {"atoms": atoms, "weights": weights}, None, degenerate)

    @classmethod
    def linear_image(cls, base: "CovariateModel", A: ArrayLike) -> "CovariateModel":
        """Law of ``A @ X`` for ``X`` drawn from ``base``."""
        A = np.array(A, dtype=np.float64)
        if A.shape != (base.d, base.d):
            raise ValueError(f"A must be {base.d} x {base.d}")
        s = np.linalg.svd(A, compute_uv=False)
        if not s[-1] > 1e-12 * s[0]:
            raise ValueError("linear_image needs an invertible matrix")
        # whitened marginals are unchanged by invertible maps
        return cls("linear_image", base.d, {"base": base, "A": A}, base.analytic_small_ball, base.degenerate)

    # -- properties ---------------------------------------------------------
    @property
    def covariance(self) -> NDArray[np.float64]:
        """Population second moment ``E[X X^T]``."""
        if self.family == "gaussian":
            return self.params["cov"]
        if self.family == "iid_coords":
            return np.eye(self.d)
        if self.family == "axis_mixture":
            a, w = self.params["atoms"], self.params["weights"]
            return (a * w[:, None]).T @ a
        A = self.params["A"]
        return A @ self.params["base"].covariance @ A.T

    @property
    def coord_law(self) -> CoordLaw | None:
        return self.params.get("law")

    def draw(self, gen: np.random.Generator, shape: tuple[int, ...]) -> NDArray[np.float64]:
        """Array of shape ``shape + (d,)`` with i.i.d. rows."""
        shape = tuple(shape)
        if self.family == "gaussian":
            z = gen.standard_normal(shape + (self.d,))
            return z @ self.params["root"]
        if self.family == "iid_coords":
            return self.params["law"].sample(gen, shape + (self.d,))
        if self.family == "axis_mixture":
            atoms, w = self.params["atoms"], self.params["weights"]
            idx = gen.choice(len(w), size=shape, p=w)
            return atoms[idx]
        base = self.params["base"].draw(gen, shape)
        return base @ self.params["A"].T

    def sample(self, n: int, rng: RngStream) -> NDArray[np.float64]:
        return sample_covariates(self, n, rng)

    def describe(self) -> dict[str, Any]:
        out: dict[str, Any] = {"family": self.family, "d": self.d}
        if self.family == "iid_coords":
            law = self.params["law"]
            out["coord_law"] = law.name
            if law.dof is not None:
                out["dof"] = law.dof
        elif self.family == "linear_image":
            out["base"] = self.params["base"].describe()
        return out


def sample_covariates(model: CovariateModel, n: int, rng: RngStream) -> NDArray[np.float64]:
    """``n`` i.i.d. rows from ``model``; identical output for identical ``rng``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return model.draw(rng.generator(), (n,))


def _constant_sd(sigma: float) -> Callable[[NDArray], NDArray]:
    def sd(x):
        return np.full(np.shape(x)[:-1], sigma)

    return sd


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Conditional law of the error ``eps = Y - <beta*, X>`` given X.

    ``conditional_sd`` and ``misspecification`` take arrays of shape (..., d)
    and return arrays of shape (...).  The noise is
    ``m(X) + sd(X) * N(0, 1)``.
    """

    kind: str
    sigma2: float
    conditional_sd: Callable[[NDArray], NDArray]
    misspecification: Callable[[NDArray], NDArray] | None = None

    @classmethod
    def gaussian(cls, sigma2: float) -> "NoiseModel":
        if sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        return cls("gaussian", float(sigma2), _constant_sd(math.sqrt(sigma2)))

    @classmethod
    def well_specified(cls, conditional_sd: Callable, sigma2: float) -> "NoiseModel":
        if sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        return cls("well_specified", float(sigma2), conditional_sd)

    @classmethod
    def misspecified(cls, m: Callable, conditional_sd: Callable | None, sigma2: float) -> "NoiseModel":
        if sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        return cls("misspecified", float(sigma2), conditional_sd or _constant_sd(0.0), m)

    def mean(self, X: NDArray) -> NDArray:
        if self.misspecification is None:
            return np.zeros(np.shape(X)[:-1])
        return np.asarray(self.misspecification(X), dtype=np.float64)

    def sd(self, X: NDArray) -> NDArray:
        return np.asarray(self.conditional_sd(X), dtype=np.float64)

    def sample(self, X: NDArray, gen: np.random.Generator) -> NDArray:
        z = gen.standard_normal(np.shape(X)[:-1])
        return self.mean(X) + self.sd(X) * z

    def validate(self, model: CovariateModel, rng: RngStream, probes: int = 1000,
                 orthogonality_probes: int = 10_000) -> None:
        """Probe-check the variance bound and, when misspecified, E[m(X) X] = 0."""
        gen = rng.generator()
        X = model.draw(gen, (probes,))
        second = self.sd(X) ** 2 + self.mean(X) ** 2
        worst = float(np.max(second))
        if worst > self.sigma2 * (1 + 1e-12) + 1e-15:
            raise PreconditionError(
                f"noise second moment {worst:.4g} exceeds sigma2={self.sigma2:.4g} at a probe point",
                "conditional noise variance bounded by sigma2",
            )
        if self.misspecification is None:
            return
        X = model.draw(gen, (orthogonality_probes,))
        prod = self.mean(X)[:, None] * X
        mean = prod.mean(axis=0)
        se = prod.std(axis=0, ddof=1) / math.sqrt(len(X))
        bad = np.abs(mean) > 3 * se + 1e-12
        if np.any(bad):
            raise PreconditionError(
                f"misspecification is not orthogonal to X: E[m(X)X] ~ {mean} (stderr {se})",
                "misspecification orthogonal to linear functions of X",
            )
