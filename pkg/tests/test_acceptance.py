"""Acceptance gate: one criterion per marker number, at the stated budgets.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints one
PASS/FAIL line per criterion.
"""

import math

import numpy as np
import pytest
from scipy import stats

from lsqlab.anticoncentration import (
    decay_check,
    esseen_bound,
    fourier_small_ball_constant,
    law_cf,
    levy_concentration_mc,
    marginal_concentration_profile,
    subadditive_envelope_ratio,
)
from lsqlab.estimators import ols_risk_decomposition_mc
from lsqlab.lowertail import (
    SmallBallFit,
    cap_mass,
    entropy_bound_check,
    laplace_small_ball_check,
    marginal_small_ball_probe,
    negative_moment_envelope,
    negative_moment_mc,
    pac_bayes_certificate,
    smoothing_functional,
    tail_curve_mc,
    tail_lower_envelope,
    tail_upper_envelope,
)
from lsqlab.minimax import (
    degeneracy_probe,
    leverage_identity_mc,
    minimax_lower_bound,
    minimax_risk_mc,
    sherman_morrison_leverage,
    trace_inverse_approx_check,
)
from lsqlab.models import CoordLaw, CovariateModel, NoiseModel
from lsqlab.rng import RngStream
from lsqlab.stats import clopper_pearson

pytestmark = pytest.mark.acceptance

SEED = 20_241_016
EPS = np.finfo(float).eps


def criterion(number, label):
    return pytest.mark.criterion(number, label)


# 1 ---------------------------------------------------------------------------------

@criterion(1, "Gaussian design risk matches sigma^2 d / (n - d - 1)")
def test_gaussian_exact_risk():
    est = minimax_risk_mc(CovariateModel.gaussian(d=5), 20, 1.0, 200_000, RngStream(SEED))
    assert est.stderr < 0.01
    assert abs(est.mean - 5 / 14) <= 3 * est.stderr


# 2 ---------------------------------------------------------------------------------

@criterion(2, "OLS excess risk equals the trace functional (paired)")
def test_ols_attains_trace_functional():
    model = CovariateModel.gaussian(d=3)
    rng = RngStream(SEED + 2)
    res = ols_risk_decomposition_mc(model, NoiseModel.gaussian(1.0), np.array([1.0, -2.0, 0.5]), 15, 100_000, rng)
    assert abs(res.difference.mean) <= 3 * res.difference.stderr
    assert res.misspec_term.mean == 0.0
    # the variance term is (sigma^2/n) Tr(Sigma~^-1) on exactly the same covariates
    trace = minimax_risk_mc(model, 15, 1.0, 100_000, rng)
    assert res.variance_term.mean == pytest.approx(trace.mean, rel=1e-10)


# 3 ---------------------------------------------------------------------------------

@criterion(3, "trace form equals leverage form; mean leverage is d/(n+1)")
@pytest.mark.parametrize("family", ["gaussian", "uniform"])
@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("n", [10, 25])
def test_leverage_identity(family, d, n):
    model = CovariateModel.gaussian(d=d) if family == "gaussian" else CovariateModel.iid_coords("uniform", d)
    res = leverage_identity_mc(model, n, 1.0, 50_000, RngStream(SEED + 100 * d + n))
    assert abs(res.difference.mean) <= 3 * res.difference.stderr
    assert abs(res.leverage_mean.mean - d / (n + 1)) <= 3 * res.leverage_mean.stderr


# 4 ---------------------------------------------------------------------------------

def _designs(d):
    A = np.eye(d) + np.triu(np.full((d, d), 0.7), 1)
    return {
        "gaussian": CovariateModel.gaussian(d=d),
        "uniform": CovariateModel.iid_coords("uniform", d),
        "student_t5": CovariateModel.iid_coords("student_t", d, dof=5),
        "linear_uniform": CovariateModel.linear_image(CovariateModel.iid_coords("uniform", d), A),
        "linear_student_t5": CovariateModel.linear_image(CovariateModel.iid_coords("student_t", d, dof=5), A),
    }


@criterion(4, "minimax risk >= sigma^2 d / (n - d + 1) for non-degenerate designs")
@pytest.mark.parametrize("name", ["gaussian", "uniform", "student_t5", "linear_uniform", "linear_student_t5"])
@pytest.mark.parametrize("d,n", [(2, 4), (2, 10), (4, 6), (4, 16), (4, 40)])
def test_distribution_free_lower_bound(name, d, n):
    model = _designs(d)[name]
    est = minimax_risk_mc(model, n, 1.0, 20_000, RngStream(SEED + 7 * n + d))
    assert est.mean >= minimax_lower_bound(d, n, 1.0).value - 3 * est.stderr


# 5 ---------------------------------------------------------------------------------

@criterion(5, "singular-design frequency of the two-atom mixture is 1/8")
def test_degeneracy_frequency():
    p = degeneracy_probe(CovariateModel.axis_mixture(np.eye(2)), 4, 100_000, RngStream(SEED + 5))
    assert p.ci_low <= 0.125 <= p.ci_high


# 6 ---------------------------------------------------------------------------------

def _rademacher_tail(n, t):
    # lambda_min = 1 - |mean of n signs|; enumerate all 4^n sign patterns via K ~ Bin(n, 1/2)
    k = np.arange(n + 1)
    r = np.abs(2 * k - n) / n
    return min(1.0, float(stats.binom.pmf(k, n, 0.5)[1 - r <= t + 1e-12].sum()))


@criterion(6, "empirical tail exceeds (0.025 t)^(n/2); matches enumeration")
@pytest.mark.parametrize("n", [2, 4])
def test_tail_lower_side(n):
    t = np.array([0.25, 0.5, 1.0])
    curve = tail_curve_mc(CovariateModel.iid_coords("rademacher", 2), n, t, 100_000, RngStream(SEED + n))
    for i, tk in enumerate(t):
        assert curve.ci_low[i] > tail_lower_envelope(float(tk), n).value
        exact = _rademacher_tail(n, float(tk))
        lo, hi = clopper_pearson(int(curve.counts[i]), curve.replicates, level=0.999)
        assert lo <= exact <= hi


# 7 ---------------------------------------------------------------------------------

@criterion(7, "empirical tail below (C' t)^(alpha n/6); certificate round trip")
@pytest.mark.parametrize("d", [2, 3])
def test_tail_upper_side(d):
    model = CovariateModel.iid_coords("uniform", d)
    fit = SmallBallFit(*model.analytic_small_ball)
    assert fit.C == pytest.approx(math.sqrt(2 / 3)) and fit.alpha == 1.0
    n = 6 * d
    t = np.array([1e-6, 1e-5, 3e-5, 1e-4, 1e-3, 1e-2, 0.1, 0.3, 0.6, 1.0])
    curve = tail_curve_mc(model, n, t, 100_000, RngStream(SEED + 70 + d))
    for i, tk in enumerate(t):
        env = tail_upper_envelope(float(tk), n, d, fit)
        assert curve.prob[i] <= env.value
        assert env.vacuous == (tk >= env.constants_used["nonvacuity_threshold"])
    for u in (0.01, 0.1, 1.0, 5.0):
        cert = pac_bayes_certificate(fit, d, n, u)
        env = tail_upper_envelope(cert.value, n, d, fit)
        assert math.log(env.value) == pytest.approx(-n * u, rel=1e-12, abs=1e-12)


# 8 ---------------------------------------------------------------------------------

@criterion(8, "negative moment finite, >= 1, below 2^(1/q) C', stable under doubling")
def test_negative_moment_stability():
    model = CovariateModel.iid_coords("uniform", 2)
    fit = SmallBallFit(*model.analytic_small_ball)
    a = negative_moment_mc(model, 48, 3.0, 100_000, RngStream(SEED + 8))
    b = negative_moment_mc(model, 48, 3.0, 200_000, RngStream(SEED + 8))
    env = negative_moment_envelope(3.0, 48, 2, fit).value
    for est in (a, b):
        assert math.isfinite(est.mean) and est.mean >= 1.0 and est.mean <= env
    assert abs(b.mean - a.mean) <= 0.05 * a.mean


# 9 ---------------------------------------------------------------------------------

def _random_spd(gen, d):
    Q, _ = np.linalg.qr(gen.standard_normal((d, d)))
    return (Q * np.exp(gen.uniform(-3, 3, d))) @ Q.T


@criterion(9, "Sherman-Morrison, trace-inverse inequality, linear invariance")
def test_sherman_morrison_instances():
    gen = np.random.default_rng(SEED + 9)
    for _ in range(10_000):
        d = int(gen.integers(1, 7))
        lhs, rhs = sherman_morrison_leverage(_random_spd(gen, d), gen.standard_normal(d))
        assert abs(lhs - rhs) <= 1e-8 * abs(lhs)


@criterion(9, "Sherman-Morrison, trace-inverse inequality, linear invariance")
def test_trace_inverse_instances():
    gen = np.random.default_rng(SEED + 90)
    for _ in range(100_000):
        A = _random_spd(gen, int(gen.integers(1, 7)))
        for p in (1.0, 1.5, 2.0):
            lhs, rhs = trace_inverse_approx_check(A, p)
            # equality is attained (d = 1, p = 1, A < 1): allow summation rounding only
            assert lhs <= rhs * (1 + 16 * EPS)


@criterion(9, "Sherman-Morrison, trace-inverse inequality, linear invariance")
@pytest.mark.parametrize("law", ["uniform", "student_t"])
def test_linear_invariance(law):
    kw = {"dof": 5} if law == "student_t" else {}
    base = CovariateModel.iid_coords(law, 3, **kw)
    A = np.array([[3.0, 0.2, -1.0], [0.0, 0.5, 0.4], [1.0, 1.0, 2.0]])
    a = minimax_risk_mc(base, 12, 1.0, 20_000, RngStream(SEED + 99))
    b = minimax_risk_mc(CovariateModel.linear_image(base, A), 12, 1.0, 20_000, RngStream(SEED + 99))
    assert abs(a.mean - b.mean) <= 1e-8 * a.mean


# 10 --------------------------------------------------------------------------------

@criterion(10, "smoothing closed form, phi range, entropy bound, Laplace transform")
@pytest.mark.parametrize("d", [2, 3, 5, 10])
@pytest.mark.parametrize("gamma", [0.05, 0.1, 0.25, 0.5])
def test_smoothing_functional(d, gamma):
    gen = np.random.default_rng(SEED + d)
    B = gen.standard_normal((d, d))
    v = gen.standard_normal(d)
    res = smoothing_functional(B @ B.T + np.eye(d), v / np.linalg.norm(v), gamma, 20_000,
                               RngStream(SEED + int(1000 * gamma) + d))
    assert abs(res.mc - res.closed_form) <= 3 * res.stderr
    assert 0.0 <= res.phi_mc <= d / (d - 1) * gamma**2


@criterion(10, "smoothing closed form, phi range, entropy bound, Laplace transform")
@pytest.mark.parametrize("d", [2, 3, 5])
@pytest.mark.parametrize("gamma", [0.05, 0.1, 0.25, 0.5])
def test_entropy_bound(d, gamma):
    budget = max(100_000, math.ceil(50 / cap_mass(d, gamma)))
    res = entropy_bound_check(d, gamma, budget, RngStream(SEED + int(1000 * gamma) + d))
    assert res.kl <= d * math.log(1 + 2 / gamma)
    assert abs(res.kl - res.kl_exact) <= 4 * res.kl_stderr


@criterion(10, "smoothing closed form, phi range, entropy bound, Laplace transform")
@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0, 100.0, 1000.0])
def test_laplace_uniform_case(lam):
    # Z ~ Uniform[0, 1] has P(Z <= t) <= t, so C = 1 and alpha = 1
    res = laplace_small_ball_check(1.0, 1.0, lam, lambda z: 1.0, support=(0.0, 1.0))
    assert res.measured == pytest.approx(-math.expm1(-lam) / lam, rel=1e-10)
    assert res.passed


# 11 --------------------------------------------------------------------------------

@criterion(11, "Esseen dominance, density bound, Fourier small-ball pipeline")
@pytest.mark.parametrize("law", ["gaussian", "uniform", "laplace"])
def test_esseen_dominance(law):
    z = CoordLaw(law).sample(np.random.default_rng(SEED + 11), 200_000)
    for t in (0.01, 0.05, 0.1, 0.3, 1.0):
        q = levy_concentration_mc(z, t)
        lo, _ = clopper_pearson(round(q * z.size), z.size)
        assert lo <= esseen_bound(law_cf(law), t).value


@criterion(11, "Esseen dominance, density bound, Fourier small-ball pipeline")
def test_density_bound_uniform():
    model = CovariateModel.iid_coords("uniform", 3)
    t = np.array([0.05, 0.1, 0.25, 0.5])
    prof = marginal_concentration_profile(model, t, 1000, 20_000, RngStream(SEED + 111))
    bound = 2 * math.sqrt(2) * CoordLaw("uniform").density_bound * t
    assert np.all(prof.ci_low <= bound)


@criterion(11, "Esseen dominance, density bound, Fourier small-ball pipeline")
def test_fourier_pipeline_laplace():
    C0, alpha = 10.0, 0.5
    # decay verified on a grid bounded away from 0 (|Phi| = 1 - O(xi^2) there)
    assert decay_check(law_cf("laplace", decay=(C0, alpha)), np.linspace(0.1, 1000, 10_000)).passed
    thetas = np.random.default_rng(SEED).standard_normal((200, 3))
    assert subadditive_envelope_ratio("laplace", C0, alpha, np.linspace(0.1, 1000, 10_000), thetas) <= 1.0
    fit = fourier_small_ball_constant(C0, alpha)
    assert fit.C == pytest.approx(32 * math.pi * C0)
    model = CovariateModel.iid_coords("laplace", 3)
    t = np.array([1e-4, 3e-4, 9e-4])
    assert np.all(fit.envelope(t) < 1)
    probe = marginal_small_ball_probe(model, t, 1000, 20_000, RngStream(SEED + 112))
    assert np.all(probe.ci_low <= fit.envelope(t))
    n = math.ceil(6 * 3 / alpha)
    curve = tail_curve_mc(model, n, [0.01, 0.1, 0.5, 1.0], 10_000, RngStream(SEED + 113))
    for i, tk in enumerate(curve.t_grid):
        assert curve.prob[i] <= tail_upper_envelope(float(tk), n, 3, fit).value
