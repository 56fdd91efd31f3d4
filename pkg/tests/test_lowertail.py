import math

import numpy as np
import pytest
from scipy import stats

from lsqlab.envelope import c_prime
from lsqlab.errors import DegenerateDesignError, InsufficientSamplesError, PreconditionError
from lsqlab.lowertail import (
    SmallBallFit,
    cap_mass,
    entropy_bound_check,
    fit_small_ball,
    lambda_min_mc,
    laplace_small_ball_check,
    marginal_small_ball_probe,
    moment_tail_conversions,
    negative_moment_envelope,
    negative_moment_mc,
    pac_bayes_certificate,
    sample_cap,
    smoothing_functional,
    squared_marginal_constants,
    tail_curve_mc,
    tail_lower_envelope,
    tail_upper_envelope,
    truncated_small_ball_envelope,
)
from lsqlab.models import CovariateModel
from lsqlab.rng import RngStream


def rademacher_tail_exact(n: int, t: float) -> float:
    """P(lambda_min <= t) for d=2 Rademacher coordinates.

    The sample covariance is [[1, r], [r, 1]] with r the mean of n i.i.d.
    signs, so lambda_min = 1 - |r| and r = (2K - n)/n with K ~ Bin(n, 1/2).
    """
    k = np.arange(n + 1)
    r = np.abs(2 * k - n) / n
    return float(stats.binom.pmf(k, n, 0.5)[1 - r <= t + 1e-12].sum())


@pytest.mark.parametrize("n", [3, 6])
def test_tail_curve_matches_enumeration(n):
    t = np.array([0.1, 0.34, 0.5, 1.0])
    curve = tail_curve_mc(CovariateModel.iid_coords("rademacher", 2), n, t, 40_000, RngStream(n))
    exact = np.clip([rademacher_tail_exact(n, tk) for tk in t], 0.0, 1.0)
    tol = 4 * np.sqrt(exact * (1 - exact) / 40_000) + 1e-12
    assert np.all(np.abs(curve.prob - exact) <= tol)
    assert np.all(np.diff(curve.prob) >= 0)
    p = curve.point(2)
    assert p.ci_low <= curve.prob[2] <= p.ci_high


def test_tail_curve_preconditions():
    model = CovariateModel.gaussian(d=2)
    with pytest.raises(PreconditionError):
        tail_curve_mc(model, 10, [0.5, 0.2], 1000, RngStream(0))
    with pytest.raises(PreconditionError):
        tail_curve_mc(model, 10, [0.5, 1.5], 1000, RngStream(0))
    with pytest.raises(PreconditionError):
        tail_curve_mc(model, 10, [0.5], 999, RngStream(0))


def test_lambda_min_whitening():
    cov = np.diag([9.0, 1.0])
    raw = lambda_min_mc(CovariateModel.gaussian(cov), 4000, 20, RngStream(1), whiten=False)
    white = lambda_min_mc(CovariateModel.gaussian(cov), 4000, 20, RngStream(1), whiten=True)
    assert np.all(np.abs(raw - 1) < 0.15) and np.all(np.abs(white - 1) < 0.15)


def test_envelope_values():
    assert tail_lower_envelope(1.0, 2).value == pytest.approx(0.025)
    assert tail_lower_envelope(0.4, 4).value == pytest.approx(1e-4)
    assert c_prime(1.0, 1.0) == pytest.approx(3 * math.exp(10))
    env = tail_upper_envelope(1e-5, 12, 2, SmallBallFit(1.0, 1.0))
    assert env.constants_used["nonvacuity_threshold"] == pytest.approx(1 / (3 * math.exp(10)))
    assert env.value == pytest.approx((3 * math.exp(10) * 1e-5) ** 2)
    assert not env.vacuous
    assert tail_upper_envelope(0.5, 12, 2, SmallBallFit(1.0, 1.0)).vacuous


def test_upper_envelope_preconditions():
    with pytest.raises(PreconditionError, match="6 d / alpha"):
        tail_upper_envelope(0.5, 11, 2, SmallBallFit(1.0, 1.0))
    with pytest.raises(PreconditionError, match="0.16"):
        tail_upper_envelope(0.5, 12, 2, SmallBallFit(0.1, 1.0))


def test_certificate_value():
    cert = pac_bayes_certificate(SmallBallFit(1.0, 1.0), 2, 12, 1.0)
    assert cert.value == pytest.approx(math.exp(-16) / 3)
    assert cert.constants_used["failure_probability"] == pytest.approx(math.exp(-12))


def test_conversion_branches():
    assert moment_tail_conversions(1.0, 2.0, 1.0, "tail_to_moment").value == pytest.approx(2.0)
    assert moment_tail_conversions(0.2, None, 3.0, "moment_to_tail", t=1.0).value == pytest.approx(0.008)
    assert moment_tail_conversions(1.0, 2.0, 2.0, "divergence").value == math.inf
    with pytest.raises(PreconditionError):
        moment_tail_conversions(1.0, 2.0, 2.0, "tail_to_moment")
    with pytest.raises(PreconditionError):
        moment_tail_conversions(1.0, 2.0, 1.0, "divergence")
    with pytest.raises(ValueError):
        moment_tail_conversions(1.0, 2.0, 1.0, "sideways")


def test_tail_to_moment_holds_for_a_beta_variable():
    # Z ~ Beta(2, 1): P(Z <= t) = t^2, so C=1, a=2 and q=1 gives E max(1, 1/Z) <= 2
    z = np.sqrt(np.random.default_rng(0).random(200_000))
    measured = np.maximum(1.0, 1.0 / z).mean()
    assert measured == pytest.approx(2.0, rel=0.01)  # exactly 2 for this law
    assert measured <= moment_tail_conversions(1.0, 2.0, 1.0, "tail_to_moment").value + 0.02


def test_fit_recovers_power_law():
    t = np.geomspace(1e-3, 0.4, 12)
    fit = fit_small_ball(t, (2 * t) ** 0.5)
    assert fit.alpha == pytest.approx(0.5, abs=1e-7) and fit.C == pytest.approx(2.0, rel=1e-6)
    with pytest.raises(InsufficientSamplesError):
        fit_small_ball(t, np.zeros_like(t))


def test_probe_uses_analytic_gaussian_constants():
    probe = marginal_small_ball_probe(CovariateModel.gaussian(d=3), [0.01, 0.1, 0.5], 1000, 4000, RngStream(2))
    assert probe.fit.analytic and probe.fit.C == pytest.approx(math.sqrt(2 / math.pi))
    assert probe.consistent
    fitted = marginal_small_ball_probe(CovariateModel.gaussian(d=3), [0.05, 0.1, 0.2, 0.5], 1000, 4000,
                                       RngStream(2), use_analytic=False)
    assert 0.7 < fitted.fit.alpha <= 1.0


def test_probe_flags_degenerate_designs():
    with pytest.raises(DegenerateDesignError):
        marginal_small_ball_probe(CovariateModel.iid_coords("rademacher", 2), [0.01, 0.1, 0.5], 1000, 2000,
                                  RngStream(3))


def test_truncated_probe_under_envelope():
    model = CovariateModel.iid_coords("laplace", 3)
    t = np.array([0.05, 0.1, 0.3])
    probe = marginal_small_ball_probe(model, t, 1000, 4000, RngStream(4), truncate=True)
    C, alpha = model.analytic_small_ball
    assert np.all(probe.ci_low <= truncated_small_ball_envelope(t, C, alpha))
    assert np.all(probe.ci_low <= probe.probe_max) and np.all(probe.probe_max <= probe.ci_high)


def test_squared_constants_match_truncated_envelope():
    C, alpha = 1.3, 0.7
    cz, az = squared_marginal_constants(C, alpha)
    t = np.geomspace(1e-4, 1, 7)
    np.testing.assert_allclose((cz * t) ** az, truncated_small_ball_envelope(np.sqrt(t), C, alpha))


def test_negative_moment_of_constant_design():
    est = negative_moment_mc(CovariateModel.axis_mixture([[1.0]]), 24, 1.0, 1000, RngStream(0))
    assert est.mean == pytest.approx(1.0)


def test_negative_moment_below_envelope_and_warns():
    model = CovariateModel.iid_coords("uniform", 2)
    est = negative_moment_mc(model, 48, 2.0, 5000, RngStream(5))
    env = negative_moment_envelope(2.0, 48, 2, SmallBallFit(*model.analytic_small_ball))
    assert est.mean <= env.value
    with pytest.warns(RuntimeWarning):
        negative_moment_mc(model, 12, 2.0, 2000, RngStream(5))
    with pytest.raises(PreconditionError):
        negative_moment_envelope(5.0, 48, 2, SmallBallFit(1.0, 1.0))


def test_laplace_check_quadrature_and_samples():
    lam = 10.0
    check = laplace_small_ball_check(1.0, 1.0, lam, lambda z: 1.0, support=(0.0, 1.0))
    assert check.measured == pytest.approx((1 - math.exp(-lam)) / lam, abs=1e-10)
    assert check.passed and not check.vacuous
    z = np.random.default_rng(6).random(100_000)
    mc = laplace_small_ball_check(1.0, 1.0, lam, z)
    assert mc.measured == pytest.approx(check.measured, abs=5 * mc.stderr)


def test_cap_mass_matches_archimedes():
    for gamma in (0.01, 0.2, 0.5):
        assert cap_mass(3, gamma) == pytest.approx(gamma**2 / 4)
    g = np.random.default_rng(7).standard_normal((400_000, 5))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    frac = np.mean(np.linalg.norm(g - np.eye(5)[0], axis=1) <= 0.5)
    assert cap_mass(5, 0.5) == pytest.approx(frac, abs=4 * math.sqrt(frac / 400_000))


@pytest.mark.parametrize("gamma", [0.5, 0.05])  # rejection and polar routes
def test_cap_samples_are_uniform(gamma):
    v = np.array([0.0, 0.6, 0.8])
    theta = sample_cap(v, gamma, 20_000, np.random.default_rng(8))
    np.testing.assert_allclose(np.linalg.norm(theta, axis=1), 1.0, atol=1e-12)
    assert np.all(np.linalg.norm(theta - v, axis=1) <= gamma + 1e-12)
    # on the 2-sphere the height along v is uniform over the cap
    s = (1 - theta @ v) / (gamma**2 / 2)
    assert stats.kstest(s, "uniform").pvalue > 1e-3
    # tangent direction is isotropic
    assert abs(np.mean(theta @ np.array([1.0, 0.0, 0.0]))) < 0.01 * gamma + 4 * gamma / math.sqrt(20_000)


def test_smoothing_functional():
    ident = smoothing_functional(np.eye(4), np.eye(4)[0], 0.3, 5000, RngStream(9))
    assert ident.mc == pytest.approx(1.0) and ident.closed_form == pytest.approx(1.0)
    A = np.random.default_rng(10).standard_normal((4, 4))
    check = smoothing_functional(A @ A.T, np.full(4, 0.5), 0.4, 50_000, RngStream(10))
    assert check.agrees and check.phi_in_range
    with pytest.raises(PreconditionError):
        smoothing_functional(np.eye(3), [1.0, 1.0, 0.0], 0.3, 10, RngStream(0))
    with pytest.raises(PreconditionError):
        smoothing_functional(np.eye(3), [1.0, 0.0, 0.0], 0.6, 10, RngStream(0))


def test_entropy_check():
    res = entropy_bound_check(3, 0.5, 200_000, RngStream(11))
    assert res.kl_exact == pytest.approx(-math.log(0.0625))
    assert abs(res.kl - res.kl_exact) <= 4 * res.kl_stderr
    assert res.passed
    with pytest.raises(InsufficientSamplesError) as info:
        entropy_bound_check(8, 0.05, 1000, RngStream(0))
    assert info.value.suggested_budget == math.ceil(10 / cap_mass(8, 0.05))
