"""Named experiments: each turns a config into result records."""

from __future__ import annotations

import math
import time
from typing import Any, Callable

import numpy as np

from . import anticoncentration as ac
from . import estimators, lowertail, minimax
from .config import ConfigError, ExperimentConfig, build_model, build_noise
from .models import CoordLaw, CovariateModel
from .records import ResultRecord
from .rng import RngStream
from .stats import Z95, ProportionEstimate, RiskEstimate

__all__ = ["EXPERIMENTS", "run_experiment", "describe_experiments"]

Row = dict[str, Any]


def _risk_row(est: RiskEstimate, **params) -> Row:
    return {
        "params": params,
        "estimate": est.mean,
        "stderr": est.stderr,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "degenerate_events": est.degenerate_events,
        "bound_values": {},
    }


def _proportion_row(est: ProportionEstimate, **params) -> Row:
    return {
        "params": params,
        "estimate": est.frequency,
        "stderr": est.stderr,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "degenerate_events": 0,
        "bound_values": {},
    }


def _value_row(value: float, **params) -> Row:
    return {"params": params, "estimate": value, "stderr": 0.0, "ci_low": value, "ci_high": value,
            "degenerate_events": 0, "bound_values": {}}


def _model(cfg: ExperimentConfig) -> CovariateModel:
    model = build_model(cfg.model, cfg.d)
    if cfg.d is not None and model.d != cfg.d:
        raise ConfigError(f"model dimension {model.d} does not match d={cfg.d}")
    return model


def _need_n(cfg: ExperimentConfig) -> int:
    cfg.require("n")
    return cfg.n


def _small_ball(cfg: ExperimentConfig, model: CovariateModel) -> lowertail.SmallBallFit | None:
    if "C" in cfg.params and "alpha" in cfg.params:
        return lowertail.SmallBallFit(float(cfg.params["C"]), float(cfg.params["alpha"]))
    if model.analytic_small_ball is not None:
        C, alpha = model.analytic_small_ball
        return lowertail.SmallBallFit(C, alpha, analytic=True)
    return None


# -- minimax lab -----------------------------------------------------------------

def _minimax_like(cfg, rng, threads, fn) -> list[Row]:
    model, n = _model(cfg), _need_n(cfg)
    est = fn(model, n, cfg.sigma2, cfg.replicates, rng, threads)
    row = _risk_row(est, d=model.d, n=n, sigma2=cfg.sigma2, converging=est.converging)
    if n >= model.d:
        row["bound_values"]["lower:minimax_lower_bound"] = minimax.minimax_lower_bound(model.d, n, cfg.sigma2).value
    if model.family == "gaussian" and n >= model.d + 2:
        row["bound_values"]["reference:gaussian_exact_risk"] = minimax.gaussian_exact_risk(model.d, n, cfg.sigma2).value
    p = cfg.params
    if {"C", "alpha", "kappa"} <= p.keys():
        try:
            row["bound_values"]["upper:well_specified"] = minimax.upper_bound_well_specified(
                model.d, n, p["alpha"], p["C"], p["kappa"], cfg.sigma2).value
        except ValueError as exc:
            row["params"]["upper_bound_skipped"] = str(exc)
    return [row]


def exp_minimax_risk(cfg, rng, threads):
    return _minimax_like(cfg, rng, threads, minimax.minimax_risk_mc)


def exp_estimation_risk(cfg, rng, threads):
    model, n = _model(cfg), _need_n(cfg)
    est = minimax.estimation_risk_mc(model, n, cfg.sigma2, cfg.replicates, rng, threads)
    return [_risk_row(est, d=model.d, n=n, sigma2=cfg.sigma2, converging=est.converging)]


def exp_leverage_identity(cfg, rng, threads):
    model, n = _model(cfg), _need_n(cfg)
    res = minimax.leverage_identity_mc(model, n, cfg.sigma2, cfg.replicates, rng, threads,
                                       designated=cfg.param("designated", "last"))
    base = dict(d=model.d, n=n, sigma2=cfg.sigma2)
    return [
        _risk_row(res.trace_form, quantity="trace_form", **base),
        _risk_row(res.leverage_form, quantity="leverage_form", **base),
        _risk_row(res.difference, quantity="difference", identity_target=0.0, **base),
        _risk_row(res.leverage_mean, quantity="leverage_mean", identity_target=model.d / (n + 1), **base),
    ]


def exp_ols_decomposition(cfg, rng, threads):
    model, n = _model(cfg), _need_n(cfg)
    noise = build_noise(cfg.noise, cfg.sigma2)
    beta = np.asarray(cfg.param("beta_star", [0.0] * model.d), dtype=float)
    res = estimators.ols_risk_decomposition_mc(model, noise, beta, n, cfg.replicates, rng, threads)
    base = dict(d=model.d, n=n, sigma2=cfg.sigma2, noise=noise.kind)
    return [
        _risk_row(res.total, quantity="total", **base),
        _risk_row(res.variance_term, quantity="variance_term", **base),
        _risk_row(res.misspec_term, quantity="misspec_term", **base),
        _risk_row(res.difference, quantity="difference", identity_target=0.0, **base),
    ]


def exp_ridge_bayes(cfg, rng, threads):
    model, n = _model(cfg), _need_n(cfg)
    rows = []
    for k, lam in enumerate(cfg.grid("lambda_grid")):
        res = estimators.ridge_bayes_risk_mc(model, cfg.sigma2, lam, n, cfg.replicates, rng.child(k), threads)
        base = dict(d=model.d, n=n, sigma2=cfg.sigma2)
        base["lambda"] = lam
        rows += [
            _risk_row(res.bayes_mc, quantity="bayes", **base),
            _risk_row(res.formula_mc, quantity="formula", **base),
            _risk_row(res.difference, quantity="difference", identity_target=0.0, **base),
        ]
    return rows


def exp_degeneracy(cfg, rng, threads):
    model, n = _model(cfg), _need_n(cfg)
    est = minimax.degeneracy_probe(model, n, cfg.replicates, rng, threads)
    row = _proportion_row(est, d=model.d, n=n)
    if "expected" in cfg.params:
        row["params"]["expected"] = cfg.params["expected"]
    return [row]


def exp_minimax_bounds(cfg, rng, threads):
    cfg.require("d", "n")
    p = cfg.params
    row = _value_row(math.nan, d=cfg.d, n=cfg.n, sigma2=cfg.sigma2)
    row["bound_values"]["lower:minimax_lower_bound"] = minimax.minimax_lower_bound(cfg.d, cfg.n, cfg.sigma2).value
    if cfg.n >= cfg.d + 2:
        row["bound_values"]["reference:gaussian_exact_risk"] = minimax.gaussian_exact_risk(cfg.d, cfg.n, cfg.sigma2).value
    if {"C", "alpha", "kappa"} <= p.keys():
        row["bound_values"]["upper:well_specified"] = minimax.upper_bound_well_specified(
            cfg.d, cfg.n, p["alpha"], p["C"], p["kappa"], cfg.sigma2).value
        row["bound_values"]["upper:misspecified"] = minimax.upper_bound_misspecified(
            cfg.d, cfg.n, p["alpha"], p["C"], p["kappa"], cfg.sigma2).value
    return [row]


def exp_leverage_trend(cfg, rng, threads):
    gamma = float(cfg.param("gamma", 0.25))
    ns = [int(x) for x in cfg.grid("n_grid")]
    family = cfg.model.get("family", "gaussian")

    def make(n: int) -> CovariateModel:
        d = max(1, int(round(gamma * n)))
        return build_model(cfg.model if family != "gaussian" else {"family": "gaussian"}, d)

    rows = []
    for r in minimax.leverage_trend_highdim(make, ns, gamma, cfg.replicates, rng, threads):
        row = _value_row(r["mean_abs_dev"], gamma=gamma, **{k: v for k, v in r.items() if k != "mean_abs_dev"})
        rows.append(row)
    return rows


# -- lower-tail lab -----------------------------------------------------------------

def exp_tail_curve(cfg, rng, threads):
    model, n = _model(cfg), _need_n(cfg)
    curve = lowertail.tail_curve_mc(model, n, cfg.grid("t_grid"), cfg.replicates, rng,
                                    whiten=bool(cfg.param("whiten", True)), threads=threads)
    fit = _small_ball(cfg, model)
    rows = []
    for i, t in enumerate(curve.t_grid):
        row = _proportion_row(curve.point(i), d=model.d, n=n, t=float(t))
        if model.d >= 2:
            row["bound_values"]["lower:tail_lower"] = lowertail.tail_lower_envelope(float(t), n).value
        if fit is not None and n >= 6 * model.d / fit.alpha:
            env = lowertail.tail_upper_envelope(float(t), n, model.d, fit)
            row["bound_values"]["upper:tail_upper"] = env.value
            row["params"]["upper_vacuous"] = env.vacuous
        rows.append(row)
    return rows


def exp_small_ball_probe(cfg, rng, threads):
    model = _model(cfg)
    probe = lowertail.marginal_small_ball_probe(
        model, cfg.grid("t_grid"), int(cfg.param("theta_budget", 1000)),
        int(cfg.param("samples_per_theta", 10_000)), rng,
        truncate=bool(cfg.param("truncate", False)), use_analytic=bool(cfg.param("use_analytic", True)))
    fit = probe.fit
    rows = []
    for i, t in enumerate(probe.t_grid):
        p = float(probe.probe_max[i])
        se = float(probe.probe_stderr[i])
        row = {"params": dict(d=model.d, t=float(t), C=fit.C, alpha=fit.alpha, analytic=fit.analytic),
               "estimate": p, "stderr": se, "ci_low": float(probe.ci_low[i]), "ci_high": float(probe.ci_high[i]),
               "degenerate_events": 0, "bound_values": {"upper:small_ball": (fit.C * t) ** fit.alpha}}
        if model.d >= 2 and t <= 1:
            row["bound_values"]["lower:universal_floor"] = lowertail.SMALL_BALL_LOWER_SLOPE * t
        rows.append(row)
    return rows


def exp_negative_moment(cfg, rng, threads):
    model, n = _model(cfg), _need_n(cfg)
    q = float(cfg.param("q", 1.0))
    fit = _small_ball(cfg, model)
    est = lowertail.negative_moment_mc(model, n, q, cfg.replicates, rng, threads,
                                       alpha=fit.alpha if fit else None)
    row = _risk_row(est, d=model.d, n=n, q=q, converging=est.converging)
    row["bound_values"]["lower:trivial"] = 1.0
    if fit is not None and n >= 6 * model.d / fit.alpha and 1 <= q <= fit.alpha * n / 12:
        row["bound_values"]["upper:negative_moment"] = lowertail.negative_moment_envelope(q, n, model.d, fit).value
    return [row]


def exp_smoothing(cfg, rng, threads):
    cfg.require("d")
    d = cfg.d
    Sigma = np.asarray(cfg.param("Sigma", np.eye(d).tolist()), dtype=float)
    v = np.asarray(cfg.param("v", [1.0] + [0.0] * (d - 1)), dtype=float)
    rows = []
    for k, gamma in enumerate(cfg.grid("gamma_grid")):
        res = lowertail.smoothing_functional(Sigma, v, gamma, cfg.replicates, rng.child(k))
        diff = res.mc - res.closed_form
        row = _value_row(diff, d=d, gamma=gamma, quantity="mc_minus_closed_form", identity_target=0.0,
                         mc=res.mc, closed_form=res.closed_form, phi_mc=res.phi_mc)
        row.update(stderr=res.stderr, ci_low=diff - Z95 * res.stderr,
                   ci_high=diff + Z95 * res.stderr)
        rows.append(row)
        phi = _value_row(res.phi_mc, d=d, gamma=gamma, quantity="phi")
        phi["bound_values"] = {"lower:zero": 0.0, "upper:phi_bound": res.phi_bound}
        rows.append(phi)
    return rows


def exp_entropy(cfg, rng, threads):
    cfg.require("d")
    rows = []
    for k, gamma in enumerate(cfg.grid("gamma_grid")):
        res = lowertail.entropy_bound_check(cfg.d, gamma, cfg.replicates, rng.child(k))
        row = _value_row(res.kl, d=cfg.d, gamma=gamma, kl_exact=res.kl_exact, hits=res.hits)
        row.update(stderr=res.kl_stderr, ci_low=res.kl - Z95 * res.kl_stderr,
                   ci_high=res.kl + Z95 * res.kl_stderr)
        row["bound_values"]["upper:entropy"] = res.bound
        rows.append(row)
    return rows


def exp_pac_bayes(cfg, rng, threads):
    cfg.require("d", "n")
    fit = lowertail.SmallBallFit(float(cfg.param("C", 1.0)), float(cfg.param("alpha", 1.0)))
    rows = []
    for u in cfg.grid("u_grid", [1.0]):
        cert = lowertail.pac_bayes_certificate(fit, cfg.d, cfg.n, u)
        env = lowertail.tail_upper_envelope(cert.value, cfg.n, cfg.d, fit) if cert.value > 0 else None
        row = _value_row(cert.value, d=cfg.d, n=cfg.n, u=u, C=fit.C, alpha=fit.alpha,
                         log_failure=-cfg.n * u)
        if env is not None:
            row["params"]["log_envelope_at_threshold"] = math.log(env.value) if env.value > 0 else -math.inf
        rows.append(row)
    return rows


# -- anti-concentration ----------------------------------------------------------------

def exp_esseen(cfg, rng, threads):
    law = CoordLaw(cfg.model.get("law", "gaussian"), dof=cfg.model.get("dof"))
    z = law.sample(rng.generator(), cfg.replicates)
    char = ac.law_cf(law)
    rows = []
    for t in cfg.grid("t_grid"):
        q = ac.levy_concentration_mc(z, t)
        se = math.sqrt(q * (1 - q) / z.size)
        bound = ac.esseen_bound(char, t)
        row = {"params": {"law": law.name, "t": t, "quad_error": bound.quad_error, "vacuous": bound.vacuous},
               "estimate": q, "stderr": se, "ci_low": max(0.0, q - 3 * se), "ci_high": min(1.0, q + 3 * se),
               "degenerate_events": 0, "bound_values": {"upper:esseen": bound.value + 3 * bound.quad_error}}
        rows.append(row)
    return rows


def exp_marginal_concentration(cfg, rng, threads):
    model = _model(cfg)
    prof = ac.marginal_concentration_profile(model, cfg.grid("t_grid"), int(cfg.param("theta_budget", 1000)),
                                             int(cfg.param("samples_per_theta", 10_000)), rng)
    law = model.coord_law
    rows = []
    for i, t in enumerate(prof.t_grid):
        q, se = float(prof.q_max[i]), float(prof.stderr[i])
        row = {"params": {"d": model.d, "t": float(t), "q_axes": float(prof.q_axes[i]),
                          "q_diagonal": float(prof.q_diagonal[i])},
               "estimate": q, "stderr": se, "ci_low": float(prof.ci_low[i]), "ci_high": float(prof.ci_high[i]),
               "degenerate_events": 0, "bound_values": {}}
        if law is not None and law.density_bound is not None:
            row["bound_values"]["upper:density"] = 2 * math.sqrt(2) * law.density_bound * t
        rows.append(row)
    return rows


def exp_fourier_constant(cfg, rng, threads):
    C0 = float(cfg.param("C0", 1.0))
    rows = []
    for alpha in cfg.grid("alpha_grid", [cfg.param("alpha", 0.5)]):
        fit = ac.fourier_small_ball_constant(C0, float(alpha))
        rows.append(_value_row(fit.C, C0=C0, alpha=float(alpha)))
    return rows


EXPERIMENTS: dict[str, tuple[Callable, str]] = {
    "minimax_risk_mc": (exp_minimax_risk, "(sigma2/n) E Tr(whitened Sigma_hat^-1) with its lower bound"),
    "estimation_risk_mc": (exp_estimation_risk, "(sigma2/n) E Tr(Sigma_hat^-1), parameter error"),
    "leverage_identity_mc": (exp_leverage_identity, "trace form vs leverage form on shared draws"),
    "ols_risk_decomposition_mc": (exp_ols_decomposition, "direct OLS excess risk vs its two-term decomposition"),
    "ridge_bayes_risk_mc": (exp_ridge_bayes, "ridge Bayes risk vs trace formula over grids.lambda_grid"),
    "degeneracy_probe": (exp_degeneracy, "frequency of singular sample covariances"),
    "minimax_bounds": (exp_minimax_bounds, "closed-form lower, exact and upper risk bounds"),
    "leverage_trend_highdim": (exp_leverage_trend, "leverage dispersion as d/n -> gamma over grids.n_grid"),
    "tail_curve_mc": (exp_tail_curve, "P(lambda_min <= t) over grids.t_grid with both envelopes"),
    "marginal_small_ball_probe": (exp_small_ball_probe, "max over directions of P(|<theta,X~>| <= t)"),
    "negative_moment_mc": (exp_negative_moment, "E[max(1, 1/lambda_min)^q]^(1/q) with its envelope"),
    "smoothing_functional": (exp_smoothing, "cap average vs closed form over grids.gamma_grid"),
    "entropy_bound_check": (exp_entropy, "cap KL vs d log(1 + 2/gamma) over grids.gamma_grid"),
    "pac_bayes_certificate": (exp_pac_bayes, "deviation threshold t(u) over grids.u_grid"),
    "esseen_bound": (exp_esseen, "Levy concentration vs Esseen integral over grids.t_grid"),
    "uniform_marginal_concentration": (exp_marginal_concentration, "Q_X(t) probe vs density bound"),
    "fourier_small_ball_constant": (exp_fourier_constant, "small-ball constant from coordinate decay"),
}


def describe_experiments() -> list[tuple[str, str]]:
    return [(name, desc) for name, (_, desc) in EXPERIMENTS.items()]


def run_experiment(cfg: ExperimentConfig, seed: int | None = None, threads: int | str | None = None,
                   timing: bool = False) -> list[ResultRecord]:
    """Execute ``cfg.experiment`` and wrap its rows as records."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}; see list-experiments")
    seed = cfg.seed if seed is None else seed
    threads = threads if threads is not None else cfg.threads
    fn, _ = EXPERIMENTS[cfg.experiment]
    start = time.perf_counter()
    rows = fn(cfg, RngStream(seed), threads)
    elapsed = (time.perf_counter() - start) * 1e3 if timing else None
    return [
        ResultRecord(
            experiment=cfg.experiment,
            config_digest=cfg.digest,
            seed=seed,
            params=row["params"],
            estimate=float(row["estimate"]),
            stderr=float(row["stderr"]),
            ci_low=float(row["ci_low"]),
            ci_high=float(row["ci_high"]),
            bound_values={k: float(v) for k, v in row["bound_values"].items()},
            degenerate_events=int(row["degenerate_events"]),
            wall_time_ms=elapsed,
        )
        for row in rows
    ]
