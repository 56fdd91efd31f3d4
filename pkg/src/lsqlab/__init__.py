"""Numerical lab for random-design least squares and the lower tail of sample covariances."""

from .anticoncentration import (
    CharFnSpec,
    decay_check,
    esseen_bound,
    fourier_small_ball_constant,
    levy_concentration_mc,
    uniform_marginal_concentration,
)
from .envelope import BoundEnvelope, c_prime
from .errors import (
    DegenerateDesignError,
    InsufficientSamplesError,
    NumericError,
    PreconditionError,
    SingularMatrixError,
)
from .estimators import excess_risk, ols_fit, ols_risk_decomposition_mc, ridge_bayes_risk_mc, ridge_fit
from .lowertail import (
    SmallBallFit,
    TailCurve,
    entropy_bound_check,
    marginal_small_ball_probe,
    negative_moment_mc,
    pac_bayes_certificate,
    smoothing_functional,
    tail_curve_mc,
    tail_lower_envelope,
    tail_upper_envelope,
)
from .minimax import (
    degeneracy_probe,
    estimation_risk_mc,
    gaussian_exact_risk,
    leverage_identity_mc,
    minimax_lower_bound,
    minimax_risk_mc,
)
from .models import CoordLaw, CovariateModel, NoiseModel
from .rng import RngStream
from .stats import ProportionEstimate, RiskEstimate

__version__ = "0.1.0"
