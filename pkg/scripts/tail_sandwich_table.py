"""Tabulate P(lambda_min <= t) against both tail envelopes for several designs."""

from __future__ import annotations

import argparse

import numpy as np

from lsqlab import CovariateModel, RngStream
from lsqlab.lowertail import SmallBallFit, tail_curve_mc, tail_lower_envelope, tail_upper_envelope

DESIGNS = {
    "gaussian": lambda d: CovariateModel.gaussian(d=d),
    "uniform": lambda d: CovariateModel.iid_coords("uniform", d),
    "student_t5": lambda d: CovariateModel.iid_coords("student_t", d, dof=5),
    "rademacher": lambda d: CovariateModel.iid_coords("rademacher", d),
}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--d", type=int, default=2)
    parser.add_argument("--n", type=int, default=12)
    parser.add_argument("--replicates", type=int, default=50_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    t = np.array([1e-4, 1e-3, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0])

    for name, make in DESIGNS.items():
        model = make(args.d)
        curve = tail_curve_mc(model, args.n, t, args.replicates, RngStream(args.seed))
        fit = SmallBallFit(*model.analytic_small_ball) if model.analytic_small_ball else None
        print(f"\n{name}  d={args.d} n={args.n}")
        print(f"{'t':>8} {'lower':>11} {'ci_low':>9} {'P_hat':>9} {'ci_high':>9} {'upper':>11}")
        for i, tk in enumerate(t):
            lo = tail_lower_envelope(float(tk), args.n).value
            up = "-"
            if fit is not None and args.n >= 6 * args.d / fit.alpha:
                env = tail_upper_envelope(float(tk), args.n, args.d, fit)
                up = f"{env.value:11.3g}" + (" (vacuous)" if env.vacuous else "")
            print(f"{tk:8.0e} {lo:11.3g} {curve.ci_low[i]:9.4f} {curve.prob[i]:9.4f} {curve.ci_high[i]:9.4f} {up:>11}")


if __name__ == "__main__":
    main()
