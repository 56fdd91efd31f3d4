"""Leverage dispersion in the proportional regime d/n -> gamma."""

from __future__ import annotations

import argparse

from lsqlab import CovariateModel, RngStream
from lsqlab.minimax import leverage_trend_highdim


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--gamma", type=float, default=0.25)
    parser.add_argument("--ns", type=int, nargs="+", default=[20, 40, 80, 160])
    parser.add_argument("--law", default="uniform")
    parser.add_argument("--replicates", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    def family(n: int) -> CovariateModel:
        return CovariateModel.iid_coords(args.law, max(1, round(args.gamma * n)))

    rows = leverage_trend_highdim(family, args.ns, args.gamma, args.replicates, RngStream(args.seed))
    keys = list(rows[0])
    print("  ".join(f"{k:>14}" for k in keys))
    for row in rows:
        print("  ".join(f"{row[k]:>14.5g}" if isinstance(row[k], float) else f"{row[k]!s:>14}" for k in keys))


if __name__ == "__main__":
    main()
