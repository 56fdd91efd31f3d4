"""Run every config in scripts/configs and check the results.

Usage: python3 scripts/run_configs.py [--only NAME ...] [--out-dir results]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from lsqlab.cli import main as lsqlab
from lsqlab.config import load_config

CONFIG_DIR = Path(__file__).parent / "configs"

# report modes applied to each experiment's output
MODES = {
    "minimax_risk_mc": ["sandwich", "envelope"],
    "leverage_identity_mc": ["identity"],
    "ols_risk_decomposition_mc": ["identity"],
    "ridge_bayes_risk_mc": ["identity"],
    "tail_curve_mc": ["sandwich"],
    "negative_moment_mc": ["envelope"],
    "marginal_small_ball_probe": ["sandwich"],
    "smoothing_functional": ["identity", "envelope"],
    "entropy_bound_check": ["envelope"],
    "esseen_bound": ["sandwich"],
    "uniform_marginal_concentration": ["sandwich"],
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--only", nargs="*", default=None, help="config stems to run")
    parser.add_argument("--out-dir", type=Path, default=Path("results"))
    args = parser.parse_args(argv)
    args.out_dir.mkdir(parents=True, exist_ok=True)

    failures = []
    for cfg_path in sorted(CONFIG_DIR.glob("*.cfg")):
        if args.only and cfg_path.stem not in args.only:
            continue
        cfg = load_config(cfg_path)
        suffix = ".csv" if cfg.output_format == "csv" else ".jsonl"
        out = args.out_dir / (cfg_path.stem + suffix)
        print(f"== {cfg_path.stem} ({cfg.experiment})")
        code = lsqlab(["run", "--config", str(cfg_path), "--out", str(out), "--quiet"])
        if code:
            failures.append(f"{cfg_path.stem}: run exit {code}")
            continue
        for mode in MODES.get(cfg.experiment, []):
            if lsqlab(["report", "--mode", mode, str(out)]):
                failures.append(f"{cfg_path.stem}: {mode}")
    print("\n".join(["", "failures:"] + failures) if failures else "\nall checks passed")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
