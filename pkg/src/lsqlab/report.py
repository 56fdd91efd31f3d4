"""Pass/fail checks over result records.

Bounds are keyed ``lower:<name>`` or ``upper:<name>`` in ``bound_values``.

- ``sandwich``: every lower bound <= ci_high and ci_low <= every upper bound;
- ``identity``: records carrying ``params.identity_target`` are within
  3 stderr of it (the stderr of a paired difference where applicable);
- ``envelope``: lower - 3 stderr <= estimate <= upper + 3 stderr.

``invert`` swaps the roles of lower and upper bounds, which is a quick way to
confirm that a check can fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .records import ResultRecord

__all__ = ["MODES", "CheckResult", "check_records"]

MODES = ("sandwich", "identity", "envelope")
K_STDERR = 3.0


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    record: ResultRecord
    detail: str

    def line(self) -> str:
        tag = ",".join(f"{k}={v}" for k, v in self.record.params.items() if not isinstance(v, (list, dict)))
        return f"{'PASS' if self.passed else 'FAIL'}  {self.record.experiment}  {tag}  {self.detail}"


def _bounds(rec: ResultRecord, invert: bool):
    lower, upper = {}, {}
    for key, value in rec.bound_values.items():
        side, _, name = key.partition(":")
        if side not in ("lower", "upper"):
            continue
        if invert:
            side = "upper" if side == "lower" else "lower"
        (lower if side == "lower" else upper)[name] = value
    return lower, upper


def _check_sandwich(rec: ResultRecord, invert: bool) -> CheckResult | None:
    lower, upper = _bounds(rec, invert)
    if not lower and not upper:
        return None
    fails = [f"{k}={v:.6g} > ci_high={rec.ci_high:.6g}" for k, v in lower.items() if not v <= rec.ci_high]
    fails += [f"ci_low={rec.ci_low:.6g} > {k}={v:.6g}" for k, v in upper.items() if not rec.ci_low <= v]
    return CheckResult(not fails, rec, "; ".join(fails) or "inside envelopes")


def _check_identity(rec: ResultRecord, invert: bool) -> CheckResult | None:
    if "identity_target" not in rec.params:
        return None
    target = float(rec.params["identity_target"])
    gap = abs(rec.estimate - target)
    ok = gap <= K_STDERR * rec.stderr or gap == 0.0
    if invert:
        ok = not ok
    return CheckResult(ok, rec, f"|estimate - {target:.6g}| = {gap:.3g} vs 3 stderr = {K_STDERR * rec.stderr:.3g}")


def _check_envelope(rec: ResultRecord, invert: bool) -> CheckResult | None:
    lower, upper = _bounds(rec, invert)
    if not lower and not upper:
        return None
    slack = K_STDERR * (rec.stderr if math.isfinite(rec.stderr) else 0.0)
    fails = [f"estimate={rec.estimate:.6g} < {k}={v:.6g}" for k, v in lower.items() if not rec.estimate >= v - slack]
    fails += [f"estimate={rec.estimate:.6g} > {k}={v:.6g}" for k, v in upper.items() if not rec.estimate <= v + slack]
    return CheckResult(not fails, rec, "; ".join(fails) or "within bounds")


_CHECKS = {"sandwich": _check_sandwich, "identity": _check_identity, "envelope": _check_envelope}


def check_records(records: list[ResultRecord], mode: str, invert: bool = False) -> list[CheckResult]:
    """Run one check mode over the records; records the mode does not apply to are skipped."""
    if mode not in _CHECKS:
        raise ValueError(f"unknown report mode {mode!r}; expected one of {MODES}")
    out = []
    for rec in records:
        res = _CHECKS[mode](rec, invert)
        if res is not None:
            out.append(res)
    return out
