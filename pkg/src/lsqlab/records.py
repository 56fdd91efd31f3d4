"""Result records and their on-disk formats (json-lines and csv).

Floats are written with 17 significant digits; non-finite values are
written as the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

__all__ = ["ResultRecord", "FIELDS", "dumps_jsonl", "dumps_csv", "write_records", "read_records", "MalformedRecordError"]

FIELDS = (
    "experiment",
    "config_digest",
    "seed",
    "params",
    "estimate",
    "stderr",
    "ci_low",
    "ci_high",
    "bound_values",
    "degenerate_events",
    "wall_time_ms",
)


class MalformedRecordError(ValueError):
    pass


@dataclass
class ResultRecord:
    experiment: str
    config_digest: str
    seed: int
    params: dict[str, Any] = field(default_factory=dict)
    estimate: float = math.nan
    stderr: float = math.nan
    ci_low: float = math.nan
    ci_high: float = math.nan
    bound_values: dict[str, float] = field(default_factory=dict)
    degenerate_events: int = 0
    wall_time_ms: float | None = None

    def as_dict(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in FIELDS}

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "ResultRecord":
        missing = [k for k in FIELDS if k not in obj]
        if missing:
            raise MalformedRecordError(f"record is missing fields: {', '.join(missing)}")
        try:
            return cls(
                experiment=str(obj["experiment"]),
                config_digest=str(obj["config_digest"]),
                seed=int(obj["seed"]),
                params=dict(obj["params"]),
                estimate=_to_float(obj["estimate"]),
                stderr=_to_float(obj["stderr"]),
                ci_low=_to_float(obj["ci_low"]),
                ci_high=_to_float(obj["ci_high"]),
                bound_values={str(k): _to_float(v) for k, v in dict(obj["bound_values"]).items()},
                degenerate_events=int(obj["degenerate_events"]),
                wall_time_ms=None if obj["wall_time_ms"] is None else _to_float(obj["wall_time_ms"]),
            )
        except (TypeError, ValueError) as exc:
            raise MalformedRecordError(f"bad field value: {exc}") from exc

    def summary(self) -> str:
        keys = ("t", "lambda", "gamma", "quantity", "u", "q")
        tag = " ".join(f"{k}={_fmt_short(self.params[k])}" for k in keys if k in self.params)
        bounds = " ".join(f"{k}={_fmt_short(v)}" for k, v in self.bound_values.items())
        line = f"{self.experiment} {tag}".rstrip()
        line += f" estimate={_fmt_short(self.estimate)} stderr={_fmt_short(self.stderr)}"
        line += f" ci=[{_fmt_short(self.ci_low)}, {_fmt_short(self.ci_high)}]"
        if bounds:
            line += f" {bounds}"
        if self.degenerate_events:
            line += f" degenerate={self.degenerate_events}"
        return line


def _fmt_short(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _to_float(v) -> float:
    if isinstance(v, str):
        return float(v)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"expected a number, got {v!r}")
    return float(v)


def _encode(value: Any) -> str:
    """Deterministic JSON with 17-significant-digit floats."""
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        if math.isfinite(value):
            return "%.17g" % value
        return json.dumps("nan" if math.isnan(value) else ("inf" if value > 0 else "-inf"))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_encode(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in value) + "]"
    if hasattr(value, "item"):  # numpy scalar
        return _encode(value.item())
    if hasattr(value, "tolist"):
        return _encode(value.tolist())
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_jsonl(records: Iterable[ResultRecord]) -> str:
    return "".join(_encode(r.as_dict()) + "\n" for r in records)


def dumps_csv(records: Iterable[ResultRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDS)
    for r in records:
        row = []
        for name in FIELDS:
            v = getattr(r, name)
            if isinstance(v, str):
                row.append(v)
            elif v is None:
                row.append("")
            else:
                enc = _encode(v)
                row.append(json.loads(enc) if enc.startswith('"') else enc)
        w.writerow(row)
    return buf.getvalue()


def write_records(records: list[ResultRecord], path: str | Path, fmt: str = "json-lines") -> None:
    """Write all records at once via a temp file in the target directory and a rename."""
    path = Path(path)
    text = dumps_jsonl(records) if fmt == "json-lines" else dumps_csv(records)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_csv(text: str) -> list[ResultRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != FIELDS:
        raise MalformedRecordError("csv header does not match the record fields")
    out = []
    for row in rows[1:]:
        if len(row) != len(FIELDS):
            raise MalformedRecordError("csv row has the wrong number of fields")
        obj: dict[str, Any] = {}
        for name, cell in zip(FIELDS, row):
            if name in ("experiment", "config_digest"):
                obj[name] = cell
            elif cell == "":
                obj[name] = None
            else:
                try:
                    obj[name] = json.loads(cell)
                except json.JSONDecodeError:
                    obj[name] = cell
        out.append(ResultRecord.from_dict(obj))
    return out


def read_records(path: str | Path) -> list[ResultRecord]:
    text = Path(path).read_text()
    if text.startswith(FIELDS[0] + ","):
        return _read_csv(text)
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(f"{path}:{lineno}: not valid JSON ({exc})") from exc
        if not isinstance(obj, dict):
            raise MalformedRecordError(f"{path}:{lineno}: expected an object")
        out.append(ResultRecord.from_dict(obj))
    return out
