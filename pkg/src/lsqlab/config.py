"""Experiment configuration files.

A config is flat ``key = value`` text.  Keys are dotted (``model.family``,
``grids.t_grid``) and values are JSON (numbers, strings, lists); a bare
word that is not valid JSON is read as a string.  ``#`` starts a comment.

The digest is the SHA-256 of the canonical serialization (sorted keys,
compact JSON values) with run-time keys (seed, output, threads) left out.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .models import CoordLaw, CovariateModel, NoiseModel
from .registry import NOISE_MEANS, NOISE_SDS

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config", "build_model", "build_noise"]

RUNTIME_KEYS = ("seed", "threads", "output.path", "output.format")
OUTPUT_FORMATS = ("json-lines", "csv")
TOP_LEVEL = ("experiment", "d", "n", "sigma2", "replicates", "seed", "threads")
SECTIONS = ("model", "noise", "grids", "output", "params")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (exit code 2)."""


def _parse_value(raw: str) -> Any:
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_pairs(text: str) -> dict[str, Any]:
    pairs: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = _parse_value(value)
    return pairs


def _nest(pairs: dict[str, Any], prefix: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in pairs.items():
        if not key.startswith(prefix + "."):
            continue
        node = out
        parts = key[len(prefix) + 1:].split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return out


@dataclass
class ExperimentConfig:
    experiment: str
    model: dict[str, Any] = field(default_factory=dict)
    noise: dict[str, Any] = field(default_factory=dict)
    d: int | None = None
    n: int | None = None
    sigma2: float = 1.0
    replicates: int = 10_000
    seed: int = 0
    grids: dict[str, list[float]] = field(default_factory=dict)
    params: dict[str, Any] = field(default_factory=dict)
    output_path: str | None = None
    output_format: str = "json-lines"
    threads: int | str | None = None
    pairs: dict[str, Any] = field(default_factory=dict, repr=False)

    def canonical(self) -> str:
        items = sorted((k, v) for k, v in self.pairs.items() if k not in RUNTIME_KEYS)
        return "\n".join(f"{k}={json.dumps(v, sort_keys=True, separators=(',', ':'))}" for k, v in items)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def grid(self, name: str, default=None) -> list[float]:
        g = self.grids.get(name, default)
        if g is None:
            raise ConfigError(f"experiment {self.experiment!r} needs grids.{name}")
        return list(g)

    def param(self, name: str, default=None):
        return self.params.get(name, default)

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"experiment {self.experiment!r} needs '{name}'")


def _int(pairs, key, default=None):
    v = pairs.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or v != int(v):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return int(v)


def parse_config(text: str) -> ExperimentConfig:
    pairs = parse_pairs(text)
    unknown = [k for k in pairs if k not in TOP_LEVEL and k.split(".", 1)[0] not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    if "experiment" not in pairs:
        raise ConfigError("missing 'experiment'")
    seed = _int(pairs, "seed", 0)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    sigma2 = pairs.get("sigma2", 1.0)
    if not isinstance(sigma2, (int, float)) or not math.isfinite(sigma2) or sigma2 < 0:
        raise ConfigError("sigma2 must be a finite nonnegative number")
    grids = _nest(pairs, "grids")
    for name, g in grids.items():
        if not isinstance(g, list) or not all(isinstance(x, (int, float)) for x in g):
            raise ConfigError(f"grids.{name} must be a list of numbers")
    fmt = pairs.get("output.format", "json-lines")
    if fmt not in OUTPUT_FORMATS:
        raise ConfigError(f"output.format must be one of {OUTPUT_FORMATS}")
    threads = pairs.get("threads")
    if threads is not None and threads != "auto" and (not isinstance(threads, int) or threads < 1):
        raise ConfigError("threads must be a positive integer or 'auto'")
    replicates = _int(pairs, "replicates", 10_000)
    if replicates < 1:
        raise ConfigError("replicates must be positive")
    return ExperimentConfig(
        experiment=str(pairs["experiment"]),
        model=_nest(pairs, "model"),
        noise=_nest(pairs, "noise"),
        d=_int(pairs, "d"),
        n=_int(pairs, "n"),
        sigma2=float(sigma2),
        replicates=replicates,
        seed=seed,
        grids=grids,
        params=_nest(pairs, "params"),
        output_path=pairs.get("output.path"),
        output_format=fmt,
        threads=threads,
        pairs=pairs,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def build_model(spec: dict[str, Any], d: int | None) -> CovariateModel:
    """Covariate model from a ``model.*`` section."""
    family = spec.get("family")
    try:
        if family == "gaussian":
            cov = spec.get("cov")
            if cov is None and d is None:
                raise ConfigError("gaussian model needs model.cov or d")
            return CovariateModel.gaussian(cov=cov, d=d)
        if family == "iid_coords":
            if d is None:
                raise ConfigError("iid_coords model needs d")
            law = CoordLaw(
                spec.get("law", "gaussian"),
                dof=spec.get("dof"),
                edges=tuple(spec["edges"]) if "edges" in spec else None,
                weights=tuple(spec["weights"]) if "weights" in spec else None,
            )
            return CovariateModel.iid_coords(law, d)
        if family == "axis_mixture":
            if "atoms" not in spec:
                raise ConfigError("axis_mixture needs model.atoms")
            return CovariateModel.axis_mixture(spec["atoms"], spec.get("weights"))
        if family == "linear_image":
            base = spec.get("base")
            if not isinstance(base, dict) or "A" not in spec:
                raise ConfigError("linear_image needs model.base.* and model.A")
            return CovariateModel.linear_image(build_model(base, d), np.asarray(spec["A"], dtype=float))
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid model specification: {exc}") from exc
    raise ConfigError(f"unknown model.family {family!r}")


def build_noise(spec: dict[str, Any], sigma2: float) -> NoiseModel:
    """Noise model from a ``noise.*`` section; functions are looked up by name."""
    kind = spec.get("kind", "gaussian")
    level = float(spec.get("sigma2", sigma2))
    try:
        if kind == "gaussian":
            return NoiseModel.gaussian(level)
        sd = NOISE_SDS[spec["sd"]](level) if "sd" in spec else None
        if kind == "well_specified":
            if sd is None:
                raise ConfigError("well_specified noise needs noise.sd")
            return NoiseModel.well_specified(sd, level)
        if kind == "misspecified":
            if "m" not in spec:
                raise ConfigError("misspecified noise needs noise.m")
            return NoiseModel.misspecified(NOISE_MEANS[spec["m"]](level), sd, level)
    except KeyError as exc:
        raise ConfigError(f"unknown noise function {exc.args[0]!r}") from exc
    raise ConfigError(f"unknown noise.kind {kind!r}")
