"""Config file parsing and the fully resolved run configuration.

Config files use an INI-style grammar with five sections::

    [problem]       kind, m, K, d, seed, image_side, n_hidden, epochs,
                    learning_rate, cd_batch_size
    [tessellation]  cells, samples, data_file
    [method]        name, alpha, shared_temperature, sigma_g, sigma_0,
                    n_emitters, cma_covariance, cma_max_full_dim, n_flips,
                    crossover_fraction
    [budget]        batch_size, iterations, init_count, init_file, seed
    [output]        out_dir, log_every

Lines are ``key = value``; ``#`` or ``;`` start a comment; blank lines are
ignored; every key is optional and falls back to a documented default.
Unknown sections or keys are rejected with the offending line number.
The resolved configuration is echoed to config-echo.json and reparses to
an identical object.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

from .benchmarks import (
    bars_and_stripes,
    make_rbm_problem,
    make_separable_problem,
    rbm_train_cd1,
)
from .errors import ConfigError
from .problems import Problem
from .scheduler import RunConfig


@dataclass
class ProblemConfig:
    """Which benchmark problem to build and its construction parameters."""

    kind: str = "separable"  # "separable" | "rbm"
    seed: int = 0
    # separable
    m: int = 10
    K: int = 4
    d: int = 2
    # rbm (genotype length is image_side^2; K is fixed at 2)
    image_side: int = 4
    n_hidden: int = 16
    epochs: int = 200
    learning_rate: float = 0.05
    cd_batch_size: int = 16

    def validate(self) -> None:
        if self.kind not in ("separable", "rbm"):
            raise ConfigError(f"problem kind must be 'separable' or 'rbm', got {self.kind!r}")
        if self.kind == "separable" and (self.m < 1 or self.K < 2 or self.d < 1):
            raise ConfigError("separable problem needs m >= 1, K >= 2, d >= 1")
        if self.kind == "rbm":
            if self.image_side < 2:
                raise ConfigError("rbm problem needs image_side >= 2")
            if not 1 <= self.d <= self.n_hidden:
                raise ConfigError("rbm problem needs 1 <= d <= n_hidden")
            if self.epochs < 0 or self.learning_rate <= 0 or self.cd_batch_size < 1:
                raise ConfigError("rbm training parameters out of range")


@dataclass
class OutputConfig:
    out_dir: str | None = None
    log_every: int = 0  # 0 disables the textual iteration log


@dataclass
class Provenance:
    config_path: str = ""
    tool_version: str = ""
    timestamp: str = ""
    root_seed: int = 0


@dataclass
class ResolvedConfig:
    """Fully defaulted configuration plus provenance; round-trip stable."""

    problem: ProblemConfig = field(default_factory=ProblemConfig)
    run: RunConfig = field(default_factory=RunConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    provenance: Provenance = field(default_factory=Provenance)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ResolvedConfig":
        return cls(
            problem=ProblemConfig(**data["problem"]),
            run=RunConfig(**data["run"]),
            output=OutputConfig(**data["output"]),
            provenance=Provenance(**data["provenance"]),
        )

    def to_json_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json_file(cls, path) -> "ResolvedConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _read_ini(path) -> dict[str, dict[str, tuple[str, int]]]:
    """Parse ``[section] / key = value`` lines, tracking line numbers."""
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: str | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith(";"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip().lower()
                sections.setdefault(current, {})
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            if current is None:
                raise ConfigError(f"{path}:{lineno}: key outside of any [section]")
            key, _, value = line.partition("=")
            key = key.strip().lower()
            value = value.split("#")[0].split(";")[0].strip()
            if key in sections[current]:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r} in [{current}]")
            sections[current][key] = (value, lineno)
    return sections


def _parse_bool(value: str) -> bool:
    low = value.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


_CASTS = {int: int, float: float, str: str, bool: _parse_bool}

# section -> key -> (target dataclass field, value type)
_SCHEMA = {
    "problem": {
        "kind": ("kind", str),
        "seed": ("seed", int),
        "m": ("m", int),
        "k": ("K", int),
        "d": ("d", int),
        "image_side": ("image_side", int),
        "n_hidden": ("n_hidden", int),
        "epochs": ("epochs", int),
        "learning_rate": ("learning_rate", float),
        "cd_batch_size": ("cd_batch_size", int),
    },
    "tessellation": {
        "cells": ("cells", int),
        "samples": ("tessellation_samples", int),
        "data_file": ("tessellation_data_file", str),
    },
    "method": {
        "name": ("method", str),
        "alpha": ("alpha", float),
        "shared_temperature": ("shared_temperature", bool),
        "sigma_g": ("sigma_g", float),
        "sigma_0": ("sigma_0", float),
        "n_emitters": ("n_emitters", int),
        "cma_covariance": ("cma_covariance", str),
        "cma_max_full_dim": ("cma_max_full_dim", int),
        "n_flips": ("n_flips", int),
        "crossover_fraction": ("crossover_fraction", float),
    },
    "budget": {
        "batch_size": ("batch_size", int),
        "iterations": ("iterations", int),
        "init_count": ("init_count", int),
        "init_file": ("init_file", str),
        "seed": ("seed", int),
    },
    "output": {
        "out_dir": ("out_dir", str),
        "log_every": ("log_every", int),
    },
}

_RUN_SECTIONS = ("tessellation", "method", "budget")


def parse_config(path, tool_version: str = "") -> ResolvedConfig:
    """Parse and validate a config file, filling documented defaults.

    Unknown sections/keys, type mismatches, and range violations raise
    ConfigError naming the key and line.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    sections = _read_ini(path)

    unknown_sections = set(sections) - set(_SCHEMA)
    if unknown_sections:
        raise ConfigError(f"{path}: unknown section(s) {sorted(unknown_sections)}")

    problem_kwargs: dict = {}
    run_kwargs: dict = {}
    output_kwargs: dict = {}
    targets = {"problem": problem_kwargs, "output": output_kwargs}
    for section, keys in sections.items():
        schema = _SCHEMA[section]
        sink = targets.get(section, run_kwargs)
        for key, (value, lineno) in keys.items():
            if key not in schema:
                raise ConfigError(
                    f"{path}:{lineno}: unknown key {key!r} in section [{section}]"
                )
            field_name, value_type = schema[key]
            if value == "":
                continue  # empty value keeps the default
            try:
                sink[field_name] = _CASTS[value_type](value)
            except ValueError as exc:
                raise ConfigError(
                    f"{path}:{lineno}: key {key!r} expects {value_type.__name__}: {exc}"
                ) from exc

    problem_cfg = ProblemConfig(**problem_kwargs)
    run_cfg = RunConfig(**run_kwargs)
    output_cfg = OutputConfig(**output_kwargs)
    problem_cfg.validate()
    run_cfg.validate()
    if output_cfg.log_every < 0:
        raise ConfigError(f"log_every must be >= 0, got {output_cfg.log_every}")

    provenance = Provenance(
        config_path=str(path),
        tool_version=tool_version,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        root_seed=run_cfg.seed,
    )
    return ResolvedConfig(problem=problem_cfg, run=run_cfg, output=output_cfg, provenance=provenance)


def build_problem(cfg: ProblemConfig) -> Problem:
    """Construct the benchmark problem described by a problem config."""
    cfg.validate()
    if cfg.kind == "separable":
        return make_separable_problem(cfg.m, cfg.K, cfg.d, seed=cfg.seed)
    dataset = bars_and_stripes(cfg.image_side)
    params = rbm_train_cd1(
        visible_size=cfg.image_side**2,
        hidden_size=cfg.n_hidden,
        dataset=dataset,
        epochs=cfg.epochs,
        learning_rate=cfg.learning_rate,
        seed=cfg.seed,
        batch_size=cfg.cd_batch_size,
    )
    return make_rbm_problem(params, cfg.d, dataset)


_GRID_TYPES = {
    "method": str,
    "batch_size": int,
    "iterations": int,
    "alpha": float,
    "shared_temperature": bool,
    "sigma_g": float,
    "sigma_0": float,
    "n_emitters": int,
    "cma_covariance": str,
    "cma_max_full_dim": int,
    "n_flips": int,
    "crossover_fraction": float,
    "init_count": int,
    "init_file": str,
    "seed": int,
    "cells": int,
    "tessellation_samples": int,
    "tessellation_data_file": str,
}
assert set(_GRID_TYPES) == {f.name for f in fields(RunConfig)}


def grid_value_type(key: str):
    """Value type of a RunConfig field, for parsing sweep grid strings."""
    try:
        return _GRID_TYPES[key]
    except KeyError:
        raise ConfigError(f"unknown grid key {key!r}") from None
