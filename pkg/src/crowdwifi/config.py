"""Run configuration: one JSON file plus dot-path overrides."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .distributions import SensitivityDistribution
from .model import MarketParams
from .stage1 import SolverConfig

SWEEP_AXES = ("Q", "alpha", "c", "beta", "beta_frac", "V2")
TOP_LEVEL = {"params", "dist", "solver", "sweep", "prices", "map", "output", "seed", "n_agents"}


class ConfigError(ValueError):
    """Bad configuration; the message names the offending field."""


DEFAULTS: dict[str, Any] = {
    "params": MarketParams().to_dict(),
    "dist": {"kind": "uniform", "params": {}},
    "solver": {},
    "sweep": {"Q": [30, 60, 90, 120, 150, 180, 210, 240]},
    "prices": {},
    "map": {"p1": [0.0, 2000.0, 41], "p2": [0.0, 500.0, 41]},
    "output": {"format": "csv", "path": None},
    "seed": 0,
    "n_agents": 100_000,
}


@dataclass(frozen=True)
class RunConfig:
    params: MarketParams
    dist: SensitivityDistribution
    solver: SolverConfig
    sweep: dict[str, list[float]]
    prices: dict[str, float] = field(default_factory=dict)
    price_map: dict[str, list[float]] = field(default_factory=dict)
    output_format: str = "csv"
    output_path: str | None = None
    seed: int = 0
    n_agents: int = 100_000

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "dist": self.dist.to_dict(),
            "solver": self.solver.to_dict(),
            "sweep": {k: list(v) for k, v in self.sweep.items()},
            "prices": dict(self.prices),
            "map": {k: list(v) for k, v in self.price_map.items()},
            "output": {"format": self.output_format, "path": self.output_path},
            "seed": self.seed,
            "n_agents": self.n_agents,
        }


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(data: dict, assignment: str) -> None:
    """Apply ``a.b.c=value``; the value is read as JSON when it parses as JSON."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, raw = assignment.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"override {assignment!r} has an empty key")
    node = data
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        if not isinstance(child, dict):
            raise ConfigError(f"{key}: {part} is not a section")
        node = child
    node[parts[-1]] = _parse_value(raw)


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "sweep":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def read_json(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def _number_list(name: str, values) -> list[float]:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"sweep.{name}: expected a non-empty list of numbers")
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(f"sweep.{name}: expected numbers, got {values!r}") from None


def build(data: dict) -> RunConfig:
    unknown = set(data) - TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    merged = _merge(DEFAULTS, data)
    try:
        params = MarketParams.from_dict(merged["params"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"params: {exc}") from None
    try:
        dist = SensitivityDistribution.from_dict(merged["dist"])
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"dist: {exc}") from None
    try:
        solver = SolverConfig.from_dict(merged["solver"])
        solver.resolved(params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from None
    sweep_raw = merged["sweep"]
    if not isinstance(sweep_raw, dict):
        raise ConfigError("sweep: expected an object of value lists")
    bad = set(sweep_raw) - set(SWEEP_AXES)
    if bad:
        raise ConfigError(f"sweep: unknown axes {sorted(bad)}; allowed {list(SWEEP_AXES)}")
    if "beta" in sweep_raw and "beta_frac" in sweep_raw:
        raise ConfigError("sweep: give beta or beta_frac, not both")
    sweep = {name: _number_list(name, sweep_raw[name]) for name in SWEEP_AXES if name in sweep_raw}
    out = merged["output"]
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output.format: expected csv or json, got {fmt!r}")
    price_map = merged["map"]
    for axis in ("p1", "p2"):
        spec = price_map.get(axis)
        if not (isinstance(spec, list) and len(spec) == 3 and int(spec[2]) >= 1):
            raise ConfigError(f"map.{axis}: expected [start, stop, count]")
    try:
        prices = {k: float(v) for k, v in merged["prices"].items()}
        seed, n_agents = int(merged["seed"]), int(merged["n_agents"])
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"prices/seed/n_agents: {exc}") from None
    return RunConfig(params, dist, solver, sweep, prices,
                     {k: [float(v) for v in price_map[k]] for k in ("p1", "p2")},
                     fmt, out.get("path"), seed, n_agents)


def load(path: str | Path | None = None, overrides=()) -> RunConfig:
    data = read_json(path) if path else {}
    for assignment in overrides:
        apply_override(data, assignment)
    return build(data)
