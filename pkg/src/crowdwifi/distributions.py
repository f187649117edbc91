"""Congestion-sensitivity distributions on the unit interval.

Every distribution is renormalised to carry all of its mass on [0, 1], so the
CDF hits 0 and 1 exactly at the endpoints and stays continuous.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy import special

KIND_CODES = {
    "uniform": 0,
    "truncated_normal": 1,
    "truncated_exponential": 2,
    "truncated_pareto": 3,
}

_DEFAULT_PARAMS = {
    "uniform": {},
    "truncated_normal": {"mean": 0.5, "stdev": 1.0},
    "truncated_exponential": {"rate": 1.0},
    "truncated_pareto": {"shape": 2.0, "scale": 1.0},
}


def _check_unit(x, name: str):
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {x!r}")
    return arr


@dataclass(frozen=True)
class SensitivityDistribution:
    """Distribution of the congestion sensitivity theta on [0, 1].

    ``kind`` is one of ``uniform``, ``truncated_normal`` (mean, stdev),
    ``truncated_exponential`` (rate) or ``truncated_pareto`` (shape, scale).
    The Pareto variant is the Lomax (Pareto II) law, which starts at 0 and has
    a decreasing density.
    """

    kind: str = "uniform"
    params: tuple[tuple[str, float], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        given = dict(self.params)
        expected = _DEFAULT_PARAMS[self.kind]
        unknown = set(given) - set(expected)
        if unknown:
            raise ValueError(f"unexpected parameters for {self.kind}: {sorted(unknown)}")
        merged = {name: float(given.get(name, default)) for name, default in expected.items()}
        for name, value in merged.items():
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
        if self.kind == "truncated_normal" and merged["stdev"] <= 0:
            raise ValueError("stdev must be positive")
        if self.kind == "truncated_exponential" and merged["rate"] <= 0:
            raise ValueError("rate must be positive")
        if self.kind == "truncated_pareto" and (merged["shape"] <= 0 or merged["scale"] <= 0):
            raise ValueError("shape and scale must be positive")
        object.__setattr__(self, "params", tuple(sorted(merged.items())))
        object.__setattr__(self, "_consts", self._constants())
        if self.kind == "truncated_normal" and self._consts[2] <= 0:
            raise ValueError("truncated normal has no mass on [0, 1]")

    # -- constructors ------------------------------------------------------

    @classmethod
    def uniform(cls) -> "SensitivityDistribution":
        return cls("uniform")

    @classmethod
    def truncated_normal(cls, mean: float = 0.5, stdev: float = 1.0) -> "SensitivityDistribution":
        return cls("truncated_normal", (("mean", mean), ("stdev", stdev)))

    @classmethod
    def truncated_exponential(cls, rate: float = 1.0) -> "SensitivityDistribution":
        return cls("truncated_exponential", (("rate", rate),))

    @classmethod
    def truncated_pareto(cls, shape: float = 2.0, scale: float = 1.0) -> "SensitivityDistribution":
        return cls("truncated_pareto", (("shape", shape), ("scale", scale)))

    @classmethod
    def from_dict(cls, spec: Mapping[str, Any]) -> "SensitivityDistribution":
        kind = spec.get("kind", "uniform")
        params = spec.get("params", {}) or {}
        return cls(kind, tuple(params.items()))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @property
    def p(self) -> dict:
        return dict(self.params)

    # -- kernel interface --------------------------------------------------

    @property
    def kind_code(self) -> int:
        return KIND_CODES[self.kind]

    def kernel_params(self) -> tuple[float, float, float]:
        """Three numbers that fully determine the law for the compiled core."""
        p = self.p
        if self.kind == "truncated_normal":
            return (p["mean"], p["stdev"], 0.0)
        if self.kind == "truncated_exponential":
            return (p["rate"], 0.0, 0.0)
        if self.kind == "truncated_pareto":
            return (p["shape"], p["scale"], 0.0)
        return (0.0, 0.0, 0.0)

    def _constants(self):
        p = self.p
        if self.kind == "truncated_normal":
            lo = float(special.ndtr((0.0 - p["mean"]) / p["stdev"]))
            hi = float(special.ndtr((1.0 - p["mean"]) / p["stdev"]))
            return (lo, hi, hi - lo)
        if self.kind == "truncated_exponential":
            return (math.expm1(-p["rate"]),)
        if self.kind == "truncated_pareto":
            return (-math.expm1(-p["shape"] * math.log1p(1.0 / p["scale"])),)
        return ()

    # -- distribution functions -------------------------------------------

    @property
    def has_nonincreasing_pdf(self) -> bool:
        if self.kind == "truncated_normal":
            return self.p["mean"] <= 0.0
        return True

    def cdf(self, theta):
        t = _check_unit(theta, "theta")
        p = self.p
        if self.kind == "uniform":
            out = t.copy()
        elif self.kind == "truncated_normal":
            lo, _, mass = self._consts
            out = (special.ndtr((t - p["mean"]) / p["stdev"]) - lo) / mass
        elif self.kind == "truncated_exponential":
            out = np.expm1(-p["rate"] * t) / self._consts[0]
        else:
            out = -np.expm1(-p["shape"] * np.log1p(t / p["scale"])) / self._consts[0]
        out = np.clip(out, 0.0, 1.0)
        out = np.where(t == 0.0, 0.0, np.where(t == 1.0, 1.0, out))
        return float(out) if np.ndim(out) == 0 else out

    def pdf(self, theta):
        t = _check_unit(theta, "theta")
        p = self.p
        if self.kind == "uniform":
            out = np.ones_like(t)
        elif self.kind == "truncated_normal":
            z = (t - p["mean"]) / p["stdev"]
            out = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) / p["stdev"] / self._consts[2]
        elif self.kind == "truncated_exponential":
            out = p["rate"] * np.exp(-p["rate"] * t) / (-self._consts[0])
        else:
            a, s = p["shape"], p["scale"]
            out = (a / s) * np.power(1.0 + t / s, -a - 1.0) / self._consts[0]
        return float(out) if np.ndim(out) == 0 else out

    def inverse_cdf(self, q):
        """Quantile function; exact at 0 and 1."""
        u = _check_unit(q, "q")
        p = self.p
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "uniform":
                out = u.copy()
            elif self.kind == "truncated_normal":
                lo, _, mass = self._consts
                out = p["mean"] + p["stdev"] * special.ndtri(lo + u * mass)
            elif self.kind == "truncated_exponential":
                out = -np.log1p(u * self._consts[0]) / p["rate"]
            else:
                out = p["scale"] * np.expm1(-np.log1p(-u * self._consts[0]) / p["shape"])
        out = np.clip(out, 0.0, 1.0)
        out = np.where(u == 0.0, 0.0, np.where(u == 1.0, 1.0, out))
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, count: int, seed: int) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be at least 1")
        rng = np.random.default_rng(seed)
        return np.asarray(self.inverse_cdf(rng.random(int(count))), dtype=float)


def bisect_inverse(dist: SensitivityDistribution, q: float, width: float = 1e-12) -> float:
    """Quantile by bisection on the CDF; slow but needs nothing but monotonicity."""
    q = float(_check_unit(q, "q"))
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if dist.cdf(mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
