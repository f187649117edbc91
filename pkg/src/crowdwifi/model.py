"""Market parameters, user payoffs, operator profits and social welfare."""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Any, Mapping

import numpy as np

from .distributions import SensitivityDistribution


class UnsupportedConfiguration(ValueError):
    """A solver was asked for a case its closed forms do not cover."""


class ChoiceLabel(enum.IntEnum):
    NEITHER = 0
    FIVEG_ONLY = 1
    FIVEG_PLUS_WIFI = 2


@dataclass(frozen=True)
class MarketParams:
    """Exogenous constants of the pricing game.

    ``N`` users, 5G benefit ``V1``, in-coverage WiFi benefit ``V2``,
    reservation payoff ``u_bar``, 5G capacity ``Q``, coverage added per WiFi
    subscriber ``alpha``, WiFi cost per subscriber ``c`` and WiFi congestion
    factor ``beta`` (0 means congestion-free WiFi).
    """

    N: float = 1e5
    V1: float = 3000.0
    V2: float = 3000.0
    u_bar: float = 1000.0
    Q: float = 30.0
    alpha: float = 0.5
    c: float = 50.0
    beta: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, float(value))
        if self.N <= 0 or self.Q <= 0:
            raise ValueError("N and Q must be positive")
        if self.V2 < 0 or self.u_bar < 0 or self.c < 0 or self.beta < 0:
            raise ValueError("V2, u_bar, c and beta must be non-negative")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")
        if self.V1 < self.V2:
            raise ValueError("V1 must be at least V2")
        if self.V1 <= self.u_bar:
            raise ValueError("V1 must exceed u_bar, otherwise nobody ever subscribes")

    @property
    def k(self) -> float:
        """Congestion scale N/Q."""
        return self.N / self.Q

    @property
    def margin(self) -> float:
        """V1 - u_bar, the most a user would pay for 5G."""
        return self.V1 - self.u_bar

    @property
    def wifi_inert(self) -> bool:
        """True when nobody can ever prefer the WiFi add-on."""
        return self.alpha == 0.0 or self.beta >= self.k

    @property
    def closed_form_case(self) -> bool:
        """Uniform-analysis assumptions: equal benefits and no WiFi congestion."""
        return self.V1 == self.V2 and self.beta == 0.0

    def replace(self, **changes) -> "MarketParams":
        data = asdict(self)
        data.update(changes)
        return MarketParams(**data)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MarketParams":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown market parameters: {sorted(unknown)}")
        return cls(**{key: float(val) for key, val in data.items()})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SubscriptionState:
    x1: float
    x2: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.x1 <= 1.0 and 0.0 <= self.x2 <= 1.0):
            raise ValueError("fractions must lie in [0, 1]")
        if self.x1 + self.x2 > 1.0 + 1e-12:
            raise ValueError("x1 + x2 cannot exceed 1")

    @property
    def total(self) -> float:
        return self.x1 + self.x2


def effective_load(params: MarketParams, s: SubscriptionState) -> float:
    """Fraction of users loading the 5G cell at any moment."""
    return s.x1 + s.x2 * (1.0 - params.alpha * s.x2)


def payoff_benchmark(params: MarketParams, theta, x1_bar: float, p1_bar: float):
    return params.V1 - params.k * x1_bar * np.asarray(theta) - p1_bar


def payoff_5g_only(params: MarketParams, theta, s: SubscriptionState, p1: float):
    return params.V1 - params.k * effective_load(params, s) * np.asarray(theta) - p1


def payoff_5g_wifi(params: MarketParams, theta, s: SubscriptionState, p1: float, p2: float):
    """Payoff of a 5G+WiFi subscriber.

    Inside coverage (probability alpha*x2) the user gets V2 and pays the WiFi
    congestion beta*theta; outside it gets V1 and the 5G congestion.
    """
    cover = params.alpha * s.x2
    theta = np.asarray(theta)
    return ((1.0 - cover) * params.V1 + cover * params.V2 - p1 - p2
            - (1.0 - cover) * params.k * effective_load(params, s) * theta
            - cover * params.beta * theta)


def profit_5g(params: MarketParams, s: SubscriptionState, p1: float) -> float:
    return params.N * (s.x1 + s.x2) * p1


def profit_wifi(params: MarketParams, s: SubscriptionState, p2: float) -> float:
    if p2 < params.c:
        raise ValueError(f"WiFi price {p2} is below the deployment cost {params.c}")
    return params.N * s.x2 * (p2 - params.c)


def _trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def social_welfare(
    params: MarketParams,
    dist: SensitivityDistribution,
    s: SubscriptionState,
    p1: float,
    p2: float = 0.0,
    regime: str = "post_wifi",
    nodes: int = 10_000,
) -> float:
    """Operator profits plus the population integral of realised user payoffs.

    The payoff envelope is piecewise affine in theta; its kinks (the two
    cutoffs) are added to the trapezoid grid, so the integral is exact for a
    uniform density.
    """
    if regime not in ("pre_wifi", "post_wifi"):
        raise ValueError(f"unknown regime {regime!r}")
    kinks = [float(dist.inverse_cdf(min(1.0, s.x1))),
             float(dist.inverse_cdf(min(1.0, s.x1 + s.x2)))]
    theta = np.union1d(np.linspace(0.0, 1.0, nodes), kinks)
    if regime == "pre_wifi":
        best = np.maximum(payoff_benchmark(params, theta, s.x1, p1), params.u_bar)
        profits = params.N * s.x1 * p1
    else:
        u1 = payoff_5g_only(params, theta, s, p1)
        u2 = payoff_5g_wifi(params, theta, s, p1, p2)
        best = np.maximum(np.maximum(u1, u2), params.u_bar)
        profits = profit_5g(params, s, p1) + params.N * s.x2 * (p2 - params.c)
    density = np.asarray(dist.pdf(theta), dtype=float)
    return profits + params.N * _trapezoid(best * density, theta)
