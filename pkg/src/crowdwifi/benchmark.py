"""Pre-WiFi market: user cutoff for a given 5G price and the optimal price."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .distributions import SensitivityDistribution
from .model import MarketParams

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class Branch(str, enum.Enum):
    INTERIOR = "Interior"
    FULL_MARKET = "FullMarket"
    EMPTY = "Empty"


@dataclass(frozen=True)
class BenchmarkEquilibrium:
    p1_bar: float
    x1_bar: float
    theta_cut: float
    profit: float
    branch: Branch
    method: str = "closed_form"


def bisect(fn: Callable[[float], float], lo: float, hi: float, width: float = 1e-12) -> float:
    """Root of ``fn`` on [lo, hi] given fn(lo) < 0 <= fn(hi)."""
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fn(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_max(fn: Callable[[float], float], lo: float, hi: float, tol: float = 1e-8):
    """Golden-section search for a maximiser of ``fn`` on [lo, hi]."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def subscription_given_price(params: MarketParams, dist: SensitivityDistribution, p1_bar: float):
    """Pre-WiFi subscription: returns ``(x1_bar, theta_cut, branch)``."""
    if p1_bar < 0:
        raise ValueError("price must be non-negative")
    slack = params.margin - p1_bar
    if slack >= params.k:
        return 1.0, 1.0, Branch.FULL_MARKET
    if slack <= 0.0:
        return 0.0, 0.0, Branch.EMPTY
    # theta -> F(theta) * theta is strictly increasing on [0, 1]
    theta = bisect(lambda t: params.k * dist.cdf(t) * t - slack, 0.0, 1.0)
    return float(dist.cdf(theta)), theta, Branch.INTERIOR


def _subscription_vector(params: MarketParams, dist: SensitivityDistribution,
                         prices: np.ndarray) -> np.ndarray:
    """Pre-WiFi subscription for many prices at once (elementwise bisection)."""
    slack = params.margin - prices
    lo = np.zeros_like(prices)
    hi = np.ones_like(prices)
    while np.max(hi - lo) > 1e-12:
        mid = 0.5 * (lo + hi)
        below = params.k * dist.cdf(mid) * mid < slack
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    x1 = dist.cdf(0.5 * (lo + hi))
    return np.where(slack >= params.k, 1.0, np.where(slack <= 0.0, 0.0, x1))


def profit_given_price(params: MarketParams, dist: SensitivityDistribution, p1_bar: float) -> float:
    x1, _, _ = subscription_given_price(params, dist, p1_bar)
    return params.N * x1 * p1_bar


def _uniform_closed_form(params: MarketParams) -> BenchmarkEquilibrium:
    m, k, N = params.margin, params.k, params.N
    if params.Q < 3.0 * N / m:
        price = 2.0 * m / 3.0
        x1 = math.sqrt(m / (3.0 * k))
        return BenchmarkEquilibrium(price, x1, x1, price * math.sqrt(m * params.Q * N / 3.0),
                                    Branch.INTERIOR)
    price = m - k
    return BenchmarkEquilibrium(price, 1.0, 1.0, N * price, Branch.FULL_MARKET)


def _decreasing_pdf_closed_form(params: MarketParams, dist: SensitivityDistribution):
    m, k, N = params.margin, params.k, params.N
    f1 = float(dist.pdf(1.0))
    if f1 <= 0.0:
        return None
    if params.Q >= (2.0 + 1.0 / f1) * N / m:
        price = m - k
        return BenchmarkEquilibrium(price, 1.0, 1.0, N * price, Branch.FULL_MARKET)

    def foc(t):
        F = dist.cdf(t)
        return -(dist.pdf(t) * (m - 2.0 * k * F * t) - k * F * F)

    theta = bisect(foc, 0.0, 1.0)
    F = float(dist.cdf(theta))
    price = m - k * theta * F
    return BenchmarkEquilibrium(price, F, theta, N * F * price, Branch.INTERIOR)


def numeric_optimal_price(params: MarketParams, dist: SensitivityDistribution,
                          step: float | None = None) -> BenchmarkEquilibrium:
    """Grid search over [0, V1 - u_bar] followed by golden-section refinement."""
    m = params.margin
    n = 2000 if step is None else max(1, int(round(m / step)))
    grid = m * np.arange(n + 1) / n
    profits = params.N * _subscription_vector(params, dist, grid) * grid
    best = int(np.argmax(profits))
    lo, hi = float(grid[max(best - 1, 0)]), float(grid[min(best + 1, n)])
    p_ref, v_ref = golden_max(lambda p: profit_given_price(params, dist, p), lo, hi)
    price = p_ref if v_ref > profits[best] else float(grid[best])
    x1, theta, branch = subscription_given_price(params, dist, price)
    return BenchmarkEquilibrium(price, x1, theta, params.N * x1 * price, branch, "numeric")


@lru_cache(maxsize=256)
def optimal_price(params: MarketParams, dist: SensitivityDistribution,
                  method: str = "auto") -> BenchmarkEquilibrium:
    """Profit-maximising 5G price before WiFi arrives.

    ``method='auto'`` uses the uniform formulas, then the decreasing-density
    first-order condition, and falls back to the numeric search when neither
    applies (or when f(1) = 0 makes the threshold degenerate).
    """
    if method not in ("auto", "closed_form", "numeric"):
        raise ValueError(f"unknown method {method!r}")
    if method == "numeric":
        return numeric_optimal_price(params, dist)
    if dist.kind == "uniform":
        return _uniform_closed_form(params)
    if dist.has_nonincreasing_pdf:
        eq = _decreasing_pdf_closed_form(params, dist)
        if eq is not None:
            return eq
    if method == "closed_form":
        raise ValueError("no closed form for this distribution")
    return numeric_optimal_price(params, dist)
