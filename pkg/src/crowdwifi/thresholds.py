"""Closed-form threshold conditions for the uniform, congestion-free WiFi case.

Every function evaluates its expression directly; the only root-finding is
for x2_hat.  Expressions that need sqrt(1 - 3*alpha*s) return NaN when that
argument is negative, and the predicates built on them are then False.
"""
from __future__ import annotations

import math

from .model import MarketParams
from .stage2 import boundary_curve, solve_x2_hat


def load_levels(params: MarketParams) -> tuple[float, float]:
    """(s1, s3): 5G load level at p1 = 0 and at the pre-WiFi optimal price."""
    s1 = math.sqrt(params.margin / params.k)
    return s1, math.sqrt(params.margin / (3.0 * params.k))


def interior_peak(params: MarketParams, s: float) -> float:
    """Local maximum over x2 of the interior WiFi-price curve at load level s."""
    a = params.alpha
    inner = 1.0 - 3.0 * a * s
    if a <= 0.0 or inner < 0.0:
        return math.nan
    y = (1.0 - math.sqrt(inner)) / 3.0  # alpha times the peak location
    return y * params.k * s * (s - (y / a) * (1.0 - y))


def small_capacity_cost_cap(params: MarketParams) -> float:
    """Largest WiFi cost that still attracts add-on users at the pre-WiFi 5G price."""
    return interior_peak(params, load_levels(params)[1])


def price_cut_cost_band(params: MarketParams) -> tuple[float, float]:
    """Open interval of WiFi costs under which a small-capacity 5G operator cuts price."""
    s1, s3 = load_levels(params)
    return interior_peak(params, s3), interior_peak(params, s1)


def large_capacity_cost_cap(params: MarketParams) -> float:
    """Peak of the full-market boundary curve, p2_hat."""
    if params.alpha <= 0.0:
        return math.nan
    return float(boundary_curve(params, solve_x2_hat(params.alpha)))


def medium_capacity_alpha_floor(params: MarketParams) -> float:
    s3 = load_levels(params)[1]
    if s3 >= 1.0:
        return math.nan
    return (2.0 * math.sqrt(1.0 - s3) * (1.0 - 2.0 * s3) / (2.0 - 3.0 * s3)) ** 2


def medium_capacity_range(params: MarketParams) -> tuple[float, float]:
    unit = params.N / params.margin
    return 3.0 * ((math.sqrt(17.0) + 23.0) / 32.0) ** 2 * unit, 3.0 * unit


def _le(value: float, cap: float) -> bool:
    return not math.isnan(cap) and value <= cap


def small_capacity(params: MarketParams) -> bool:
    return params.Q < 3.0 * params.N / params.margin


def wifi_gains_users(params: MarketParams) -> bool:
    """Some users add WiFi at the unchanged pre-WiFi 5G price."""
    return params.alpha > 0 and small_capacity(params) and _le(params.c, small_capacity_cost_cap(params))


def small_capacity_profit_gain(params: MarketParams) -> bool:
    """Conditions under which the 5G profit strictly rises with small capacity."""
    return wifi_gains_users(params)


def large_capacity_price_rise(params: MarketParams) -> bool:
    """Large capacity and cheap WiFi: the 5G price goes up and profit rises strictly."""
    return (params.alpha > 0 and not small_capacity(params)
            and _le(params.c, large_capacity_cost_cap(params)))


def medium_capacity_price_rise(params: MarketParams) -> bool:
    lo, hi = medium_capacity_range(params)
    floor = medium_capacity_alpha_floor(params)
    return (params.alpha > 0 and lo < params.Q < hi and not math.isnan(floor)
            and params.alpha > floor and _le(params.c, large_capacity_cost_cap(params)))


def small_capacity_price_cut(params: MarketParams) -> bool:
    s1, _ = load_levels(params)
    lo, hi = price_cut_cost_band(params)
    return (params.alpha > 0 and params.Q < params.N / params.margin
            and params.alpha < 1.0 - s1 and not math.isnan(lo) and not math.isnan(hi)
            and lo < params.c < hi)
