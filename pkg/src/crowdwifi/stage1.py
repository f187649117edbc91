"""Operator pricing: best responses and simultaneous-move equilibria."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .benchmark import golden_max, optimal_price
from .distributions import SensitivityDistribution
from .model import MarketParams, UnsupportedConfiguration
from .stage2 import (
    DEFAULT_EPS0,
    SubscriptionEquilibrium,
    boundary_curve,
    equilibrium_general,
    from_kernel_row,
    interior_curve,
    solve_x2_hat,
    stage2_kernel,
)


@dataclass(frozen=True)
class SolverConfig:
    """Search resolutions.  ``None`` price steps resolve to V/2000."""

    eps0: float = DEFAULT_EPS0
    eps1: float | None = None
    eps2: float | None = None
    max_br_iterations: int = 200
    fixed_point_tol: float | None = None

    def resolved(self, params: MarketParams) -> "SolverConfig":
        eps1 = self.eps1 if self.eps1 is not None else params.V1 / 2000.0
        eps2 = self.eps2 if self.eps2 is not None else max(params.V2, 1.0) / 2000.0
        tol = self.fixed_point_tol if self.fixed_point_tol is not None else 2.0 * max(eps1, eps2)
        cfg = replace(self, eps1=eps1, eps2=eps2, fixed_point_tol=tol)
        if min(cfg.eps0, eps1, eps2, tol) <= 0 or cfg.max_br_iterations < 1:
            raise ValueError("solver settings must be positive")
        return cfg

    @classmethod
    def from_dict(cls, data) -> "SolverConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solver settings: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass(frozen=True)
class PriceCandidate:
    p1: float
    p2: float
    profit_5g: float
    profit_wifi: float
    converged: bool
    gap: float


@dataclass(frozen=True)
class PricingEquilibrium:
    p1_star: float
    p2_star: float
    stage2: SubscriptionEquilibrium
    profit_5g: float
    profit_wifi: float
    converged: bool
    iterations: int
    candidates: tuple[PriceCandidate, ...] = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {
            "p1_star": self.p1_star,
            "p2_star": self.p2_star,
            "profit_5g": self.profit_5g,
            "profit_wifi": self.profit_wifi,
            "converged": self.converged,
            "iterations": self.iterations,
            "stage2": self.stage2.to_dict(),
            "candidates": [c.__dict__.copy() for c in self.candidates],
        }


def _price_grid(lo: float, hi: float, step: float) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    n = int(math.floor((hi - lo) / step + 1e-9))
    grid = lo + step * np.arange(n + 1)
    if hi - grid[-1] > 1e-9 * max(1.0, hi):
        grid = np.append(grid, hi)
    return grid


def _refine(objective, grid: np.ndarray, values: np.ndarray, best: int):
    """Golden-section search in the cells around the grid winner."""
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    if hi <= lo:
        return float(grid[best]), float(values[best])
    x, v = golden_max(objective, float(lo), float(hi))
    if v > values[best]:
        return float(x), float(v)
    return float(grid[best]), float(values[best])


def best_response_5g(params: MarketParams, dist: SensitivityDistribution, p2: float,
                     cfg: SolverConfig | None = None) -> tuple[float, float]:
    """Profit-maximising 5G price against WiFi price ``p2``; returns (price, profit)."""
    cfg = (cfg or SolverConfig()).resolved(params)
    if params.wifi_inert:
        bench = optimal_price(params, dist)
        return bench.p1_bar, bench.profit
    kernel = stage2_kernel(params, dist, cfg.eps0)
    grid = _price_grid(0.0, params.V1, cfg.eps1)
    rows = kernel.solve_p1_batch(np.ascontiguousarray(grid), float(p2))
    profits = params.N * (rows[:, 0] + rows[:, 1]) * grid
    best = int(np.argmax(profits))

    def objective(p1):
        x1, x2, _, _ = kernel.solve(p1, float(p2))
        return params.N * (x1 + x2) * p1

    return _refine(objective, grid, profits, best)


def best_response_wifi(params: MarketParams, dist: SensitivityDistribution, p1: float,
                       cfg: SolverConfig | None = None) -> tuple[float, float]:
    """Profit-maximising WiFi price in [c, V2] against 5G price ``p1``."""
    cfg = (cfg or SolverConfig()).resolved(params)
    if params.wifi_inert or params.V2 <= params.c:
        return params.c, 0.0
    kernel = stage2_kernel(params, dist, cfg.eps0)
    grid = _price_grid(params.c, params.V2, cfg.eps2)
    rows = kernel.solve_p2_batch(float(p1), np.ascontiguousarray(grid))
    profits = params.N * rows[:, 1] * (grid - params.c)
    best = int(np.argmax(profits))
    if profits[best] <= 0.0:
        return params.c, 0.0

    def objective(p2):
        return params.N * kernel.solve(float(p1), p2)[1] * (p2 - params.c)

    return _refine(objective, grid, profits, best)


def default_starts(params: MarketParams) -> list[tuple[float, float]]:
    lo2, hi2 = params.c, max(params.V2, params.c)
    return [(0.0, lo2), (0.0, hi2), (params.V1, lo2), (params.V1, hi2),
            (params.V1 / 2.0, (lo2 + hi2) / 2.0)]


def nash_equilibrium(params: MarketParams, dist: SensitivityDistribution,
                     cfg: SolverConfig | None = None,
                     starts: Sequence[tuple[float, float]] | None = None) -> PricingEquilibrium:
    """Alternating best responses from several starting price pairs.

    From a start (a, b) both operators first answer the start simultaneously,
    (BR1(b), BR2(a)); afterwards the 5G operator moves first in every round.
    A round ends the search when the WiFi answer moves by at most eps2; the
    5G price is then an exact best response by construction.  Among distinct
    fixed points the one with the largest joint profit is reported first.
    """
    cfg = (cfg or SolverConfig()).resolved(params)
    starts = list(starts) if starts is not None else default_starts(params)
    if not starts:
        raise ValueError("need at least one starting price pair")
    br1: dict[float, float] = {}
    br2: dict[float, float] = {}

    def answer_5g(p2):
        if p2 not in br1:
            br1[p2] = best_response_5g(params, dist, p2, cfg)[0]
        return br1[p2]

    def answer_wifi(p1):
        if p1 not in br2:
            br2[p1] = best_response_wifi(params, dist, p1, cfg)[0]
        return br2[p1]

    kernel = stage2_kernel(params, dist, cfg.eps0)

    def outcome(p1, p2):
        eq = from_kernel_row(dist, kernel.solve(p1, p2))
        return eq, params.N * (eq.x1 + eq.x2) * p1, params.N * eq.x2 * (p2 - params.c)

    if params.wifi_inert:
        # nobody ever adds WiFi, so the 5G answer is the pre-WiFi optimum
        bench = optimal_price(params, dist)
        eq = equilibrium_general(params, dist, bench.p1_bar, params.c, cfg.eps0)
        only = PriceCandidate(bench.p1_bar, params.c, bench.profit, 0.0, True, 0.0)
        return PricingEquilibrium(bench.p1_bar, params.c, eq, bench.profit, 0.0, True, 1,
                                  (only,))

    found: list[PriceCandidate] = []
    total_iterations = 0
    for a, b in starts:
        p1, p2 = answer_5g(float(b)), answer_wifi(float(a))
        best_gap, best_pair, converged = math.inf, (p1, p2), False
        for it in range(1, cfg.max_br_iterations + 1):
            p1 = answer_5g(p2)
            p2_next = answer_wifi(p1)
            gap = abs(p2_next - p2)
            total_iterations += 1
            if gap < best_gap:
                best_gap, best_pair = gap, (p1, p2)
            if gap <= cfg.eps2:
                converged = True
                break
            p2 = p2_next
        q1, q2 = best_pair
        _, pi1, pi2 = outcome(q1, q2)
        dup = any(c.converged == converged and abs(c.p1 - q1) <= cfg.fixed_point_tol
                  and abs(c.p2 - q2) <= cfg.fixed_point_tol for c in found)
        if not dup:
            found.append(PriceCandidate(q1, q2, pi1, pi2, converged, best_gap))
    fixed = [c for c in found if c.converged]
    if fixed:
        fixed.sort(key=lambda c: -(c.profit_5g + c.profit_wifi))
        primary = fixed[0]
        ordered = fixed + [c for c in found if not c.converged]
    else:
        ordered = sorted(found, key=lambda c: c.gap)
        primary = ordered[0]
    eq, pi1, pi2 = outcome(primary.p1, primary.p2)
    return PricingEquilibrium(primary.p1, primary.p2, eq, pi1, pi2, primary.converged,
                              total_iterations, tuple(ordered))


# -- simplified 5G profit ----------------------------------------------------

def _greatest_root(fn, lo: float, hi: float, steps: int = 10_000) -> float:
    xs = np.linspace(lo, hi, steps + 1)
    values = fn(xs)
    for i in range(steps - 1, -1, -1):
        f0, f1 = values[i], values[i + 1]
        if f1 == 0.0 and i + 1 < steps:
            return float(xs[i + 1])
        if (f0 > 0.0) != (f1 > 0.0) and f1 != 0.0:
            a, b = float(xs[i]), float(xs[i + 1])
            up = f0 < 0.0
            while b - a > 1e-13:
                mid = 0.5 * (a + b)
                if (fn(mid) < 0.0) == up:
                    a = mid
                else:
                    b = mid
            return 0.5 * (a + b)
    return math.nan


def pi1_simplified(params: MarketParams, p1: float, p2: float) -> float:
    """Piecewise 5G profit when some users add WiFi, uniform law only.

    Full market while the boundary root x2b keeps everyone in; otherwise the
    interior branch N*p1*(s + alpha*x2^2) with s the load level at p1 and x2
    the greatest root of the interior curve.  Once the full-market test fails
    the boundary root is not an equilibrium, so it cannot be the x2 used here.
    """
    if not params.closed_form_case or params.alpha == 0.0:
        raise UnsupportedConfiguration("simplified profit needs V1 == V2, beta == 0, alpha > 0")
    if p1 < 0:
        raise ValueError("price must be non-negative")
    if p2 <= 0.0:
        raise UnsupportedConfiguration("simplified profit needs a positive WiFi price")
    if p1 == 0.0:
        return 0.0
    a, k, m = params.alpha, params.k, params.margin
    x_hat = solve_x2_hat(a)
    x_bound = _greatest_root(lambda x: boundary_curve(params, x) - p2, x_hat, 1.0)
    if not math.isnan(x_bound) and p1 <= m - k * (1.0 - a * x_bound ** 2) ** 2:
        return params.N * p1
    if p1 >= m:
        raise UnsupportedConfiguration("5G price leaves no demand")
    s = math.sqrt((m - p1) / k)
    x_int = _greatest_root(lambda x: interior_curve(params, s, x) - p2, 0.0, 1.0)
    if (math.isnan(x_int) or p1 >= m - k * (x_int * (1.0 - a * x_int)) ** 2
            or s + a * x_int * x_int >= 1.0):
        raise UnsupportedConfiguration("no WiFi demand at these prices")
    return params.N * p1 * (s + a * x_int * x_int)
