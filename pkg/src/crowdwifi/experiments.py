"""Parameter sweeps, payoff profiles and named figure presets."""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .benchmark import optimal_price
from .distributions import SensitivityDistribution
from .model import (
    MarketParams,
    SubscriptionState,
    payoff_5g_only,
    payoff_5g_wifi,
    payoff_benchmark,
    social_welfare,
)
from .stage1 import SolverConfig, nash_equilibrium
from .stage2 import choice_of, equilibrium_general

SWEEP_COLUMNS = ("Q", "alpha", "c", "beta", "p1_star", "p2_star", "x1", "x2", "pi1", "pi2",
                 "pi1_benchmark", "p1_benchmark", "sw", "sw_benchmark", "converged")
BENCHMARK_COLUMNS = ("Q", "p1_bar", "x1_bar", "theta_cut", "profit", "branch")
PAYOFF_COLUMNS = ("theta", "u_benchmark", "u_post", "choice")
MAP_COLUMNS = ("p1", "p2", "regime", "x1", "x2")


def grid_cells(base: MarketParams, sweep: dict[str, list[float]]) -> list[MarketParams]:
    """Cartesian product of the sweep axes in a fixed axis order."""
    axes = [name for name in ("Q", "alpha", "c", "beta", "beta_frac", "V2") if name in sweep]
    cells = []
    for values in itertools.product(*(sweep[name] for name in axes)):
        changes = dict(zip(axes, values))
        frac = changes.pop("beta_frac", None)
        params = base.replace(**changes)
        if frac is not None:
            params = params.replace(beta=frac * params.k)
        cells.append(params)
    return cells


def sweep_row(params: MarketParams, dist: SensitivityDistribution, solver: SolverConfig) -> dict:
    eq = nash_equilibrium(params, dist, solver)
    bench = optimal_price(params, dist)
    sw = social_welfare(params, dist, eq.stage2.state, eq.p1_star, eq.p2_star, "post_wifi")
    sw_bar = social_welfare(params, dist, SubscriptionState(bench.x1_bar), bench.p1_bar,
                            regime="pre_wifi")
    return {
        "Q": params.Q, "alpha": params.alpha, "c": params.c, "beta": params.beta,
        "V2": params.V2,
        "p1_star": eq.p1_star, "p2_star": eq.p2_star, "x1": eq.stage2.x1, "x2": eq.stage2.x2,
        "pi1": eq.profit_5g, "pi2": eq.profit_wifi,
        "pi1_benchmark": bench.profit, "p1_benchmark": bench.p1_bar,
        "sw": sw, "sw_benchmark": sw_bar, "converged": eq.converged,
    }


def _cell_job(job):
    params, dist, solver = job
    return sweep_row(params, dist, solver)


def run_sweep(cells: Sequence[MarketParams], dist: SensitivityDistribution,
              solver: SolverConfig, jobs: int = 1) -> list[dict]:
    """Rows in grid order whatever the number of worker processes."""
    work = [(p, dist, solver) for p in cells]
    if jobs <= 1 or len(work) <= 1:
        return [_cell_job(job) for job in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_cell_job, work))


def benchmark_rows(base: MarketParams, dist: SensitivityDistribution,
                   q_values: Sequence[float]) -> list[dict]:
    rows = []
    for Q in q_values:
        b = optimal_price(base.replace(Q=Q), dist)
        rows.append({"Q": float(Q), "p1_bar": b.p1_bar, "x1_bar": b.x1_bar,
                     "theta_cut": b.theta_cut, "profit": b.profit, "branch": b.branch.value})
    return rows


def payoff_rows(params: MarketParams, dist: SensitivityDistribution, p1: float, p2: float,
                points: int = 200) -> list[dict]:
    """Best realised payoff per theta after WiFi entry, next to the pre-WiFi payoff."""
    bench = optimal_price(params, dist)
    eq = equilibrium_general(params, dist, p1, p2)
    rows = []
    for theta in np.linspace(0.0, 1.0, points):
        label = choice_of(params, float(theta), eq, p1, p2)
        if label == 1:
            post = float(payoff_5g_only(params, theta, eq.state, p1))
        elif label == 2:
            post = float(payoff_5g_wifi(params, theta, eq.state, p1, p2))
        else:
            post = params.u_bar
        pre = max(float(payoff_benchmark(params, theta, bench.x1_bar, bench.p1_bar)), params.u_bar)
        rows.append({"theta": float(theta), "u_benchmark": pre, "u_post": post,
                     "choice": int(label)})
    return rows


@dataclass(frozen=True)
class FigurePreset:
    dist: SensitivityDistribution
    base: MarketParams
    sweep: dict
    columns: tuple[str, ...]
    note: str


_TN = SensitivityDistribution.truncated_normal(0.5, 1.0)
_Q_GRID = [30.0, 60.0, 90.0, 120.0, 150.0, 180.0, 210.0, 240.0]
_PRICE_COLS = ("Q", "alpha", "c", "beta", "V2", "p1_star", "p1_benchmark", "converged")
_PROFIT_COLS = ("Q", "alpha", "c", "beta", "V2", "pi1", "pi1_benchmark", "converged")

FIGURES: dict[str, FigurePreset] = {
    "price_vs_Q": FigurePreset(_TN, MarketParams(c=100.0), {"Q": _Q_GRID, "alpha": [0.5, 0.8]},
                               _PRICE_COLS, "5G price against capacity"),
    "x1_vs_Q": FigurePreset(_TN, MarketParams(c=100.0, alpha=0.8), {"Q": _Q_GRID},
                            ("Q", "alpha", "c", "x1", "converged"), "5G-only share"),
    "x2_vs_Q": FigurePreset(_TN, MarketParams(c=100.0, alpha=0.8), {"Q": _Q_GRID},
                            ("Q", "alpha", "c", "x2", "converged"), "add-on share"),
    "profit_vs_Q": FigurePreset(_TN, MarketParams(c=100.0), {"Q": _Q_GRID, "alpha": [0.5, 0.8]},
                                _PROFIT_COLS, "5G profit against capacity"),
    "welfare_vs_Q": FigurePreset(_TN, MarketParams(c=100.0), {"Q": _Q_GRID, "alpha": [0.5, 0.8]},
                                 ("Q", "alpha", "c", "sw", "sw_benchmark", "converged"),
                                 "social welfare"),
    "price_vs_V2": FigurePreset(_TN, MarketParams(c=50.0, alpha=0.5),
                                {"Q": _Q_GRID, "V2": [2000.0, 2500.0, 3000.0]},
                                _PRICE_COLS, "5G price for lower in-coverage WiFi benefit"),
    "profit_vs_V2": FigurePreset(_TN, MarketParams(c=50.0, alpha=0.5),
                                 {"Q": _Q_GRID, "V2": [2000.0, 2500.0, 3000.0]},
                                 _PROFIT_COLS, "5G profit for lower in-coverage WiFi benefit"),
    "beta_price": FigurePreset(_TN, MarketParams(c=50.0, alpha=0.5),
                               {"Q": _Q_GRID, "beta_frac": [0.0, 0.25, 0.5, 1.0]},
                               _PRICE_COLS, "5G price under WiFi congestion"),
    "beta_profit": FigurePreset(_TN, MarketParams(c=50.0, alpha=0.5),
                                {"Q": _Q_GRID, "beta_frac": [0.0, 0.25, 0.5, 1.0]},
                                _PROFIT_COLS, "5G profit under WiFi congestion"),
}

PAYOFF_FIGURE_Q = (30.0, 120.0, 180.0)


def figure_rows(figure_id: str, solver: SolverConfig, jobs: int = 1) -> tuple[tuple[str, ...], list[dict]]:
    if figure_id == "payoffs":
        rows = []
        base = MarketParams(c=50.0, alpha=0.5)
        for Q in PAYOFF_FIGURE_Q:
            params = base.replace(Q=Q)
            eq = nash_equilibrium(params, _TN, solver)
            for row in payoff_rows(params, _TN, eq.p1_star, eq.p2_star, 100):
                rows.append({"Q": Q, **row})
        return ("Q",) + PAYOFF_COLUMNS, rows
    if figure_id not in FIGURES:
        raise KeyError(figure_id)
    preset = FIGURES[figure_id]
    rows = run_sweep(grid_cells(preset.base, preset.sweep), preset.dist, solver, jobs)
    return preset.columns, rows
