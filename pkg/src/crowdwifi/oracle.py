"""Brute-force checks of the analytic solvers.

A finite population of agents repeatedly best-responds to the empirical
subscription fractions; exhaustive price grids stand in for the optimiser.
Neither path calls the grid kernel's root search.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _core
from .benchmark import optimal_price
from .distributions import SensitivityDistribution
from .model import MarketParams
from .stage2 import (
    SubscriptionEquilibrium,
    choice_of,
    equilibrium_general,
    equilibrium_uniform,
    solve_x2_hat,
    x2_hat_polynomial,
)

UPDATE_RULES = ("synchronous", "random_sequential")
MAX_ROUNDS = 10_000


@dataclass
class AgentPopulation:
    thetas: np.ndarray
    choices: np.ndarray
    seed: int

    def __post_init__(self):
        if len(self.thetas) != len(self.choices):
            raise ValueError("thetas and choices must have equal length")

    @property
    def fractions(self) -> tuple[float, float]:
        n = len(self.choices)
        return (float(np.count_nonzero(self.choices == 1)) / n,
                float(np.count_nonzero(self.choices == 2)) / n)


@dataclass
class SimulationResult:
    x1_emp: float
    x2_emp: float
    converged: bool
    rounds: int
    population: AgentPopulation = field(repr=False)
    cycled: bool = False

    def __iter__(self):
        return iter((self.x1_emp, self.x2_emp, self.converged, self.rounds))


def best_labels(params: MarketParams, thetas: np.ndarray, x1: float, x2: float,
                p1: float, p2: float, current: np.ndarray | None = None) -> np.ndarray:
    """Each agent's best choice against fixed fractions (ties favour the cheaper option).

    With ``current`` labels, an agent prices each option with itself counted in
    it, which is the exact finite-population best reply.
    """
    n = len(thetas)
    if current is None:
        a1 = b1 = x1
        a2 = b2 = x2
    else:
        others1 = x1 - (current == 1) / n
        others2 = x2 - (current == 2) / n
        a1, a2 = others1 + 1.0 / n, others2
        b1, b2 = others1, others2 + 1.0 / n
    head = params.margin - p1
    u1 = head - params.k * (a1 + a2 * (1.0 - params.alpha * a2)) * thetas
    w = params.alpha * b2
    load = b1 + b2 * (1.0 - params.alpha * b2)
    u2 = (head - w * (params.V1 - params.V2) - p2
          - ((1.0 - w) * params.k * load + w * params.beta) * thetas)
    labels = np.zeros(n, dtype=np.int8)
    labels[(u2 > u1) & (u2 >= 0.0)] = 2
    labels[(u1 >= u2) & (u1 >= 0.0)] = 1
    return labels


def _counts(labels: np.ndarray) -> tuple[float, float]:
    n = len(labels)
    return np.count_nonzero(labels == 1) / n, np.count_nonzero(labels == 2) / n


def simulate_choices(params: MarketParams, dist: SensitivityDistribution, p1: float, p2: float,
                     n_agents: int = 100_000, seed: int = 0,
                     update_rule: str = "random_sequential",
                     start: SubscriptionEquilibrium | None = None,
                     max_rounds: int = MAX_ROUNDS) -> SimulationResult:
    """Best-response dynamics of a sampled population.

    Everybody starts at Neither unless ``start`` is given, in which case each
    agent begins with its best reply to the fractions of ``start``.  Movers
    count themselves in the option they evaluate.
    Synchronous updates can flip back and forth between two states forever;
    such a 2-cycle stops the run, is reported as not converged and the two
    states' fractions are averaged.
    """
    if n_agents < 100:
        raise ValueError("need at least 100 agents")
    if update_rule not in UPDATE_RULES:
        raise ValueError(f"update_rule must be one of {UPDATE_RULES}")
    rng = np.random.default_rng(seed)
    thetas = np.asarray(dist.inverse_cdf(rng.random(int(n_agents))), dtype=float)
    if start is None:
        labels = np.zeros(len(thetas), dtype=np.int8)
    else:
        labels = best_labels(params, thetas, start.x1, start.x2, p1, p2)
    pop = AgentPopulation(thetas, labels, seed)
    if update_rule == "random_sequential":
        args = (params.k, params.margin - p1, params.alpha, params.beta,
                params.V1 - params.V2, p2)
        for rounds in range(1, max_rounds + 1):
            order = rng.permutation(len(thetas)).astype(np.int_)
            if _core.sequential_round(thetas, labels, order, *args) == 0:
                return SimulationResult(*pop.fractions, True, rounds, pop)
        return SimulationResult(*pop.fractions, False, max_rounds, pop)

    previous = None
    for rounds in range(1, max_rounds + 1):
        nxt = best_labels(params, thetas, *_counts(labels), p1, p2, labels)
        if np.array_equal(nxt, labels):
            return SimulationResult(*pop.fractions, True, rounds, pop)
        if previous is not None and np.array_equal(nxt, previous):
            a, b = _counts(labels), _counts(nxt)
            return SimulationResult(0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), False, rounds,
                                    pop, cycled=True)
        previous = labels.copy()
        labels[:] = nxt
    return SimulationResult(*pop.fractions, False, max_rounds, pop)


def _share_at_prices(params: MarketParams, dist: SensitivityDistribution,
                     prices: np.ndarray) -> np.ndarray:
    """Pre-WiFi 5G share solving x = F(min(1, slack / (k x))), by bisection on x."""
    slack = params.margin - prices
    lo, hi = np.zeros_like(prices), np.ones_like(prices)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        cut = np.minimum(1.0, np.maximum(slack, 0.0) / (params.k * mid))
        up = mid - dist.cdf(cut) > 0.0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    x = 0.5 * (lo + hi)
    return np.where(slack >= params.k, 1.0, np.where(slack <= 0.0, 0.0, x))


def brute_force_benchmark_price(params: MarketParams, dist: SensitivityDistribution,
                                grid_step: float, zoom: int = 0) -> tuple[float, float]:
    """Best pre-WiFi 5G price on a plain grid over [0, V1 - u_bar].

    Each ``zoom`` pass re-grids the two cells around the current winner with
    the same number of points.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    n = int(math.floor(params.margin / grid_step + 1e-9))
    prices = grid_step * np.arange(n + 1)
    if params.margin - prices[-1] > 1e-9:
        prices = np.append(prices, params.margin)
    for level in range(zoom + 1):
        profits = params.N * _share_at_prices(params, dist, prices) * prices
        best = int(np.argmax(profits))
        if level < zoom:
            lo = prices[max(best - 1, 0)]
            hi = prices[min(best + 1, len(prices) - 1)]
            prices = np.linspace(lo, hi, len(prices))
    return float(prices[best]), float(profits[best])


_CUTOFF_PATTERN = re.compile(r"1*2*0*")


def cutoff_labels(params: MarketParams, eq: SubscriptionEquilibrium, p1: float, p2: float,
                  n_grid: int) -> str:
    grid = np.linspace(0.0, 1.0, n_grid)
    return "".join(str(int(choice_of(params, float(t), eq, p1, p2))) for t in grid)


def cutoff_structure_audit(params: MarketParams, dist: SensitivityDistribution, p1: float,
                           p2: float, n_grid: int = 1000) -> bool:
    """True when choices along sorted theta read 5G-only, then add-on, then neither."""
    if n_grid < 100:
        raise ValueError("n_grid must be at least 100")
    eq = equilibrium_general(params, dist, p1, p2)
    return _CUTOFF_PATTERN.fullmatch(cutoff_labels(params, eq, p1, p2, n_grid)) is not None


# -- audit suite -------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "residual": self.residual,
                "tolerance": self.tolerance, "detail": self.detail}


def _check(name, residual, tolerance, detail=""):
    residual = float(residual)
    return CheckResult(name, bool(residual <= tolerance), residual, tolerance, detail)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


ALL_KINDS = (
    SensitivityDistribution.uniform(),
    SensitivityDistribution.truncated_normal(0.5, 1.0),
    SensitivityDistribution.truncated_exponential(2.0),
    SensitivityDistribution.truncated_pareto(2.0, 1.0),
)


def check_benchmark_closed_forms() -> list[CheckResult]:
    out = []
    uniform = SensitivityDistribution.uniform()
    for Q in (30.0, 180.0):
        params = MarketParams(Q=Q)
        m = params.margin
        if Q < 3.0 * params.N / m:
            p_ref, x_ref = 2.0 * m / 3.0, math.sqrt(m / (3.0 * params.k))
        else:
            p_ref, x_ref = m - params.k, 1.0
        closed = optimal_price(params, uniform, "closed_form")
        numeric = optimal_price(params, uniform, "numeric")
        step = m / 20_000.0
        p_grid, _ = brute_force_benchmark_price(params, uniform, step)
        out.append(_check(f"benchmark_closed_form_Q{Q:g}",
                          max(_rel(closed.p1_bar, p_ref), _rel(closed.x1_bar, x_ref)), 1e-9))
        out.append(_check(f"benchmark_numeric_Q{Q:g}",
                          max(_rel(numeric.p1_bar, p_ref), _rel(numeric.profit, closed.profit)), 1e-6))
        out.append(_check(f"benchmark_grid_Q{Q:g}", abs(p_grid - p_ref), step))
    return out


def check_grid_price_all_kinds(params: MarketParams) -> list[CheckResult]:
    out = []
    step = params.margin / 2000.0
    for dist in ALL_KINDS:
        p_grid, _ = brute_force_benchmark_price(params, dist, step)
        out.append(_check(f"grid_price_{dist.kind}", abs(p_grid - optimal_price(params, dist).p1_bar),
                          step))
    return out


def check_solver_agreement(params: MarketParams, size: int = 10) -> CheckResult:
    base = params.replace(V2=params.V1, beta=0.0)
    if base.alpha == 0.0:
        base = base.replace(alpha=0.5)
    uniform = SensitivityDistribution.uniform()
    worst = 0.0
    for p1 in np.linspace(0.0, base.margin, size):
        for p2 in np.linspace(0.0, base.k / 4.0, size):
            a = equilibrium_uniform(base, float(p1), float(p2))
            b = equilibrium_general(base, uniform, float(p1), float(p2))
            worst = max(worst, abs(a.x1 - b.x1), abs(a.x2 - b.x2))
    return _check("solver_agreement", worst, 1e-8, f"{size}x{size} price grid")


def check_backends(params: MarketParams, dist: SensitivityDistribution) -> CheckResult:
    if _core.BACKEND != "compiled":
        return CheckResult("backend_agreement", True, 0.0, 0.0, "compiled core not available")
    args = _core.kernel_args(params, dist, 2000)
    fast, slow = _core.Stage2Kernel(*args), _core.PythonStage2Kernel(*args)
    worst = 0.0
    for p2 in np.linspace(params.c, max(params.V2, params.c), 5):
        p1s = np.linspace(0.0, params.V1, 25)
        diff = np.abs(fast.solve_p1_batch(p1s, float(p2))[:, :2] - slow.solve_p1_batch(p1s, float(p2))[:, :2])
        worst = max(worst, float(diff.max()))
    return _check("backend_agreement", worst, 1e-9)


def check_agents(params: MarketParams, dist: SensitivityDistribution, prices: Sequence[tuple[float, float]],
                 n_agents: int, seed: int) -> list[CheckResult]:
    out = []
    tol = 3.0 / math.sqrt(n_agents)
    for p1, p2 in prices:
        eq = equilibrium_general(params, dist, p1, p2)
        sim = simulate_choices(params, dist, p1, p2, n_agents, seed, start=eq)
        gap = max(abs(sim.x1_emp - eq.x1), abs(sim.x2_emp - eq.x2))
        ok = sim.converged and gap <= tol
        out.append(CheckResult(f"agents_stationary_p1={p1:g}_p2={p2:g}", ok, gap, tol,
                               f"rounds={sim.rounds}"))
    return out


def check_cutoffs(params: MarketParams, dist: SensitivityDistribution,
                  prices: Sequence[tuple[float, float]]) -> list[CheckResult]:
    out = []
    for p1, p2 in prices:
        ok = cutoff_structure_audit(params, dist, p1, p2, 500)
        out.append(CheckResult(f"cutoffs_p1={p1:g}_p2={p2:g}", ok, 0.0 if ok else 1.0, 0.0))
    return out


def check_x2_hat() -> list[CheckResult]:
    out = []
    for alpha in (0.2, 0.5, 0.8):
        out.append(_check(f"x2_hat_alpha{alpha:g}",
                          abs(x2_hat_polynomial(alpha, solve_x2_hat(alpha))), 1e-10))
    return out


def default_audit_prices(params: MarketParams) -> list[tuple[float, float]]:
    m = params.margin
    lo2 = params.c
    return [(m / 3.0, lo2), (2.0 * m / 3.0, lo2), (m / 3.0, lo2 + params.k / 10.0),
            (0.9 * m, lo2), (m, params.V2)]


def run_verification(params: MarketParams, dist: SensitivityDistribution, seed: int = 0,
                     n_agents: int = 100_000) -> list[CheckResult]:
    """Every audit in one list; the market-specific ones use ``params`` and ``dist``."""
    prices = default_audit_prices(params)
    results = check_benchmark_closed_forms()
    results += check_grid_price_all_kinds(params)
    results.append(check_solver_agreement(params))
    results.append(check_backends(params, dist))
    results += check_x2_hat()
    results += check_cutoffs(params, dist, prices)
    results += check_agents(params, dist, prices, n_agents, seed)
    return results

