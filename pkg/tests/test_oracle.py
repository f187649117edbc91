import math

import numpy as np
import pytest

from crowdwifi.benchmark import optimal_price
from crowdwifi.distributions import SensitivityDistribution
from crowdwifi.model import MarketParams
from crowdwifi.oracle import (
    best_labels,
    brute_force_benchmark_price,
    check_backends,
    check_benchmark_closed_forms,
    check_cutoffs,
    check_solver_agreement,
    check_x2_hat,
    cutoff_labels,
    cutoff_structure_audit,
    simulate_choices,
)
from crowdwifi.stage2 import Regime, candidate_list, equilibrium_general

from .conftest import ALL_DISTS

N_AGENTS = 100_000
TOL = 3.0 / math.sqrt(N_AGENTS)


@pytest.mark.parametrize("Q,alpha,p1,p2", [(30.0, 0.5, 800.0, 60.0), (120.0, 0.5, 1500.0, 40.0),
                                           (180.0, 0.8, 1700.0, 30.0), (60.0, 0.2, 300.0, 200.0)])
@pytest.mark.parametrize("dist", ALL_DISTS[:2], ids=lambda d: d.kind)
def test_agents_reach_the_equilibrium(Q, alpha, p1, p2, dist):
    p = MarketParams(Q=Q, alpha=alpha)
    eq = equilibrium_general(p, dist, p1, p2)
    res = simulate_choices(p, dist, p1, p2, N_AGENTS, seed=3, start=eq)
    assert res.converged
    assert abs(res.x1_emp - eq.x1) <= TOL and abs(res.x2_emp - eq.x2) <= TOL


def test_agents_from_empty_start(uniform):
    p = MarketParams(Q=30.0, alpha=0.5)
    x1, x2, converged, rounds = simulate_choices(p, uniform, 800.0, 60.0, N_AGENTS, seed=1)
    assert converged and rounds >= 1
    # from an empty market the dynamics may settle on any listed equilibrium
    gaps = [max(abs(x1 - c.x1), abs(x2 - c.x2)) for c in candidate_list(p, uniform, 800.0, 60.0)]
    assert min(gaps) <= TOL


@pytest.mark.parametrize("Q,p1,p2", [(30.0, 800.0, 60.0), (120.0, 1500.0, 40.0), (180.0, 1000.0, 90.0)])
def test_synchronous_updates_agree_on_uniform(uniform, Q, p1, p2):
    p = MarketParams(Q=Q, alpha=0.5)
    eq = equilibrium_general(p, uniform, p1, p2)
    res = simulate_choices(p, uniform, p1, p2, N_AGENTS, seed=5, update_rule="synchronous", start=eq)
    assert res.converged or res.cycled
    assert abs(res.x1_emp - eq.x1) <= TOL and abs(res.x2_emp - eq.x2) <= TOL


def test_everyone_priced_out(uniform):
    p = MarketParams()
    x1, x2, converged, _ = simulate_choices(p, uniform, 2500.0, 3000.0, 1000)
    assert (x1, x2, converged) == (0.0, 0.0, True)


def test_no_coverage_means_no_addon(tnormal):
    p = MarketParams(alpha=0.0)
    res = simulate_choices(p, tnormal, 900.0, 1.0, 20_000)
    assert res.converged and res.x2_emp == 0.0


def test_simulation_is_seeded(uniform):
    p = MarketParams(Q=30.0)
    a = simulate_choices(p, uniform, 800.0, 60.0, 5000, seed=7)
    b = simulate_choices(p, uniform, 800.0, 60.0, 5000, seed=7)
    assert tuple(a) == tuple(b)
    assert np.array_equal(a.population.thetas, b.population.thetas)


def test_simulation_argument_checks(uniform, market):
    with pytest.raises(ValueError):
        simulate_choices(market, uniform, 1.0, 1.0, 10)
    with pytest.raises(ValueError):
        simulate_choices(market, uniform, 1.0, 1.0, 1000, update_rule="random")


def test_best_labels_tie_rules():
    p = MarketParams(alpha=0.0)
    labels = best_labels(p, np.array([0.0, 0.5, 1.0]), 0.5, 0.0, p.margin, 0.0)
    # u1 == u2 == 0 at theta 0: the 5G-only plan wins ties
    assert labels[0] == 1 and labels[1] == 0 and labels[2] == 0


@pytest.mark.parametrize("dist", ALL_DISTS, ids=lambda d: d.kind)
def test_brute_force_benchmark(dist):
    p = MarketParams(Q=90.0)
    price, profit = brute_force_benchmark_price(p, dist, 0.5)
    bench = optimal_price(p, dist)
    assert bench.profit >= profit - 1e-6
    assert abs(price - bench.p1_bar) <= 1.0
    with pytest.raises(ValueError):
        brute_force_benchmark_price(p, dist, 0.0)


def test_cutoff_audit_shapes(uniform):
    p = MarketParams(Q=120.0, alpha=0.5)
    full = equilibrium_general(p, uniform, 100.0, 60.0)
    assert full.regime is Regime.FULL_MARKET_SPLIT
    assert set(cutoff_labels(p, full, 100.0, 60.0, 1000)) <= {"1", "2"}
    congested = p.replace(beta=1e4)
    eq = equilibrium_general(congested, uniform, 1500.0, 10.0)
    labels = cutoff_labels(congested, eq, 1500.0, 10.0, 1000)
    assert "2" not in labels and labels == "".join(sorted(labels, reverse=True)) and "0" in labels
    empty = equilibrium_general(p, uniform, 2500.0, 3000.0)
    assert set(cutoff_labels(p, empty, 2500.0, 3000.0, 500)) == {"0"}
    assert cutoff_structure_audit(p, uniform, 1500.0, 40.0)
    with pytest.raises(ValueError):
        cutoff_structure_audit(p, uniform, 1500.0, 40.0, n_grid=10)


def test_audit_checks_pass(uniform):
    p = MarketParams(Q=60.0, alpha=0.5)
    checks = (check_benchmark_closed_forms() + check_x2_hat()
              + [check_solver_agreement(p, 6), check_backends(p, uniform)]
              + check_cutoffs(p, uniform, [(400.0, 30.0), (1300.0, 50.0)]))
    failed = [c.name for c in checks if not c.passed]
    assert not failed
    assert set(checks[0].to_dict()) == {"name", "passed", "residual", "tolerance", "detail"}
