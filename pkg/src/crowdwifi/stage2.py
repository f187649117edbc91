"""User subscription equilibrium for given 5G and WiFi prices."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _core
from .benchmark import bisect, subscription_given_price
from .distributions import SensitivityDistribution
from .model import ChoiceLabel, MarketParams, SubscriptionState, UnsupportedConfiguration

DEFAULT_EPS0 = 1e-4


class Regime(str, enum.Enum):
    FULL_MARKET_SPLIT = "FullMarketSplit"
    INTERIOR_SPLIT = "InteriorSplit"
    FIVEG_ONLY_FULL = "FiveGOnlyFull"
    FIVEG_ONLY_INTERIOR = "FiveGOnlyInterior"
    EMPTY = "Empty"


REGIME_BY_CODE = tuple(Regime)


@dataclass(frozen=True)
class Candidate:
    x1: float
    x2: float
    family: str  # "boundary", "interior" or "no_wifi"


@dataclass(frozen=True)
class SubscriptionEquilibrium:
    state: SubscriptionState
    cut_low: float
    cut_high: float
    regime: Regime
    residual: float
    candidates: tuple[Candidate, ...] = field(default=(), compare=False)
    method: str = "general"

    @property
    def x1(self) -> float:
        return self.state.x1

    @property
    def x2(self) -> float:
        return self.state.x2

    def to_dict(self) -> dict:
        return {
            "x1": self.x1,
            "x2": self.x2,
            "cut_low": self.cut_low,
            "cut_high": self.cut_high,
            "regime": self.regime.value,
            "residual": self.residual,
            "method": self.method,
            "candidates": [
                {"x1": c.x1, "x2": c.x2, "family": c.family} for c in self.candidates
            ],
        }


@dataclass(frozen=True)
class RegionThresholds:
    x2_hat: float
    p2_hat: float
    p2_hat_prime: float
    p1_hat: float


def _grid_size(eps0: float) -> int:
    if not eps0 > 0:
        raise ValueError("eps0 must be positive")
    return max(2, int(round(1.0 / eps0)))


def _finish(dist, x1: float, x2: float, regime: Regime, residual: float, method: str,
            candidates=()) -> SubscriptionEquilibrium:
    x1 = min(max(x1, 0.0), 1.0)
    x2 = min(max(x2, 0.0), 1.0 - x1)
    low = float(dist.inverse_cdf(x1))
    high = float(dist.inverse_cdf(min(1.0, x1 + x2)))
    return SubscriptionEquilibrium(SubscriptionState(x1, x2), low, high, regime, residual,
                                   tuple(candidates), method)


def _regime_without_wifi(x1: float) -> Regime:
    if x1 >= 1.0:
        return Regime.FIVEG_ONLY_FULL
    if x1 <= 0.0:
        return Regime.EMPTY
    return Regime.FIVEG_ONLY_INTERIOR


# -- threshold curves ----------------------------------------------------------

def x2_hat_polynomial(alpha: float, x):
    return 4.0 * alpha * x ** 3 - 3.0 * alpha * x ** 2 - 2.0 * x + 1.0


def solve_x2_hat(alpha: float) -> float:
    """Unique root in [0, 1] of 4a x^3 - 3a x^2 - 2x + 1, where the boundary
    curve a x (1 - a x^2)(1 - x) peaks."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    xs = np.linspace(0.0, 1.0, 1001)
    values = x2_hat_polynomial(alpha, xs)
    j = int(np.nonzero(values < 0.0)[0][0])
    return bisect(lambda x: -x2_hat_polynomial(alpha, x), float(xs[j - 1]), float(xs[j]))


def boundary_curve(params: MarketParams, x2):
    """WiFi price that leaves the boundary cutoff user indifferent (uniform case)."""
    a = params.alpha
    return a * x2 * params.k * (1.0 - a * x2 * x2) * (1.0 - x2)


def interior_curve(params: MarketParams, s: float, x2):
    """Interior counterpart of :func:`boundary_curve` at load level ``s``."""
    a = params.alpha
    return a * x2 * params.k * s * (s - x2 + a * x2 * x2)


def _load_level(params: MarketParams, p1: float) -> float:
    return math.sqrt(max(params.margin - p1, 0.0) / params.k)


def junction_balance(params: MarketParams, p1: float) -> float:
    """Height of the interior curve's local peak minus its height where the
    interior branch meets the full market, divided by alpha*k*s.

    Zero at the 5G price where the two branches trade places.  NaN when the
    local peak does not exist (1 - 3*alpha*s < 0).
    """
    a = params.alpha
    s = _load_level(params, p1)
    inner = 1.0 - 3.0 * a * s
    if inner < 0.0 or s > 1.0:
        return math.nan
    root = math.sqrt(inner)
    peak = (1.0 - root) / (3.0 * a)
    junction = math.sqrt((1.0 - s) / a)
    return (1.0 - s) / a + peak * (s - (1.0 + 3.0 * a * s - root) / (9.0 * a)) - junction


def p1_hat_interval(params: MarketParams, x2_hat: float) -> tuple[float, float]:
    m, k, a = params.margin, params.k, params.alpha
    return m - k * (1.0 - a * x2_hat ** 2) ** 2, m - k * (1.0 - a) ** 2


def solve_p1_hat(params: MarketParams, x2_hat: float | None = None) -> float:
    """Root of :func:`junction_balance` inside its stated price interval, or NaN."""
    if x2_hat is None:
        x2_hat = solve_x2_hat(params.alpha)
    lo, hi = p1_hat_interval(params, x2_hat)
    s_cap = 1.0 / (3.0 * params.alpha)
    lo = max(lo, params.margin - params.k * s_cap * s_cap, 0.0)
    if not lo < hi:
        return math.nan
    grid = np.linspace(lo, hi, 1001)[:-1]
    values = np.array([junction_balance(params, p) for p in grid])
    for i in range(len(grid) - 1):
        f0, f1 = values[i], values[i + 1]
        if np.isnan(f0) or np.isnan(f1):
            continue
        if f0 == 0.0:
            return float(grid[i])
        if (f0 > 0.0) != (f1 > 0.0):
            sign = 1.0 if f0 < 0.0 else -1.0
            return bisect(lambda p: sign * junction_balance(params, p), float(grid[i]),
                          float(grid[i + 1]), width=1e-10)
    return math.nan


def region_thresholds(params: MarketParams) -> RegionThresholds:
    xh = solve_x2_hat(params.alpha)
    p1h = solve_p1_hat(params, xh)
    if math.isnan(p1h):
        p2h_prime = math.nan
    else:
        s = _load_level(params, p1h)
        xj = math.sqrt((1.0 - s) / params.alpha)
        p2h_prime = params.alpha * xj * s * params.k * (1.0 - xj)
    return RegionThresholds(xh, float(boundary_curve(params, xh)), p2h_prime, p1h)


def _require_closed_form_regime(params: MarketParams, dist: SensitivityDistribution | None):
    if dist is not None and dist.kind != "uniform":
        raise UnsupportedConfiguration("closed forms need a uniform sensitivity law")
    if not params.closed_form_case:
        raise UnsupportedConfiguration("closed forms need V1 == V2 and beta == 0")


def region_classify(params: MarketParams, dist: SensitivityDistribution, p1: float, p2: float,
                    eps0: float = DEFAULT_EPS0):
    """Regime label at (p1, p2) together with the region thresholds."""
    _require_closed_form_regime(params, dist)
    if params.alpha == 0.0:
        raise UnsupportedConfiguration("thresholds need alpha > 0")
    eq = equilibrium_uniform(params, p1, p2, eps0)
    return eq.regime, region_thresholds(params)


# -- closed-form (polynomial) solver -----------------------------------------

def _roots_on_grid(fn, xs: np.ndarray) -> list[float]:
    """All sign changes of ``fn`` on the grid, each refined by bisection."""
    values = fn(xs)
    roots = [float(x) for x in xs[values == 0.0]]
    change = np.nonzero((values[:-1] > 0.0) & (values[1:] < 0.0)
                        | (values[:-1] < 0.0) & (values[1:] > 0.0))[0]
    for i in change:
        sign = 1.0 if values[i] < 0.0 else -1.0
        roots.append(bisect(lambda x: sign * float(fn(x)), float(xs[i]), float(xs[i + 1])))
    return roots


def equilibrium_uniform(params: MarketParams, p1: float, p2: float,
                        eps0: float = DEFAULT_EPS0) -> SubscriptionEquilibrium:
    """Polynomial route for a uniform law with V1 == V2 and beta == 0.

    The full-market split solves the quartic boundary equation in x2, the
    interior split a cubic in x2 at load level s = sqrt((V1-u-p1)/(N/Q)).
    The largest admissible root wins; without one, nobody adds WiFi.
    """
    _require_closed_form_regime(params, None)
    dist = SensitivityDistribution.uniform()
    if p1 < 0 or p2 < 0:
        raise ValueError("prices must be non-negative")
    a, k = params.alpha, params.k
    D = params.margin - p1
    found: list[Candidate] = []
    if a > 0.0 and math.isfinite(p2):
        xs = np.linspace(0.0, 1.0, _grid_size(eps0) + 1)
        for x in _roots_on_grid(lambda x: boundary_curve(params, x) - p2, xs):
            if x > 0.0 and D - p2 - (1.0 - a * x) * k * (1.0 - a * x * x) >= 0.0:
                found.append(Candidate(1.0 - x, x, "boundary"))
        if 0.0 < D < k:
            s = math.sqrt(D / k)
            for x in _roots_on_grid(lambda x: interior_curve(params, s, x) - p2, xs):
                x1 = s - x + a * x * x
                # at p2 = 0 the root sits exactly on x1 = 0; allow rounding there
                if x > 0.0 and x1 >= -1e-10 and s + a * x * x < 1.0:
                    found.append(Candidate(max(x1, 0.0), x, "interior"))
    x1_bar, _, _ = subscription_given_price(params, dist, max(p1, 0.0))
    found.append(Candidate(x1_bar, 0.0, "no_wifi"))
    best = max(found, key=lambda c: (c.x2, c.x1))
    if best.family == "boundary":
        regime = Regime.FULL_MARKET_SPLIT
        residual = abs(float(boundary_curve(params, best.x2)) - p2)
    elif best.family == "interior":
        regime = Regime.INTERIOR_SPLIT
        s = math.sqrt(D / k)
        residual = abs(float(interior_curve(params, s, best.x2)) - p2)
    else:
        regime = _regime_without_wifi(best.x1)
        residual = abs(k * best.x1 ** 2 - D) if regime is Regime.FIVEG_ONLY_INTERIOR else 0.0
    return _finish(dist, best.x1, best.x2, regime, residual, "polynomial", found)


# -- general solver ------------------------------------------------------------

@lru_cache(maxsize=64)
def _kernel(params: MarketParams, dist: SensitivityDistribution, grid: int, backend: str):
    args = _core.kernel_args(params, dist, grid)
    if backend == "python":
        return _core.PythonStage2Kernel(*args)
    return _core.Stage2Kernel(*args)


def stage2_kernel(params: MarketParams, dist: SensitivityDistribution,
                  eps0: float = DEFAULT_EPS0, backend: str | None = None):
    """Cached grid solver for one market; reused by the best-response searches."""
    return _kernel(params, dist, _grid_size(eps0), backend or _core.BACKEND)


def from_kernel_row(dist, row, method: str = "general", candidates=()) -> SubscriptionEquilibrium:
    x1, x2, code, residual = float(row[0]), float(row[1]), int(row[2]), float(row[3])
    return _finish(dist, x1, x2, REGIME_BY_CODE[code], residual, method, candidates)


def candidate_list(params: MarketParams, dist: SensitivityDistribution, p1: float, p2: float,
                   eps0: float = DEFAULT_EPS0) -> tuple[Candidate, ...]:
    """Every equilibrium the grid search can see, not only the selected one."""
    ref = stage2_kernel(params, dist, eps0, backend="python")
    D = params.margin - p1
    found = []
    x1_bar, _, _ = subscription_given_price(params, dist, p1)
    if not ref.inert and math.isfinite(p2):
        xs = ref.xs
        for x in _roots_on_grid(lambda x: ref._boundary(x, p2), xs):
            if x > 0.0 and ref._slack(x, D, p2) >= 0.0:
                found.append(Candidate(1.0 - x, x, "boundary"))
        inside = ref.H >= p2
        part = ref._participation(xs, D, p2)
        for i in np.nonzero(inside[1:-1] & inside[2:])[0] + 1:
            f0, f1 = part[i], part[i + 1]
            if f0 == 0.0 or (f0 > 0.0) != (f1 > 0.0) and f1 != 0.0:
                sign = 1.0 if f0 < 0.0 else -1.0
                x = bisect(lambda t: sign * float(ref._participation(t, D, p2)), xs[i], xs[i + 1])
                x1 = float(ref._inner_x1(x, p2 + params.alpha * x * (params.V1 - params.V2)))
                if x1 + x < 1.0:
                    found.append(Candidate(x1, x, "interior"))
    found.append(Candidate(x1_bar, 0.0, "no_wifi"))
    return tuple(sorted(found, key=lambda c: (-c.x2, -c.x1)))


def equilibrium_general(params: MarketParams, dist: SensitivityDistribution, p1: float,
                        p2: float, eps0: float = DEFAULT_EPS0,
                        diagnostics: bool = False) -> SubscriptionEquilibrium:
    """Stage II equilibrium for any supported law, any V1 >= V2 and any beta.

    Among all solutions the one with the largest WiFi fraction is returned.
    With ``diagnostics`` the full candidate list is attached.
    """
    if p1 < 0 or p2 < 0:
        raise ValueError("prices must be non-negative")
    if params.wifi_inert or not math.isfinite(p2):
        x1, _, branch = subscription_given_price(params, dist, p1)
        eq = _finish(dist, x1, 0.0, _regime_without_wifi(x1), 0.0, "no_wifi")
        if diagnostics:
            eq = _finish(dist, x1, 0.0, eq.regime, 0.0, "no_wifi",
                         (Candidate(x1, 0.0, "no_wifi"),))
        return eq
    row = stage2_kernel(params, dist, eps0).solve(float(p1), float(p2))
    cands = candidate_list(params, dist, p1, p2, eps0) if diagnostics else ()
    return from_kernel_row(dist, row, "general", cands)


def choice_of(params: MarketParams, theta: float, eq: SubscriptionEquilibrium, p1: float,
              p2: float) -> ChoiceLabel:
    """Service picked by a user of sensitivity ``theta`` at the equilibrium.

    Payoff ties at the reservation level count as joining; the 1e-9 slack
    absorbs rounding in the cutoff itself.
    """
    from .model import payoff_5g_only, payoff_5g_wifi

    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    slack = 1e-9 * max(1.0, params.V1)
    if theta <= eq.cut_low:
        if float(payoff_5g_only(params, theta, eq.state, p1)) >= params.u_bar - slack:
            return ChoiceLabel.FIVEG_ONLY
        return ChoiceLabel.NEITHER
    if theta <= eq.cut_high:
        if float(payoff_5g_wifi(params, theta, eq.state, p1, p2)) >= params.u_bar - slack:
            return ChoiceLabel.FIVEG_PLUS_WIFI
    return ChoiceLabel.NEITHER
