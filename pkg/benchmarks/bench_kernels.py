"""Time the compiled kernels against their pure-Python twins.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from crowdwifi import _core
from crowdwifi.distributions import SensitivityDistribution
from crowdwifi.model import MarketParams


def _cases():
    params = MarketParams(Q=60.0, alpha=0.5)
    dist = SensitivityDistribution.truncated_normal(0.5, 1.0)
    args = _core.kernel_args(params, dist, 2000)
    p1s = np.linspace(0.0, params.V1, 401)

    def price_sweep(kind):
        kernel = kind(*args)
        return lambda: kernel.solve_p1_batch(p1s, 60.0)

    rng = np.random.default_rng(0)
    thetas = rng.random(20_000)
    order = rng.permutation(len(thetas)).astype(np.int_)
    round_args = (params.k, params.margin - 800.0, params.alpha, params.beta, 0.0, 60.0)

    def agent_round(fn):
        def run():
            labels = np.zeros(len(thetas), dtype=np.int8)
            fn(thetas, labels, order, *round_args)
        return run

    return [
        ("stage2 solve, 401 prices", price_sweep(_core.Stage2Kernel),
         price_sweep(_core.PythonStage2Kernel)),
        ("agent round, 20k agents", agent_round(_core.sequential_round),
         agent_round(_core.python_sequential_round)),
    ]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if _core.BACKEND != "compiled":
        print("compiled core not built; run `python setup.py build_ext --inplace`")
        return 1
    print(f"{'case':<28}{'compiled s':>12}{'python s':>12}{'speed-up':>10}")
    for name, fast, slow in _cases():
        t_fast = min(timeit.repeat(fast, number=1, repeat=args.repeat))
        t_slow = min(timeit.repeat(slow, number=1, repeat=args.repeat))
        print(f"{name:<28}{t_fast:>12.4f}{t_slow:>12.4f}{t_slow / t_fast:>9.0f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
