import os
import subprocess
import sys

import numpy as np
import pytest

from crowdwifi import _core
from crowdwifi.distributions import SensitivityDistribution
from crowdwifi.model import MarketParams

from .conftest import ALL_DISTS

compiled = pytest.mark.skipif(_core.BACKEND != "compiled", reason="compiled core not built")


@compiled
@pytest.mark.parametrize("dist", ALL_DISTS, ids=lambda d: d.kind)
@pytest.mark.parametrize("extra", [{}, {"beta": 40.0}, {"V2": 2500.0}])
def test_kernels_agree(dist, extra):
    p = MarketParams(Q=60.0, alpha=0.6, **extra)
    args = _core.kernel_args(p, dist, 2000)
    fast, slow = _core.Stage2Kernel(*args), _core.PythonStage2Kernel(*args)
    p1s = np.linspace(0.0, p.V1, 31)
    for p2 in (0.0, 25.0, 90.0, 400.0):
        a = fast.solve_p1_batch(p1s, p2)
        b = slow.solve_p1_batch(p1s, p2)
        assert np.max(np.abs(a[:, :2] - b[:, :2])) <= 1e-9
        assert np.array_equal(a[:, 2], b[:, 2])
    p2s = np.linspace(0.0, 300.0, 31)
    a, b = fast.solve_p2_batch(1200.0, p2s), slow.solve_p2_batch(1200.0, p2s)
    assert np.max(np.abs(a[:, :2] - b[:, :2])) <= 1e-9


@compiled
@pytest.mark.parametrize("p1,p2", [(800.0, 60.0), (1500.0, 20.0)])
def test_sequential_rounds_agree(p1, p2):
    p = MarketParams(Q=30.0, alpha=0.5)
    rng = np.random.default_rng(0)
    thetas = rng.random(3000)
    order = rng.permutation(3000).astype(np.int_)
    lab_fast = np.zeros(3000, dtype=np.int8)
    lab_slow = lab_fast.copy()
    args = (p.k, p.margin - p1, p.alpha, p.beta, p.V1 - p.V2, p2)
    for _ in range(5):
        n_fast = _core.sequential_round(thetas, lab_fast, order, *args)
        n_slow = _core.python_sequential_round(thetas, lab_slow, order, *args)
        assert n_fast == n_slow
        assert np.array_equal(lab_fast, lab_slow)


def test_pure_python_switch():
    env = dict(os.environ, CROWDWIFI_PURE_PYTHON="1")
    code = ("from crowdwifi import _core; from crowdwifi.model import MarketParams;"
            "from crowdwifi.distributions import SensitivityDistribution as S;"
            "from crowdwifi.stage2 import equilibrium_general as g;"
            "e = g(MarketParams(Q=30.0), S.uniform(), 800.0, 60.0);"
            "print(_core.BACKEND, repr(e.x2))")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.split()
    assert out[0] == "python"
    from crowdwifi.stage2 import equilibrium_general
    here = equilibrium_general(MarketParams(Q=30.0), SensitivityDistribution.uniform(), 800.0, 60.0)
    assert abs(float(out[1]) - here.x2) <= 1e-9
