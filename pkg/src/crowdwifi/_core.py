"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting
``CROWDWIFI_PURE_PYTHON=1`` forces the numpy/scipy twin.
"""
from __future__ import annotations

import os

from . import _fallback

if os.environ.get("CROWDWIFI_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

if _compiled is not None:
    Stage2Kernel = _compiled.Stage2Kernel
    sequential_round = _compiled.sequential_round
    BACKEND = "compiled"
else:
    Stage2Kernel = _fallback.Stage2Kernel
    sequential_round = _fallback.sequential_round
    BACKEND = "python"

PythonStage2Kernel = _fallback.Stage2Kernel
python_sequential_round = _fallback.sequential_round


def kernel_args(params, dist, grid: int) -> tuple:
    """Positional constructor arguments shared by both kernel implementations."""
    a, b, _ = dist.kernel_params()
    consts = dist._consts
    lo = mass = norm = 1.0
    if dist.kind == "truncated_normal":
        lo, _, mass = consts
    elif dist.kind in ("truncated_exponential", "truncated_pareto"):
        norm = consts[0]
    return (params.k, params.margin, params.alpha, params.beta, params.V1, params.V2,
            dist.kind_code, a, b, lo, mass, norm, int(grid))
