"""Pricing and subscription equilibria for 5G with a crowdsourced WiFi add-on.

Exit status: 0 on success, 1 when a verification check fails, 2 for a bad
configuration or a case the solvers do not support.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .experiments import (
    BENCHMARK_COLUMNS,
    FIGURES,
    MAP_COLUMNS,
    PAYOFF_COLUMNS,
    SWEEP_COLUMNS,
    benchmark_rows,
    figure_rows,
    grid_cells,
    payoff_rows,
    run_sweep,
)
from .model import UnsupportedConfiguration
from .oracle import run_verification
from .stage1 import nash_equilibrium
from .stage2 import equilibrium_general

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG = 0, 1, 2


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def render_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _table(cfg, columns, rows):
    if cfg.output_format == "json":
        return render_json([{c: row[c] for c in columns} for row in rows])
    return render_csv(columns, rows)


def _prices(cfg, args) -> tuple[float, float]:
    p1 = args.p1 if args.p1 is not None else cfg.prices.get("p1")
    p2 = args.p2 if args.p2 is not None else cfg.prices.get("p2")
    if p1 is None or p2 is None:
        raise cfgmod.ConfigError("prices: give --p1 and --p2 or prices.p1 and prices.p2")
    if p1 < 0 or p2 < 0:
        raise cfgmod.ConfigError("prices must be non-negative")
    return float(p1), float(p2)


def cmd_benchmark(cfg, args):
    qs = cfg.sweep.get("Q", [cfg.params.Q])
    return _table(cfg, BENCHMARK_COLUMNS, benchmark_rows(cfg.params, cfg.dist, qs)), EXIT_OK


def cmd_stage2(cfg, args):
    p1, p2 = _prices(cfg, args)
    eq = equilibrium_general(cfg.params, cfg.dist, p1, p2, cfg.solver.eps0, diagnostics=True)
    return render_json({"p1": p1, "p2": p2, **eq.to_dict()}), EXIT_OK


def cmd_stage2_map(cfg, args):
    a, b, n = cfg.price_map["p1"]
    c, d, m = cfg.price_map["p2"]
    rows = []
    for p1 in np.linspace(a, b, int(n)):
        for p2 in np.linspace(c, d, int(m)):
            eq = equilibrium_general(cfg.params, cfg.dist, float(p1), float(p2), cfg.solver.eps0)
            rows.append({"p1": float(p1), "p2": float(p2), "regime": eq.regime.value,
                         "x1": eq.x1, "x2": eq.x2})
    return _table(cfg, MAP_COLUMNS, rows), EXIT_OK


def cmd_equilibrium(cfg, args):
    eq = nash_equilibrium(cfg.params, cfg.dist, cfg.solver)
    return render_json(eq.to_dict()), EXIT_OK


def cmd_sweep(cfg, args):
    rows = run_sweep(grid_cells(cfg.params, cfg.sweep), cfg.dist, cfg.solver, args.jobs)
    return _table(cfg, SWEEP_COLUMNS, rows), EXIT_OK


def cmd_payoffs(cfg, args):
    if args.p1 is None and args.p2 is None and not cfg.prices:
        eq = nash_equilibrium(cfg.params, cfg.dist, cfg.solver)
        p1, p2 = eq.p1_star, eq.p2_star
    else:
        p1, p2 = _prices(cfg, args)
    return _table(cfg, PAYOFF_COLUMNS, payoff_rows(cfg.params, cfg.dist, p1, p2)), EXIT_OK


def cmd_figures(cfg, args):
    if args.figure not in FIGURES and args.figure != "payoffs":
        raise cfgmod.ConfigError(
            f"unknown figure {args.figure!r}; choose from {sorted(FIGURES) + ['payoffs']}")
    columns, rows = figure_rows(args.figure, cfg.solver, args.jobs)
    return _table(cfg, columns, rows), EXIT_OK


def cmd_verify(cfg, args):
    results = run_verification(cfg.params, cfg.dist, cfg.seed, cfg.n_agents)
    passed = all(r.passed for r in results)
    summary = {"passed": passed, "n_checks": len(results),
               "n_failed": sum(not r.passed for r in results),
               "checks": [r.to_dict() for r in results]}
    if cfg.output_format == "json":
        text = render_json(summary)
    else:
        text = render_csv(("name", "passed", "residual", "tolerance", "detail"),
                          [r.to_dict() for r in results])
        if args.summary:
            Path(args.summary).write_text(render_json(summary))
    return text, EXIT_OK if passed else EXIT_VERIFY


COMMANDS = {
    "benchmark": (cmd_benchmark, "optimal pre-WiFi 5G price over the Q grid"),
    "stage2": (cmd_stage2, "user subscription equilibrium at given prices"),
    "stage2-map": (cmd_stage2_map, "subscription regime over a price grid"),
    "equilibrium": (cmd_equilibrium, "operator pricing equilibrium"),
    "sweep": (cmd_sweep, "pricing equilibria over a parameter grid"),
    "payoffs": (cmd_payoffs, "user payoffs before and after WiFi entry"),
    "figures": (cmd_figures, "data series behind a named figure"),
    "verify": (cmd_verify, "brute-force audit of the solvers"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry by dot path, e.g. params.Q=60")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--seed", type=int, help="random seed for the agent audit")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--out", help="write output here instead of stdout")

    parser = argparse.ArgumentParser(prog="crowdwifi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name in ("stage2", "payoffs"):
            p.add_argument("--p1", type=float)
            p.add_argument("--p2", type=float)
        if name == "figures":
            p.add_argument("figure", help="one of: " + ", ".join(sorted(FIGURES) + ["payoffs"]))
        if name == "verify":
            p.add_argument("--summary", help="also write the JSON summary to this path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name in ("p1", "p2", "summary", "figure"):
        if not hasattr(args, name):
            setattr(args, name, None)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.format:
        overrides.append(f"output.format={json.dumps(args.format)}")
    try:
        cfg = cfgmod.load(args.config, overrides)
        if args.jobs < 1:
            raise cfgmod.ConfigError("--jobs must be at least 1")
        handler = COMMANDS[args.command][0]
        text, status = handler(cfg, args)
    except (cfgmod.ConfigError, UnsupportedConfiguration, OSError) as exc:
        print(f"crowdwifi: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(text, args.out or cfg.output_path)
    return status


if __name__ == "__main__":
    sys.exit(main())
