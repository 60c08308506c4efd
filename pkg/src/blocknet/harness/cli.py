"""Command-line entry point: ``blocknet {simulate,optimize,exact,scenario,plot-data}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..model import objective_value
from ..oracle import BENCHMARK_TANDEM, TandemSpec, grid_search, tandem_exact
from ..optimizers import ALGORITHMS, objective_interval
from ..simulator import simulate_blocking
from .config import dump_scenario, load_scenario, save_scenario
from .experiment import RunResult, default_output_dir, emit_plot_data, run_experiment, PLOT_KINDS
from .scenarios import SCENARIOS, build_scenario

log = logging.getLogger("blocknet")


def _scenario(args):
    if args.config:
        return load_scenario(args.config)
    options = {}
    if args.row is not None:
        options["row"] = args.row
    if args.rewards is not None:
        options["rewards"] = args.rewards
    if getattr(args, "starts", None) is not None:
        options["n_starts"] = args.starts
    return build_scenario(args.scenario, args.seed, **options)


def _capacity(text: str, L: int) -> np.ndarray:
    c = np.array([float(x) for x in text.split(",")])
    if len(c) == 1:
        c = np.full(L, c[0])
    if len(c) != L:
        raise SystemExit(f"capacity needs {L} values, got {len(c)}")
    return c


def _add_scenario_args(p):
    p.add_argument("--scenario", default="tandem", choices=[s for s in SCENARIOS if s != "custom"])
    p.add_argument("--config", help="YAML scenario file (overrides --scenario)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--row", type=int, help="canonical scenario row")
    p.add_argument("--rewards", help="canonical reward setting: equal, increasing or unordered")


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    c = _capacity(args.capacity, sc.network.n_stations)
    est = simulate_blocking(sc.network, c, sc.sim, seed=args.seed, iteration=args.iteration)
    value, half = objective_interval(sc.network, c, est)
    print(f"{'class':>5} {'pos':>4} {'station':>7} {'p_hat':>10} {'ci':>9} {'arrivals':>9}")
    for k, (r, i) in enumerate(sc.network.pairs):
        print(f"{r + 1:>5} {i + 1:>4} {sc.network.classes[r].route[i] + 1:>7} "
              f"{est.p_pair[k]:>10.5f} {est.ci_pair[k]:>9.5f} {int(est.arrivals_pair[k]):>9}")
    print(f"objective {value:.4f} +/- {half:.4f}  (sim time {est.sim_time:.0f}, converged {est.converged})")
    if args.out:
        est.to_csv(args.out)
    return 0


def cmd_optimize(args) -> int:
    sc = _scenario(args)
    overrides = {}
    if args.k is not None:
        overrides["k"] = args.k
    if args.max_iters is not None:
        overrides["max_iters"] = args.max_iters
    if args.stop_tol is not None:
        overrides["stop_tol"] = args.stop_tol
    out = Path(args.out) if args.out else default_output_dir() / sc.name
    res = run_experiment(sc, args.algorithm, workers=args.workers, out_dir=out, **overrides)
    res.save(out / "result.json")
    save_scenario(sc, out / "scenario.yaml")
    for a, ts in res.traces.items():
        for p, t in enumerate(ts):
            print(f"{a:>9} path {p:>2}: {t.iterations:>2} iterations, capacity {list(map(int, t.final_capacity))}, "
                  f"objective {t.final_objective:.4f}, sim calls {t.sim_calls}")
    for f in res.failures:
        print(f"FAILED {f['algorithm']} path {f['path_id']}: {f['error']}", file=sys.stderr)
    print(f"results in {out}")
    return 0 if not res.failures else 1


def cmd_exact(args) -> int:
    spec = TandemSpec(args.lam, args.mu1, args.mu2, args.theta1, args.theta2, args.omega1, args.omega2) \
        if args.custom else BENCHMARK_TANDEM
    if args.grid:
        g = grid_search(spec, (1, args.grid))
        print(json.dumps({"argmax": list(g.argmax), "value": g.value}))
        if args.out:
            np.savetxt(args.out, g.table, delimiter=",", header=f"f(c1, c2) for c1, c2 in 1..{args.grid}")
        return 0
    sol = tandem_exact(spec.at(args.c1, args.c2))
    print(json.dumps({"c": [args.c1, args.c2], "objective": sol.objective, "p11": sol.p11, "p12": sol.p12,
                      "kappa1": sol.kappa1, "kappa2": sol.kappa2, "residual": sol.residual}))
    return 0


def cmd_scenario(args) -> int:
    if args.action == "list":
        for s in SCENARIOS:
            print(s)
        return 0
    sc = _scenario(args)
    text = dump_scenario(sc)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return 0


def cmd_plot_data(args) -> int:
    res = RunResult.load(args.result)
    out = Path(args.out) if args.out else Path(args.result).parent / "plot_data"
    for p in emit_plot_data(res, out, args.kinds or PLOT_KINDS):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blocknet", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="estimate blocking at a capacity vector")
    _add_scenario_args(p)
    p.add_argument("--capacity", required=True, help="comma-separated capacities, or one value for all stations")
    p.add_argument("--iteration", type=int, default=1, help="iteration index for the CI-width schedule")
    p.add_argument("--out", help="write per-replication counters to this CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="run optimisers from the scenario's initial allocations")
    _add_scenario_args(p)
    p.add_argument("--algorithm", nargs="+", default=["coupled", "decoupled"], choices=ALGORITHMS)
    p.add_argument("--k", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--stop-tol", type=float)
    p.add_argument("--starts", type=int, help="number of initial allocations")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output directory (default: $BLOCKNET_OUTPUT_DIR/<scenario>)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("exact", help="exact tandem objective or grid search")
    p.add_argument("--c1", type=float, default=20)
    p.add_argument("--c2", type=float, default=24)
    p.add_argument("--grid", type=int, metavar="CMAX", help="search all integer pairs in [1, CMAX]^2")
    p.add_argument("--out", help="with --grid, write the objective table as CSV")
    p.add_argument("--custom", action="store_true", help="use the parameters below instead of the built-in tandem")
    for name, default in (("lam", 16.0), ("mu1", 0.8), ("mu2", 0.6), ("theta1", 0.2), ("theta2", 0.3),
                          ("omega1", 1.0), ("omega2", 0.9)):
        p.add_argument(f"--{name}", type=float, default=default)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("scenario", help="list built-in scenarios or write one as YAML")
    p.add_argument("action", choices=["list", "show"])
    _add_scenario_args(p)
    p.add_argument("--starts", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("plot-data", help="turn a result.json into plot-ready CSVs")
    p.add_argument("result")
    p.add_argument("--out")
    p.add_argument("--kinds", nargs="+", choices=PLOT_KINDS)
    p.set_defaults(func=cmd_plot_data)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
