"""Two-station tandem: sweep the Weibull shape k and score final allocations exactly.

Writes k_sweep.csv / k_sweep_summary.csv plus the exact grid optimum.

    python scripts/tandem_k_sweep.py --ks 0.5 1 1.5 2 3 4 5 --out results/tandem_k
"""
import argparse
import json
from pathlib import Path

from blocknet.harness import build_scenario
from blocknet.harness.experiment import best_k, default_output_dir, emit_k_sweep, k_sweep
from blocknet.oracle import BENCHMARK_TANDEM, grid_search, tandem_objective


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--ks", type=float, nargs="+", default=[0.5, 1, 1.5, 2, 3, 4, 5])
    ap.add_argument("--algorithm", nargs="+", default=["coupled", "decoupled"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--starts", type=int, default=20)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--skip-grid", action="store_true", help="skip the exact [1,60]^2 grid search")
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args(argv)
    out = args.out or default_output_dir() / "tandem_k_sweep"

    sc = build_scenario("tandem", args.seed, n_starts=args.starts)
    sweep = k_sweep(sc, args.ks, args.algorithm, workers=args.workers,
                    evaluate=lambda c: tandem_objective(BENCHMARK_TANDEM, *c))
    for p in emit_k_sweep(sweep, out):
        print(p)
    summary = {a: best_k(sweep, a) for a in args.algorithm}
    if not args.skip_grid:
        g = grid_search(BENCHMARK_TANDEM, (1, 60))
        summary["exact_argmax"], summary["exact_value"] = list(g.argmax), g.value
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    print(json.dumps(summary))


if __name__ == "__main__":
    main()
