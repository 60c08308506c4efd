"""Run the optimisers on a built-in scenario and write traces plus plot data.

    python scripts/network_run.py crisscross --algorithm coupled decoupled sa
    python scripts/network_run.py ring --starts 10
    python scripts/network_run.py canonical --row 7 --rewards unordered
"""
import argparse
from pathlib import Path

from blocknet.harness import build_scenario, emit_plot_data, run_experiment, save_scenario
from blocknet.harness.experiment import default_output_dir


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("scenario", choices=["tandem", "crisscross", "ring", "canonical"])
    ap.add_argument("--algorithm", nargs="+", default=["coupled", "decoupled"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--starts", type=int)
    ap.add_argument("--row", type=int)
    ap.add_argument("--rewards")
    ap.add_argument("--k", type=float)
    ap.add_argument("--max-iters", type=int)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args(argv)

    options = {k: v for k, v in (("n_starts", args.starts), ("row", args.row), ("rewards", args.rewards))
               if v is not None}
    sc = build_scenario(args.scenario, args.seed, **options)
    overrides = {k: v for k, v in (("k", args.k), ("max_iters", args.max_iters)) if v is not None}
    tag = args.scenario if args.row is None else f"{args.scenario}_row{args.row}_{sc.options['rewards']}"
    out = args.out or default_output_dir() / tag
    res = run_experiment(sc, args.algorithm, workers=args.workers, out_dir=out, **overrides)
    res.save(out / "result.json")
    save_scenario(sc, out / "scenario.yaml")
    emit_plot_data(res, out / "plot_data")
    for a in args.algorithm:
        vals = res.final_objectives(a)
        if vals:
            print(f"{a:>9}: best {max(vals):.4f}  mean {sum(vals) / len(vals):.4f}  sim calls {res.sim_calls(a)}")
    for f in res.failures:
        print(f"FAILED {f['algorithm']} path {f['path_id']}: {f['error']}")
    print(f"results in {out} ({res.wall_seconds:.0f}s)")


if __name__ == "__main__":
    main()
