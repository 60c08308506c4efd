"""Run optimisers over a scenario's start set, persist results and emit plot data."""
from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from ..optimizers import ALGORITHMS, OptimizationTrace, optimize
from .config import scenario_to_dict
from .scenarios import ScenarioSpec

OUTPUT_ENV = "BLOCKNET_OUTPUT_DIR"


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "results"))


def fingerprint(scenario: ScenarioSpec) -> str:
    """sha256 of the scenario's canonical JSON form (sorted keys, shortest float reprs)."""
    blob = json.dumps(scenario_to_dict(scenario), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunResult:
    scenario: str
    fingerprint: str
    traces: dict[str, list[OptimizationTrace]] = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)
    wall_seconds: float = 0.0

    def final_objectives(self, algorithm: str) -> list[float]:
        return [t.final_objective for t in self.traces.get(algorithm, [])]

    def final_capacities(self, algorithm: str) -> list[np.ndarray]:
        return [t.final_capacity for t in self.traces.get(algorithm, [])]

    def sim_calls(self, algorithm: str) -> int:
        return sum(t.sim_calls for t in self.traces.get(algorithm, []))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "fingerprint": self.fingerprint,
            "wall_seconds": self.wall_seconds,
            "sim_calls": {a: self.sim_calls(a) for a in self.traces},
            "failures": self.failures,
            "traces": {a: [t.to_dict() for t in ts] for a, ts in self.traces.items()},
        }

    def save(self, path) -> None:
        _atomic_write(Path(path), json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "RunResult":
        with open(path) as fh:
            d = json.load(fh)
        traces = {a: [trace_from_dict(t) for t in ts] for a, ts in d["traces"].items()}
        return cls(d["scenario"], d["fingerprint"], traces, d.get("failures", []), d.get("wall_seconds", 0.0))


def trace_from_dict(d: dict) -> OptimizationTrace:
    from ..optimizers import IterationRecord

    def arr(x):
        return None if x is None else np.asarray(x, dtype=float)
    t = OptimizationTrace(d["algorithm"], d["k"], arr(d["c0"]), d.get("tolerance", float("nan")))
    t.records = [IterationRecord(r["n"], arr(r["c"]), arr(r["c_next"]), arr(r["tau"]), r["f_hat"], r["g"],
                                 r["sim_calls"], r["cpu_seconds"], tuple(r["flags"])) for r in d["records"]]
    t.final_c = arr(d["final_c"])
    t.final_capacity = None if d["final_capacity"] is None else np.asarray(d["final_capacity"], dtype=int)
    t.final_objective = d["final_objective"]
    t.final_objective_ci = d["final_objective_ci"]
    t.final_sim_calls = d["final_sim_calls"]
    t.converged = d["converged"]
    return t


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _one_run(args):
    scenario, algorithm, path_id, overrides = args
    cfg = scenario.optimizer_for(algorithm, **overrides)
    c0 = scenario.initial_capacities[path_id]
    try:
        return algorithm, path_id, optimize(scenario.network, c0, cfg, scenario.sim, seed=(scenario.seed, path_id)), None
    except Exception as exc:  # recorded, not fatal
        return algorithm, path_id, None, {"algorithm": algorithm, "path_id": path_id, "error": repr(exc),
                                          "traceback": traceback.format_exc()}


def run_experiment(scenario: ScenarioSpec, algorithms: Iterable[str] = ("coupled", "decoupled"),
                   workers: int = 1, out_dir=None, **overrides) -> RunResult:
    """Run every requested algorithm from every initial allocation of the scenario.

    ``overrides`` are applied to each algorithm's OptimizerConfig (e.g. ``k=1.5``).
    With ``out_dir`` each trace is also written as CSV and JSON.
    """
    algorithms = list(algorithms)
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}")
    jobs = [(scenario, a, i, overrides) for a in algorithms for i in range(len(scenario.initial_capacities))]
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_one_run, jobs))
    else:
        outcomes = [_one_run(j) for j in jobs]
    result = RunResult(scenario.name, fingerprint(scenario), {a: [] for a in algorithms})
    for algorithm, path_id, trace, failure in outcomes:
        if failure is not None:
            result.failures.append(failure)
            continue
        result.traces[algorithm].append(trace)
        if out_dir is not None:
            stem = Path(out_dir) / f"{scenario.name}_{algorithm}_{path_id:03d}"
            stem.parent.mkdir(parents=True, exist_ok=True)
            trace.to_csv(f"{stem}.csv")
            trace.to_json(f"{stem}.json")
    result.wall_seconds = time.perf_counter() - t0
    return result


# --------------------------------------------------------------------------
# plot data

PLOT_KINDS = ("objective", "envelope", "sim_calls", "capacities")


def _write_csv(path: Path, header: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _padded_paths(traces: list[OptimizationTrace]) -> np.ndarray:
    """f_hat per (path, iteration), carrying each path's last value forward."""
    n = max(len(t.records) for t in traces)
    out = np.empty((len(traces), n))
    for i, t in enumerate(traces):
        vals = [r.f_hat for r in t.records]
        out[i] = vals + [vals[-1]] * (n - len(vals))
    return out


def emit_plot_data(result: RunResult, out_dir, kinds: Iterable[str] = PLOT_KINDS) -> list[Path]:
    """Write plot-ready CSVs; each starts with a one-line header naming its columns.

    * ``objective_vs_iteration.csv``: algorithm, path_id, iter, f_hat
    * ``objective_envelope.csv``: algorithm, iter, min, mean, max (finished paths hold their last value)
    * ``cumulative_sim_calls.csv``: algorithm, path_id, iter, cumulative_sim_calls, cumulative_cpu_seconds
    * ``final_capacities.csv``: algorithm, path_id, station, capacity, final_objective
    """
    out_dir = Path(out_dir)
    written = []
    kinds = set(kinds)
    unknown = kinds - set(PLOT_KINDS)
    if unknown:
        raise ValueError(f"unknown plot kinds {sorted(unknown)}")
    items = [(a, ts) for a, ts in result.traces.items() if ts]
    if "objective" in kinds:
        rows = [(a, p, r.n, repr(r.f_hat)) for a, ts in items for p, t in enumerate(ts) for r in t.records]
        written.append(_write_csv(out_dir / "objective_vs_iteration.csv", ["algorithm", "path_id", "iter", "f_hat"], rows))
    if "envelope" in kinds:
        rows = []
        for a, ts in items:
            m = _padded_paths(ts)
            for j in range(m.shape[1]):
                col = m[:, j]
                rows.append((a, j + 1, repr(float(col.min())), repr(float(col.mean())), repr(float(col.max()))))
        written.append(_write_csv(out_dir / "objective_envelope.csv", ["algorithm", "iter", "min", "mean", "max"], rows))
    if "sim_calls" in kinds:
        rows = []
        for a, ts in items:
            for p, t in enumerate(ts):
                calls = np.cumsum([r.sim_calls for r in t.records])
                cpu = np.cumsum([r.cpu_seconds for r in t.records])
                rows += [(a, p, r.n, int(k), f"{s:.6f}") for r, k, s in zip(t.records, calls, cpu)]
        written.append(_write_csv(out_dir / "cumulative_sim_calls.csv",
                                  ["algorithm", "path_id", "iter", "cumulative_sim_calls", "cumulative_cpu_seconds"], rows))
    if "capacities" in kinds:
        rows = [(a, p, l + 1, int(cap), repr(float(t.final_objective)))
                for a, ts in items for p, t in enumerate(ts) for l, cap in enumerate(t.final_capacity)]
        written.append(_write_csv(out_dir / "final_capacities.csv",
                                  ["algorithm", "path_id", "station", "capacity", "final_objective"], rows))
    return written


def k_sweep(scenario: ScenarioSpec, ks: Iterable[float], algorithms=("coupled", "decoupled"),
            evaluate: Callable[[np.ndarray], float] | None = None, workers: int = 1) -> dict[float, RunResult]:
    """Run the scenario once per shape ``k``; ``evaluate`` (e.g. an exact oracle) rescores final capacities."""
    out = {}
    for k in ks:
        res = run_experiment(scenario, algorithms, workers=workers, k=float(k))
        if evaluate is not None:
            for ts in res.traces.values():
                for t in ts:
                    t.final_objective = float(evaluate(t.final_capacity))
        out[float(k)] = res
    return out


def emit_k_sweep(sweep: dict[float, RunResult], out_dir) -> list[Path]:
    """``k_sweep.csv`` (algorithm, k, path_id, final_objective) and ``k_sweep_summary.csv`` (algorithm, k, min, mean, max)."""
    out_dir = Path(out_dir)
    rows, summary = [], []
    for k, res in sorted(sweep.items()):
        for a, ts in res.traces.items():
            vals = [t.final_objective for t in ts]
            rows += [(a, k, p, repr(float(v))) for p, v in enumerate(vals)]
            if vals:
                summary.append((a, k, repr(float(min(vals))), repr(float(np.mean(vals))), repr(float(max(vals)))))
    return [_write_csv(out_dir / "k_sweep.csv", ["algorithm", "k", "path_id", "final_objective"], rows),
            _write_csv(out_dir / "k_sweep_summary.csv", ["algorithm", "k", "min", "mean", "max"], summary)]


def best_k(sweep: dict[float, RunResult], algorithm: str) -> float:
    means = {k: np.mean(res.final_objectives(algorithm)) for k, res in sweep.items()}
    return max(means, key=means.get)
