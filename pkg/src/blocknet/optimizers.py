"""Capacity allocation by iterated surrogate fitting, and a finite-difference SA baseline.

All three methods share one loop shape: estimate at the current allocation,
move, stop once the step ``g = ||c_prev - c_next||`` is at most ``stop_tol``
or ``max_iters`` iterations have run. Each loop finally rounds the allocation
and re-simulates the rounded allocation, so the reported value is honest.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .model import NetworkSpec, class_rewards, objective_value, round_capacity
from .simulator import BlockingEstimates, SimConfig, simulate_blocking
from .stochastics import RngStream
from .surrogate import (
    SurrogateParams,
    calibrate_coupled,
    calibrate_decoupled,
    decoupled_gamma,
    surrogate_gradient,
    surrogate_objective,
)

ALGORITHMS = ("coupled", "decoupled", "sa")

# probe ids in the per-call seed tuple (seed, iteration, probe)
PROBE_BASE = 0
PROBE_FINAL = 1
PROBE_GRADIENT = 100
PROBE_LINE = 10_000


def call_seed(seed, *parts) -> tuple[int, ...]:
    """Flat entropy tuple for one simulation call: the run seed extended by ``parts``."""
    base = tuple(int(x) for x in seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    return base + tuple(int(p) for p in parts)


@dataclass(frozen=True)
class OptimizerConfig:
    mode: str = "coupled"
    k: float = 2.0
    # None: sqrt(L), i.e. stop once the root-mean-square move per station is below one server
    stop_tol: float | None = None
    max_iters: int = 10
    c_max: float = 200.0
    # stochastic approximation: perturbation delta * n**-perturb_power,
    # initial step beta * n**-step_power, backtracking shrink/Armijo factors
    sa_delta: float = 5.0
    sa_beta: float = 150.0
    sa_shrink: float = 0.8
    sa_armijo: float = 0.5
    sa_max_trials: int = 20
    step_power: float = 1.0 / 3.0
    perturb_power: float = 1.0 / 6.0
    # inner surrogate solver
    inner_tol: float = 1e-6
    inner_max_iter: int = 500
    inner_random_starts: int = 3

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.mode not in ALGORITHMS:
            out.append(f"unknown algorithm {self.mode!r}")
        if not self.k > 0:
            out.append("shape k must be positive")
        if self.stop_tol is not None and not self.stop_tol > 0:
            out.append("stop_tol must be positive")
        if self.max_iters < 1:
            out.append("max_iters must be at least 1")
        if not self.c_max >= 1:
            out.append("c_max must be at least 1")
        if not (self.sa_delta > 0 and self.sa_beta > 0):
            out.append("sa_delta and sa_beta must be positive")
        if not (0 < self.sa_shrink < 1 and 0 < self.sa_armijo < 1):
            out.append("sa_shrink and sa_armijo must lie in (0, 1)")
        if self.sa_max_trials < 1:
            out.append("sa_max_trials must be at least 1")
        return out

    def tolerance(self, n_stations: int) -> float:
        return math.sqrt(n_stations) if self.stop_tol is None else float(self.stop_tol)

    @property
    def box(self) -> tuple[float, float]:
        return 1.0, float(self.c_max)


@dataclass
class IterationRecord:
    n: int
    c: np.ndarray          # allocation estimated in this iteration, c^(n-1)
    c_next: np.ndarray     # allocation it moved to, c^(n)
    tau: np.ndarray
    f_hat: float           # objective estimate at c
    g: float
    sim_calls: int
    cpu_seconds: float
    flags: tuple[str, ...] = ()


@dataclass
class OptimizationTrace:
    algorithm: str
    k: float
    c0: np.ndarray
    tolerance: float = math.nan
    records: list[IterationRecord] = field(default_factory=list)
    final_c: np.ndarray | None = None
    final_capacity: np.ndarray | None = None
    final_objective: float = math.nan
    final_objective_ci: float = math.nan
    final_sim_calls: int = 0
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def sim_calls(self) -> int:
        return sum(r.sim_calls for r in self.records) + self.final_sim_calls

    def first_converged_iteration(self, tol: float | None = None) -> int | None:
        """First iteration whose step norm is at most ``tol`` (default: the run's tolerance), or None."""
        tol = self.tolerance if tol is None else tol
        for r in self.records:
            if r.g <= tol:
                return r.n
        return None

    def fingerprint_view(self) -> dict:
        """Everything except timings; equal for reproducible runs."""
        d = self.to_dict()
        for r in d["records"]:
            r.pop("cpu_seconds")
        return d

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else [float(v) for v in np.asarray(x).ravel()]
        return {
            "algorithm": self.algorithm,
            "k": self.k,
            "tolerance": self.tolerance,
            "c0": arr(self.c0),
            "final_c": arr(self.final_c),
            "final_capacity": None if self.final_capacity is None else [int(v) for v in self.final_capacity],
            "final_objective": self.final_objective,
            "final_objective_ci": self.final_objective_ci,
            "converged": self.converged,
            "iterations": self.iterations,
            "sim_calls": self.sim_calls,
            "final_sim_calls": self.final_sim_calls,
            "records": [
                {"n": r.n, "c": arr(r.c), "c_next": arr(r.c_next), "tau": arr(r.tau),
                 "f_hat": r.f_hat, "g": r.g, "sim_calls": r.sim_calls,
                 "cpu_seconds": r.cpu_seconds, "flags": list(r.flags)}
                for r in self.records
            ],
        }

    def summary(self) -> dict:
        d = self.to_dict()
        d.pop("records")
        return d

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)

    def to_csv(self, path) -> None:
        L = len(self.c0)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", *[f"c_{l + 1}" for l in range(L)], "f_hat", "g", "sim_calls", "cpu_seconds"])
            for r in self.records:
                w.writerow([r.n, *[repr(float(x)) for x in r.c], repr(r.f_hat), repr(r.g),
                            r.sim_calls, f"{r.cpu_seconds:.6f}"])


# --------------------------------------------------------------------------
# inner solver for the coupled surrogate


@dataclass
class InnerResult:
    c: np.ndarray
    value: float
    projected_gradient_norm: float
    converged: bool
    improved: bool


def projected_gradient(grad, c, box) -> np.ndarray:
    """Ascent direction clipped by the box: zero exactly at a bounded stationary point."""
    lo, hi = box
    return np.clip(c + grad, lo, hi) - c


def inner_maximize(params: SurrogateParams, spec: NetworkSpec, box, start, rng: RngStream | None = None,
                   cfg: OptimizerConfig | None = None) -> InnerResult:
    """Maximise the coupled surrogate over the box with multi-start L-BFGS-B."""
    cfg = cfg or OptimizerConfig()
    lo, hi = box
    start = np.clip(np.asarray(start, dtype=float), lo, hi)
    L = len(start)
    starts = [start, np.full(L, 0.5 * (lo + hi))]
    if rng is not None and cfg.inner_random_starts:
        starts += list(lo + (hi - lo) * rng.uniforms(cfg.inner_random_starts * L).reshape(-1, L))

    def neg(c):
        return -surrogate_objective(params, spec, c), -surrogate_gradient(params, spec, c)

    start_value = surrogate_objective(params, spec, start)
    best_c, best_v = start, start_value
    for x0 in starts:
        res = minimize(neg, x0, jac=True, method="L-BFGS-B", bounds=[(lo, hi)] * L,
                       options={"maxiter": cfg.inner_max_iter, "ftol": 1e-15, "gtol": 1e-10})
        c = np.clip(res.x, lo, hi)
        v = surrogate_objective(params, spec, c)
        if v > best_v:
            best_c, best_v = c, v
    pg = float(np.linalg.norm(projected_gradient(surrogate_gradient(params, spec, best_c), best_c, box)))
    return InnerResult(best_c, best_v, pg, pg < cfg.inner_tol, best_v > start_value)


# --------------------------------------------------------------------------
# closed-form per-station update


def decoupled_update(c_prev, tau, gamma, theta, k: float, c_max: float = math.inf):
    """Per-station capacity maximising ``gamma * p_l(c) - theta * c`` under the frozen-slope surrogate.

    Returns ``(c_next, unprofitable)``; where the log argument is at most 1 the
    capacity is pinned at 1, and ``unprofitable`` marks the stations whose
    argument is not even positive.
    """
    c_prev, tau, gamma, theta = (np.asarray(x, dtype=float) for x in (c_prev, tau, gamma, theta))
    arg = gamma * k * c_prev ** (k - 1) * tau**k / theta
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(arg > 1, np.log(np.where(arg > 1, arg, math.e)) ** (1.0 / k) / tau, 1.0)
    return np.minimum(np.maximum(c, 1.0), c_max), arg <= 0


# --------------------------------------------------------------------------
# helpers shared by the loops


Simulator = Callable[..., BlockingEstimates]


def objective_interval(spec: NetworkSpec, c, est: BlockingEstimates) -> tuple[float, float]:
    """Objective at the averaged estimates and a 95% half-width across replications."""
    value = objective_value(spec, c, est)
    reps = est.rep_p_pair
    if reps.shape[0] < 2:
        return value, math.nan
    per_rep = reps.shape[0]
    vals = [-np.asarray(c, dtype=float) @ spec.theta + spec.arrival_rates @ class_rewards(spec, reps[j])
            for j in range(per_rep)]
    return value, float(1.96 * np.std(vals, ddof=1) / math.sqrt(per_rep))


def _check_start(c0, spec: NetworkSpec, cfg: OptimizerConfig) -> np.ndarray:
    c0 = np.asarray(c0, dtype=float)
    if c0.shape != (spec.n_stations,):
        raise ValueError(f"initial capacity must have length {spec.n_stations}")
    lo, hi = cfg.box
    if np.any(c0 < lo) or np.any(c0 > hi):
        raise ValueError(f"initial capacity must lie in [{lo}, {hi}]")
    return c0


def _finish(trace: OptimizationTrace, spec, c, sim_cfg, sim, seed, n_last: int, objective=None):
    trace.final_c = c.copy()
    trace.final_capacity = round_capacity(c)
    if objective is not None:
        trace.final_objective = float(objective(trace.final_capacity.astype(float), call_seed(seed, 0, PROBE_FINAL), n_last))
        trace.final_sim_calls = 1
        return trace
    est = sim(spec, trace.final_capacity.astype(float), sim_cfg, seed=call_seed(seed, 0, PROBE_FINAL), iteration=n_last)
    trace.final_objective, trace.final_objective_ci = objective_interval(spec, trace.final_capacity, est)
    trace.final_sim_calls = 1
    return trace


def _loop(spec, c0, cfg: OptimizerConfig, sim_cfg, sim, seed, step, objective=None) -> OptimizationTrace:
    c = _check_start(c0, spec, cfg)
    trace = OptimizationTrace(cfg.mode, cfg.k, c.copy(), tolerance=cfg.tolerance(len(c)))
    tol = trace.tolerance
    n = 0
    for n in range(1, cfg.max_iters + 1):
        t0 = time.process_time()
        c_next, tau, f_hat, calls, flags = step(n, c)
        g = float(np.linalg.norm(c - c_next))
        trace.records.append(IterationRecord(n, c.copy(), c_next.copy(), np.asarray(tau, dtype=float),
                                             float(f_hat), g, calls, time.process_time() - t0, tuple(flags)))
        c = c_next
        if g <= tol:
            trace.converged = True
            break
    return _finish(trace, spec, c, sim_cfg, sim, seed, n, objective)


# --------------------------------------------------------------------------
# the three algorithms


def run_coupled(spec: NetworkSpec, c0, cfg: OptimizerConfig, sim_cfg: SimConfig = SimConfig(),
                sim: Simulator = simulate_blocking, seed=0) -> OptimizationTrace:
    """Fit one Weibull form per (class, route position) and maximise the joint surrogate."""

    def step(n, c):
        est = sim(spec, c, sim_cfg, seed=call_seed(seed, n, PROBE_BASE), iteration=n)
        params = calibrate_coupled(est, c, spec, cfg.k)
        inner = inner_maximize(params, spec, cfg.box, c, RngStream(call_seed(seed, n), 0, "solver", 0), cfg)
        flags = [] if inner.converged else ["inner-not-converged"]
        return inner.c, params.tau, objective_value(spec, c, est), 1, flags

    cfg = _with_mode(cfg, "coupled")
    return _loop(spec, c0, cfg, sim_cfg, sim, seed, step)


def run_decoupled(spec: NetworkSpec, c0, cfg: OptimizerConfig, sim_cfg: SimConfig = SimConfig(),
                  sim: Simulator = simulate_blocking, seed=0) -> OptimizationTrace:
    """Fit one Weibull form per station and update every capacity in closed form."""

    def step(n, c):
        est = sim(spec, c, sim_cfg, seed=call_seed(seed, n, PROBE_BASE), iteration=n)
        params = calibrate_decoupled(est, c, spec, cfg.k)
        gamma = decoupled_gamma(params, spec)
        c_next, bad = decoupled_update(c, params.tau, gamma, spec.theta, cfg.k, cfg.c_max)
        flags = [f"unprofitable-station-{l + 1}" for l in np.flatnonzero(bad)]
        return c_next, params.tau, objective_value(spec, c, est), 1, flags

    cfg = _with_mode(cfg, "decoupled")
    return _loop(spec, c0, cfg, sim_cfg, sim, seed, step)


def run_sa(spec: NetworkSpec, c0, cfg: OptimizerConfig, sim_cfg: SimConfig = SimConfig(),
           sim: Simulator = simulate_blocking, seed=0,
           objective: Callable[[np.ndarray, tuple, int], float] | None = None) -> OptimizationTrace:
    """Projected central-difference gradient ascent with backtracking.

    ``objective(c, seed_tuple, iteration)`` replaces simulation when given.
    """
    cfg = _with_mode(cfg, "sa")
    lo, hi = cfg.box
    injected = objective
    if objective is None:
        def objective(c, s, n):
            return objective_value(spec, c, sim(spec, c, sim_cfg, seed=s, iteration=n))

    def step(n, c):
        calls = 0
        flags = []

        def f(x, probe):
            nonlocal calls
            calls += 1
            return float(objective(x, call_seed(seed, n, probe), n))

        f_prev = f(c, PROBE_BASE)
        d = cfg.sa_delta * n ** -cfg.perturb_power
        grad = np.zeros_like(c)
        for l in range(len(c)):
            up, down = c.copy(), c.copy()
            up[l] = min(c[l] + d, hi)
            down[l] = max(c[l] - d, lo)
            # near the box edge the probes are clamped; divide by the actual spread
            grad[l] = (f(up, PROBE_GRADIENT + 2 * l) - f(down, PROBE_GRADIENT + 2 * l + 1)) / (up[l] - down[l])
        if not np.any(grad):
            return c.copy(), np.array([]), f_prev, calls, ["zero-gradient"]
        alpha = cfg.sa_beta * n ** -cfg.step_power
        g2 = float(grad @ grad)
        for trial in range(1, cfg.sa_max_trials + 1):
            cand = np.clip(c + alpha * grad, lo, hi)
            F = f(cand, PROBE_LINE + trial)
            if F >= f_prev + cfg.sa_armijo * alpha * g2:
                break
            if trial == cfg.sa_max_trials:
                flags.append("line-search-exhausted")
                break
            alpha *= cfg.sa_shrink
        return cand, np.array([]), f_prev, calls, flags

    return _loop(spec, c0, cfg, sim_cfg, sim, seed, step, injected)


RUNNERS = {"coupled": run_coupled, "decoupled": run_decoupled, "sa": run_sa}


def optimize(spec: NetworkSpec, c0, cfg: OptimizerConfig, sim_cfg: SimConfig = SimConfig(),
             sim: Simulator = simulate_blocking, seed=0) -> OptimizationTrace:
    return RUNNERS[cfg.mode](spec, c0, cfg, sim_cfg, sim, seed)


def _with_mode(cfg: OptimizerConfig, mode: str) -> OptimizerConfig:
    if cfg.mode == mode:
        return cfg
    d = asdict(cfg)
    d["mode"] = mode
    return OptimizerConfig(**d)


# --------------------------------------------------------------------------
# step-size schedule diagnostics


def schedule_conditions(step_power: float, perturb_power: float) -> dict[str, bool]:
    """Series tests for steps ``n**-a`` and perturbations ``n**-d``.

    Convergence of the finite-difference scheme asks that the steps sum to
    infinity while ``sum(step * perturbation)`` and
    ``sum(step**2 / perturbation**2)`` stay finite. A p-series ``sum n**-s``
    is finite exactly when ``s > 1``.
    """
    a, d = step_power, perturb_power
    return {
        "steps_diverge": a <= 1,
        "bias_sum_finite": a + d > 1,
        "noise_sum_finite": 2 * a - 2 * d > 1,
    }


def schedule_partial_sums(step_power: float, perturb_power: float, n_terms: int = 10**6) -> dict[str, tuple[float, float]]:
    """Partial sums of the three series at ``n_terms // 10`` and ``n_terms`` terms.

    A finite series barely moves between the two; a divergent one keeps growing.
    """
    n = np.arange(1, n_terms + 1, dtype=float)
    a = n ** -step_power
    d = n ** -perturb_power
    out = {}
    for name, terms in (("steps", a), ("bias", a * d), ("noise", a**2 / d**2)):
        s = np.cumsum(terms)
        out[name] = (float(s[n_terms // 10 - 1]), float(s[-1]))
    return out
