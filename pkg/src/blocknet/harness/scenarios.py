"""Built-in experiment scenarios.

Fixed constants are hard-coded; quantities described only by a sampling range
are drawn once per seed from a dedicated scenario stream, so a (name, seed,
options) triple always regenerates the same network.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import ClassSpec, NetworkSpec, SharedSource, StationSpec
from ..optimizers import OptimizerConfig
from ..simulator import CISchedule, SimConfig
from ..stochastics import ArrivalProcessSpec, DistributionSpec, RngStream

SCENARIOS = ("tandem", "crisscross", "ring", "canonical", "custom")

# Coefficients of variation (S1, S2, S3, S4, A1, A2) for the canonical network,
# one row per scenario. Stations 5 and 6 always have CoV 1.5.
CANONICAL_COV_TABLE = (
    (2, 2, 4.5, 3, 0.75, 0.75),
    (2, 2, 4.5, 3, 3.25, 0.75),
    (2, 2, 3, 4.5, 0.75, 2),
    (3.75, 2, 3, 1.5, 0.75, 0.75),
    (3.75, 2, 4.5, 1.5, 2, 0.75),
    (3.75, 2, 1.5, 1.5, 3.25, 0.75),
    (3.75, 2, 3, 4.5, 2, 3.25),
    (5.5, 2, 1.5, 4.5, 2, 0.75),
    (5.5, 2, 1.5, 3, 3.25, 2),
    (5.5, 2, 1.5, 4.5, 0.75, 3.25),
    (2, 3.75, 1.5, 4.5, 0.75, 0.75),
    (2, 3.75, 4.5, 3, 0.75, 0.75),
    (2, 3.75, 3, 3, 2, 0.75),
    (2, 3.75, 3, 4.5, 3.25, 2),
    (2, 3.75, 1.5, 4.5, 3.25, 3.25),
    (3.75, 3.75, 4.5, 3, 0.75, 0.75),
    (3.75, 3.75, 3, 1.5, 3.25, 0.75),
    (3.75, 3.75, 4.5, 3, 2, 2),
    (3.75, 3.75, 1.5, 1.5, 0.75, 3.25),
    (3.75, 3.75, 1.5, 3, 3.25, 3.25),
    (3.75, 3.75, 3, 4.5, 3.25, 3.25),
    (5.5, 3.75, 1.5, 3, 3.25, 2),
    (5.5, 3.75, 3, 4.5, 3.25, 3.25),
    (2, 5.5, 4.5, 3, 3.25, 0.75),
    (2, 5.5, 4.5, 3, 0.75, 3.25),
    (3.75, 5.5, 4.5, 1.5, 3.25, 0.75),
    (5.5, 5.5, 3, 1.5, 0.75, 0.75),
    (5.5, 5.5, 1.5, 1.5, 2, 0.75),
    (5.5, 5.5, 4.5, 3, 2, 2),
)

CANONICAL_REWARDS = {
    "equal": (1.25, 1.25, 1.25, 1.25, 1.25, 1.25),
    "increasing": (0.8, 0.8, 1.1, 1.1, 1.5, 1.5),
    "unordered": (1.25, 1.1, 0.8, 1.5, 3.0, 1.1),
}

CANONICAL_SERVICE_MEANS = (0.1372, 0.5130, 0.1633, 0.2902, 0.6983, 0.2939)

# 1-based routes of the twelve canonical classes
CANONICAL_ROUTES = ((1,), (1, 3), (1, 3, 5), (1, 4), (1, 4, 5), (1, 4, 6),
                    (2,), (2, 4), (2, 4, 6), (2, 3), (2, 3, 6), (2, 3, 5))

RING_SWITCH_RATE = 0.977


@dataclass
class ScenarioSpec:
    name: str
    seed: int
    network: NetworkSpec
    sim: SimConfig
    optimizer: OptimizerConfig
    initial_capacities: list[np.ndarray]
    options: dict = field(default_factory=dict)
    # SA tuning for the scenario (overrides the optimizer's SA fields when running SA)
    sa: dict = field(default_factory=dict)

    def optimizer_for(self, algorithm: str, **overrides) -> OptimizerConfig:
        from dataclasses import asdict
        d = asdict(self.optimizer)
        d["mode"] = algorithm
        if algorithm == "sa":
            d.update(self.sa)
        d.update(overrides)
        return OptimizerConfig(**d)


def _uniform(rng: RngStream, lo: float, hi: float, size: int) -> np.ndarray:
    return lo + (hi - lo) * rng.uniforms(size)


def _open_uniform(rng: RngStream, lo: float, hi: float, size: int) -> np.ndarray:
    # draws from the open interval, so a zero lower end never yields zero
    u = rng.uniforms(size)
    return lo + (hi - lo) * np.where(u > 0, u, 0.5)


def _initial(rng: RngStream, count: int, L: int, lo: int, hi: int) -> list[np.ndarray]:
    u = rng.uniforms(count * L).reshape(count, L)
    return [np.floor(lo + (hi - lo + 1) * row).astype(float) for row in u]


def tandem_network(lam=16.0, mu=(0.8, 0.6), theta=(0.2, 0.3), omega=(1.0, 0.9)) -> NetworkSpec:
    stations = [StationSpec(theta[l], DistributionSpec.exponential(mu[l])) for l in range(2)]
    return NetworkSpec(stations, [ClassSpec((0, 1), omega, ArrivalProcessSpec.poisson(lam))])


def _tandem(seed: int, n_starts: int = 20, **_) -> ScenarioSpec:
    init = RngStream(seed, 0, "init", 0)
    return ScenarioSpec(
        "tandem", seed, tandem_network(),
        SimConfig(batch_length=10.0, ci_target=CISchedule(0.1), replications=5, zero_floor=1e-4),
        OptimizerConfig(k=2.0, max_iters=10),
        _initial(init, n_starts, 2, 1, 60),
    )


def _crisscross(seed: int, n_starts: int = 10, **_) -> ScenarioSpec:
    L = 10
    rng = RngStream(seed, 0, "scenario", 0)
    means = _open_uniform(rng, 0.0, 10.0 / 12.0, 2 * L).reshape(2, L)
    omega = _open_uniform(rng, 0.0, 2.0, 2 * L).reshape(2, L)
    theta = _uniform(rng, 0.1, 0.3, L)
    stations = [StationSpec(theta[l], DistributionSpec.exponential(1.0 / means[0, l]),
                            {1: DistributionSpec.exponential(1.0 / means[1, l])}) for l in range(L)]
    routes = (tuple(range(L)), tuple(reversed(range(L))))
    classes = [ClassSpec(routes[r], tuple(omega[r, l] for l in routes[r])) for r in range(2)]
    source = SharedSource(ArrivalProcessSpec.mmpp3((10.0, 20.0, 30.0), 1.0, class_mix=(0.5, 0.5)), (0, 1))
    init = RngStream(seed, 0, "init", 0)
    return ScenarioSpec(
        "crisscross", seed, NetworkSpec(stations, classes, (source,)),
        SimConfig(batch_length=10.0, ci_target=CISchedule(0.03, 0.5), replications=10, zero_floor=1e-10,
                  max_sim_time=1e4),
        OptimizerConfig(k=2.0, max_iters=10),
        _initial(init, n_starts, L, 1, 100),
        sa={"sa_delta": 5.0, "sa_beta": 150.0, "sa_shrink": 0.8, "sa_armijo": 0.5, "sa_max_trials": 20},
    )


def _ring(seed: int, n_starts: int = 10, **_) -> ScenarioSpec:
    L = 10
    rng = RngStream(seed, 0, "scenario", 0)
    third = _open_uniform(rng, 0.0, 4.0, L)
    theta = _open_uniform(rng, 0.0, 0.2, L)
    omega = _uniform(rng, 1.0, 2.0, L * L).reshape(L, L)  # per route, per station
    stations = [StationSpec(theta[l], DistributionSpec.exponential(1.0)) for l in range(L)]
    classes = []
    for i in range(L):
        route = tuple((i + j) % L for j in range(L))
        classes.append(ClassSpec(route, tuple(omega[i, l] for l in route),
                                 ArrivalProcessSpec.mmpp3((1.0, 2.0, third[i]), RING_SWITCH_RATE)))
    init = RngStream(seed, 0, "init", 0)
    starts = [np.ones(L)] + _initial(init, n_starts - 1, L, 1, 100)
    return ScenarioSpec(
        "ring", seed, NetworkSpec(stations, classes),
        SimConfig(batch_length=10.0, ci_target=CISchedule(0.04, 0.5), replications=50, zero_floor=1e-10,
                  max_sim_time=1e3),
        OptimizerConfig(k=2.0, max_iters=10),
        starts,
        sa={"sa_delta": 5.0, "sa_beta": 10.0, "sa_shrink": 0.5, "sa_armijo": 0.5, "sa_max_trials": 50},
    )


def canonical_network(row: int, rewards: str = "equal") -> NetworkSpec:
    if not 1 <= row <= len(CANONICAL_COV_TABLE):
        raise ValueError(f"canonical row must lie in 1..{len(CANONICAL_COV_TABLE)}, got {row}")
    if rewards not in CANONICAL_REWARDS:
        raise ValueError(f"unknown reward setting {rewards!r}; choose from {sorted(CANONICAL_REWARDS)}")
    s1, s2, s3, s4, a1, a2 = CANONICAL_COV_TABLE[row - 1]
    covs = (s1, s2, s3, s4, 1.5, 1.5)
    w = CANONICAL_REWARDS[rewards]
    stations = [StationSpec(1.0, DistributionSpec.coxian2(CANONICAL_SERVICE_MEANS[l], covs[l])) for l in range(6)]
    classes = []
    for r, route in enumerate(CANONICAL_ROUTES):
        lam, cov = (15.0, a1) if r < 6 else (7.5, a2)
        route0 = tuple(l - 1 for l in route)
        classes.append(ClassSpec(route0, tuple(w[l] for l in route0),
                                 ArrivalProcessSpec.renewal(DistributionSpec.coxian2(1.0 / lam, cov))))
    return NetworkSpec(stations, classes)


def _canonical(seed: int, row: int = 1, rewards: str = "equal", n_starts: int = 1, **_) -> ScenarioSpec:
    init = RngStream(seed, 0, "init", 0)
    return ScenarioSpec(
        "canonical", seed, canonical_network(row, rewards),
        SimConfig(batch_length=10.0, ci_target=CISchedule(0.03, 0.5), replications=10, zero_floor=1e-10,
                  max_sim_time=1e4),
        OptimizerConfig(k=2.0, max_iters=10),
        _initial(init, n_starts, 6, 1, 100),
        options={"row": row, "rewards": rewards},
    )


def build_scenario(name: str, seed: int = 0, **options) -> ScenarioSpec:
    """Materialise a named scenario. ``custom`` needs ``config=<path>``."""
    if name == "tandem":
        return _tandem(seed, **options)
    if name == "crisscross":
        return _crisscross(seed, **options)
    if name == "ring":
        return _ring(seed, **options)
    if name == "canonical":
        return _canonical(seed, **options)
    if name == "custom":
        from .config import load_scenario
        if "config" not in options:
            raise ValueError("custom scenario needs config=<path to YAML file>")
        return load_scenario(options["config"])
    raise ValueError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
