"""Stochastic networks with blocking: stations, classes, routes and the reward objective.

Indices are 0-based in code. Config files and user-facing messages use
1-based station numbers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .stochastics import ArrivalProcessSpec, DistributionSpec


@dataclass(frozen=True)
class StationSpec:
    capacity_cost: float
    service: DistributionSpec
    # per-class overrides of the service law, keyed by 0-based class index
    service_by_class: Mapping[int, DistributionSpec] = field(default_factory=dict)

    def service_for(self, r: int) -> DistributionSpec:
        return self.service_by_class.get(r, self.service)


@dataclass(frozen=True)
class ClassSpec:
    route: tuple[int, ...]
    rewards: tuple[float, ...]
    # None when the class is fed by a shared source (see NetworkSpec.shared_sources)
    arrival: ArrivalProcessSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "route", tuple(int(l) for l in self.route))
        object.__setattr__(self, "rewards", tuple(float(w) for w in self.rewards))


@dataclass(frozen=True)
class SharedSource:
    """One arrival process whose arrivals are split over several classes.

    ``process.class_mix`` gives the split, aligned with ``classes``.
    """
    process: ArrivalProcessSpec
    classes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(int(r) for r in self.classes))


@dataclass(frozen=True)
class NetworkSpec:
    stations: tuple[StationSpec, ...]
    classes: tuple[ClassSpec, ...]
    shared_sources: tuple[SharedSource, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "shared_sources", tuple(self.shared_sources))

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @cached_property
    def theta(self) -> np.ndarray:
        return np.array([s.capacity_cost for s in self.stations], dtype=float)

    @cached_property
    def arrival_rates(self) -> np.ndarray:
        """Long-run exogenous arrival rate of each class."""
        lam = np.zeros(self.n_classes)
        for r, cls in enumerate(self.classes):
            if cls.arrival is not None:
                lam[r] = cls.arrival.mean_rate
        for src in self.shared_sources:
            mix = src.process.mix_for(len(src.classes))
            for r, share in zip(src.classes, mix):
                lam[r] += src.process.mean_rate * share
        return lam

    def sources(self) -> list[SharedSource]:
        """Every arrival source, with single-class processes wrapped as sources."""
        out = [SharedSource(cls.arrival, (r,)) for r, cls in enumerate(self.classes)
               if cls.arrival is not None]
        return out + list(self.shared_sources)

    @cached_property
    def pairs(self) -> list[tuple[int, int]]:
        """Flat ordering of (class, route position) pairs."""
        return [(r, i) for r, cls in enumerate(self.classes) for i in range(len(cls.route))]

    @cached_property
    def pair_offsets(self) -> np.ndarray:
        lengths = [len(c.route) for c in self.classes]
        return np.concatenate([[0], np.cumsum(lengths)]).astype(int)

    @cached_property
    def pair_station(self) -> np.ndarray:
        return np.array([self.classes[r].route[i] for r, i in self.pairs], dtype=int)

    def split_pairs(self, flat: Sequence[float]) -> list[np.ndarray]:
        flat = np.asarray(flat, dtype=float)
        o = self.pair_offsets
        return [flat[o[r]:o[r + 1]] for r in range(self.n_classes)]


def validate(spec: NetworkSpec) -> list[str]:
    """Return every violated model invariant (empty list means valid)."""
    problems = []
    L = spec.n_stations
    if L < 1:
        problems.append("network needs at least one station")
    if spec.n_classes < 1:
        problems.append("network needs at least one class")
    for l, st in enumerate(spec.stations):
        if not st.capacity_cost > 0:
            problems.append(f"station {l + 1}: capacity cost must be positive")
        for d in [st.service, *st.service_by_class.values()]:
            problems.extend(f"station {l + 1}: {p}" for p in d.problems())
    fed = np.zeros(spec.n_classes, dtype=int)
    for r, cls in enumerate(spec.classes):
        tag = f"class {r + 1}"
        if len(cls.route) == 0:
            problems.append(f"{tag}: route is empty")
        if len(set(cls.route)) != len(cls.route):
            problems.append(f"{tag}: station repeated in route")
        for l in cls.route:
            if not 0 <= l < L:
                problems.append(f"{tag}: route references unknown station {l + 1}")
        if len(cls.rewards) != len(cls.route):
            problems.append(f"{tag}: {len(cls.rewards)} rewards for a route of length {len(cls.route)}")
        if any(not w > 0 for w in cls.rewards):
            problems.append(f"{tag}: rewards must be positive")
        if cls.arrival is not None:
            fed[r] += 1
            problems.extend(f"{tag}: {p}" for p in cls.arrival.problems())
    for k, src in enumerate(spec.shared_sources):
        problems.extend(f"shared source {k + 1}: {p}" for p in src.process.problems())
        mix = src.process.class_mix
        if mix is None or len(mix) != len(src.classes):
            problems.append(f"shared source {k + 1}: class_mix must list one share per class")
        for r in src.classes:
            if not 0 <= r < spec.n_classes:
                problems.append(f"shared source {k + 1}: unknown class {r + 1}")
            else:
                fed[r] += 1
    for r in np.flatnonzero(fed != 1):
        problems.append(f"class {r + 1}: must have exactly one arrival source, has {fed[r]}")
    lam = spec.arrival_rates if not problems else None
    if lam is not None and np.any(lam <= 0):
        problems.append("arrival rates must be positive")
    return problems


def round_capacity(c) -> np.ndarray:
    """Round half up to the nearest integer, never below 1."""
    return np.maximum(np.floor(np.asarray(c, dtype=float) + 0.5), 1.0).astype(int)


def _pair_blocking(spec: NetworkSpec, p) -> np.ndarray:
    flat = getattr(p, "p_pair", None)
    if flat is None:
        if len(p) != spec.n_classes:
            raise ValueError(f"expected blocking values for {spec.n_classes} classes, got {len(p)}")
        for r, (row, cls) in enumerate(zip(p, spec.classes)):
            if len(row) != len(cls.route):
                raise ValueError(f"class {r + 1}: expected {len(cls.route)} blocking values, got {len(row)}")
        flat = np.concatenate([np.asarray(row, dtype=float) for row in p])
    flat = np.asarray(flat, dtype=float)
    if flat.shape != (len(spec.pairs),):
        raise ValueError("blocking vector does not match the network's (class, position) pairs")
    return flat


def class_rewards(spec: NetworkSpec, p_pair: np.ndarray) -> np.ndarray:
    """Expected reward per class-r arrival, given blocking at each route position."""
    out = np.empty(spec.n_classes)
    for r, (cls, pr) in enumerate(zip(spec.classes, spec.split_pairs(p_pair))):
        out[r] = np.dot(cls.rewards, np.cumprod(1.0 - pr))
    return out


def objective_value(spec: NetworkSpec, c, p) -> float:
    """Net reward rate: reward collected along surviving route prefixes minus capacity cost.

    ``p`` is either a ``BlockingEstimates`` or a per-class list of blocking
    probabilities aligned with each route.
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (spec.n_stations,):
        raise ValueError(f"capacity vector must have length {spec.n_stations}")
    flat = _pair_blocking(spec, p)
    return float(-c @ spec.theta + spec.arrival_rates @ class_rewards(spec, flat))
