"""Seeded random variates: exponential, two-phase Coxian, Poisson, renewal and 3-state MMPP.

All randomness is drawn as uniforms from per-purpose numpy streams and mapped
to variates by the transforms below. The simulator's compiled event loop uses
the same transforms, so the moment checks here cover it too.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

EXPONENTIAL = "exponential"
COXIAN2 = "coxian2"

POISSON = "poisson"
RENEWAL = "renewal"
MMPP3 = "mmpp3"

MIN_COXIAN_COV = math.sqrt(0.5)

PURPOSES = {"arrival": 0, "station": 1, "solver": 2, "scenario": 3, "init": 4}


def _exp_transform(rate, u):
    return -np.log1p(-u) / rate


def _coxian_transform(scale, q, u1, u2, u3):
    e1 = -np.log1p(-u1)
    e2 = -np.log1p(-u2)
    return scale * (e1 + (u3 < q) * e2 / q)


exp_transform = numba.njit(cache=True)(_exp_transform)
coxian_transform = numba.njit(cache=True)(_coxian_transform)


@dataclass(frozen=True)
class DistributionSpec:
    """A positive random variable: ``exponential(rate)`` or ``coxian2(mean, cov)``."""
    kind: str
    rate: float | None = None
    mean_value: float | None = None
    cov: float | None = None

    @classmethod
    def exponential(cls, rate: float) -> "DistributionSpec":
        return cls(EXPONENTIAL, rate=float(rate))

    @classmethod
    def coxian2(cls, mean: float, cov: float) -> "DistributionSpec":
        return cls(COXIAN2, mean_value=float(mean), cov=float(cov))

    def problems(self) -> list[str]:
        if self.kind == EXPONENTIAL:
            if self.rate is None or not self.rate > 0:
                return ["exponential rate must be positive"]
            return []
        if self.kind == COXIAN2:
            out = []
            if self.mean_value is None or not self.mean_value > 0:
                out.append("coxian2 mean must be positive")
            if self.cov is None or not self.cov >= MIN_COXIAN_COV - 1e-12:
                out.append(f"coxian2 cov must be at least sqrt(1/2), got {self.cov}")
            return out
        return [f"unknown distribution kind {self.kind!r}"]

    @property
    def mean(self) -> float:
        if self.kind == EXPONENTIAL:
            return 1.0 / self.rate
        return self.mean_value

    def encode(self) -> tuple[int, float, float]:
        """(kind code, a, b) as consumed by the event loop."""
        if self.problems():
            raise ValueError("; ".join(self.problems()))
        if self.kind == EXPONENTIAL:
            return 0, self.rate, 0.0
        return 1, self.mean_value / 2.0, coxian_q(self.cov)

    def sample(self, rng: "RngStream", size: int | None = None):
        kind, a, b = self.encode()
        n = 1 if size is None else size
        if kind == 0:
            x = _exp_transform(a, rng.uniforms(n))
        else:
            u = rng.uniforms(3 * n).reshape(n, 3)
            x = _coxian_transform(a, b, u[:, 0], u[:, 1], u[:, 2])
        return float(x[0]) if size is None else x


def coxian_q(cov: float) -> float:
    if cov < MIN_COXIAN_COV - 1e-12:
        raise ValueError(f"cov {cov} below sqrt(1/2): the two-phase Coxian cannot reach it")
    return min(1.0, 0.5 / cov**2)


def sample_coxian2(mean: float, cov: float, rng: "RngStream", size: int | None = None):
    """``(mean/2) * (E1 + B * E2 / q)`` with ``q = 1 / (2 cov^2)``, ``B ~ Bernoulli(q)``."""
    if not mean > 0:
        raise ValueError("mean must be positive")
    return DistributionSpec.coxian2(mean, cov).sample(rng, size)


@dataclass(frozen=True)
class ArrivalProcessSpec:
    kind: str
    rate: float | None = None
    interarrival: DistributionSpec | None = None
    state_rates: tuple[float, float, float] | None = None
    switch_rate: float | None = None
    class_mix: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.state_rates is not None:
            object.__setattr__(self, "state_rates", tuple(float(x) for x in self.state_rates))
        if self.class_mix is not None:
            object.__setattr__(self, "class_mix", tuple(float(x) for x in self.class_mix))

    @classmethod
    def poisson(cls, rate: float, class_mix=None) -> "ArrivalProcessSpec":
        return cls(POISSON, rate=float(rate), class_mix=class_mix)

    @classmethod
    def renewal(cls, interarrival: DistributionSpec, class_mix=None) -> "ArrivalProcessSpec":
        return cls(RENEWAL, interarrival=interarrival, class_mix=class_mix)

    @classmethod
    def mmpp3(cls, state_rates: Sequence[float], switch_rate: float, class_mix=None) -> "ArrivalProcessSpec":
        return cls(MMPP3, state_rates=tuple(state_rates), switch_rate=float(switch_rate),
                   class_mix=class_mix)

    def problems(self) -> list[str]:
        out = []
        if self.kind == POISSON:
            if self.rate is None or not self.rate > 0:
                out.append("poisson rate must be positive")
        elif self.kind == RENEWAL:
            if self.interarrival is None:
                out.append("renewal process needs an interarrival law")
            else:
                out.extend(self.interarrival.problems())
        elif self.kind == MMPP3:
            if self.state_rates is None or len(self.state_rates) != 3:
                out.append("mmpp3 needs exactly three state rates")
            elif any(not x > 0 for x in self.state_rates):
                out.append("mmpp3 state rates must be positive")
            if self.switch_rate is None or not self.switch_rate > 0:
                out.append("mmpp3 switch rate must be positive")
        else:
            out.append(f"unknown arrival process kind {self.kind!r}")
        if self.class_mix is not None:
            if any(x < 0 for x in self.class_mix) or abs(sum(self.class_mix) - 1.0) > 1e-9:
                out.append("class_mix must be a probability vector")
        return out

    @property
    def mean_rate(self) -> float:
        if self.kind == POISSON:
            return self.rate
        if self.kind == RENEWAL:
            return 1.0 / self.interarrival.mean
        # symmetric switching: the background chain is uniform over its states
        return sum(self.state_rates) / 3.0

    def mix_for(self, n_classes: int) -> tuple[float, ...]:
        if self.class_mix is None:
            if n_classes != 1:
                raise ValueError("a process feeding several classes needs class_mix")
            return (1.0,)
        return self.class_mix


class RngStream:
    """A reproducible uniform stream keyed by ``(seed, replication, purpose, index)``.

    Consecutive draws are the same however they are chunked, so replaying a
    stream id reproduces the sequence exactly.
    """

    def __init__(self, seed, replication: int = 0, purpose: str = "station", index: int = 0):
        entropy = list(seed) if isinstance(seed, (tuple, list)) else int(seed)
        self.stream_id = (int(replication), purpose, int(index))
        ss = np.random.SeedSequence(entropy, spawn_key=(int(replication), PURPOSES[purpose], int(index)))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def uniforms(self, n: int) -> np.ndarray:
        return self.generator.random(n)

    def uniform(self) -> float:
        return float(self.generator.random())


def initial_state(proc: ArrivalProcessSpec, rng: RngStream) -> int:
    """Background state at time 0: uniform over the three MMPP states, else 0."""
    if proc.kind == MMPP3:
        return min(int(rng.uniform() * 3), 2)
    return 0


def pick_class(cum_mix: np.ndarray, u: float) -> int:
    return int(min(np.searchsorted(cum_mix, u, side="right"), len(cum_mix) - 1))


def next_arrival(proc: ArrivalProcessSpec, state: int, rng: RngStream) -> tuple[float, int, int]:
    """Time to the next arrival, the class it belongs to (index into ``class_mix``) and the new state.

    MMPP arrivals race the background switch; each switch moves to one of the
    other two states with equal probability.
    """
    if proc.kind == POISSON:
        delta = float(_exp_transform(proc.rate, rng.uniform()))
    elif proc.kind == RENEWAL:
        delta = proc.interarrival.sample(rng)
    else:
        delta = 0.0
        while True:
            lam = proc.state_rates[state]
            total = lam + proc.switch_rate
            delta += float(_exp_transform(total, rng.uniform()))
            if rng.uniform() * total < lam:
                break
            state = (state + 1 + (rng.uniform() >= 0.5)) % 3
    cls = 0
    if proc.class_mix is not None and len(proc.class_mix) > 1:
        cls = pick_class(np.cumsum(proc.class_mix), rng.uniform())
    return delta, cls, state
