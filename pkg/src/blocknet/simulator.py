"""Discrete-event estimation of blocking probabilities under a (possibly fractional) capacity vector.

Each replication starts empty and runs in batches of ``batch_length`` time
units. After every batch the score-interval width of every blocking
proportion with at least one arrival is compared against the target width.
The run stops when all fall below it, or at ``max_sim_time``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _engine
from .model import NetworkSpec, validate
from .stochastics import MMPP3, POISSON, RENEWAL, RngStream, initial_state

Z = 1.96
BUFFER_WIDTH = 4096


@dataclass(frozen=True)
class CISchedule:
    """Target interval width ``scale * n ** -power`` at optimiser iteration ``n``."""
    scale: float
    power: float = 0.0

    def __call__(self, n: int) -> float:
        return self.scale * float(n) ** -self.power


@dataclass(frozen=True)
class SimConfig:
    batch_length: float = 10.0
    ci_target: CISchedule = CISchedule(0.1)
    replications: int = 5
    zero_floor: float = 1e-4
    max_sim_time: float = 1e5
    admission: str = "fractional"  # or "integer" (plain loss rule on round(c))

    def __post_init__(self):
        if isinstance(self.ci_target, (int, float)):
            object.__setattr__(self, "ci_target", CISchedule(float(self.ci_target)))
        if not self.batch_length > 0:
            raise ValueError("batch_length must be positive")
        if not 0 < self.ci_target(1) < 1:
            raise ValueError("target CI width must lie in (0, 1)")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if not 0 < self.zero_floor < self.ci_target(1):
            raise ValueError("zero_floor must lie in (0, target CI width)")
        if not self.max_sim_time >= self.batch_length:
            raise ValueError("max_sim_time must cover at least one batch")
        if self.admission not in ("fractional", "integer"):
            raise ValueError(f"unknown admission rule {self.admission!r}")


def ci_width(p_hat, arrivals):
    """Width of the 95% score (Wilson) interval for a Bernoulli proportion.

    This is the full interval width; with no arrivals it is infinite.
    """
    p_hat = np.asarray(p_hat, dtype=float)
    a = np.asarray(arrivals, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = Z * np.sqrt(Z**2 - 4.0 * a * (p_hat - 1.0) * p_hat) / (Z**2 + a)
    w = np.where(a > 0, w, np.inf)
    return float(w) if w.ndim == 0 else w


def admit_decision(occupancy: int, capacity: float, rng: RngStream) -> bool:
    """Admission under fractional capacity.

    Below ``floor(c)`` busy servers an arrival is accepted. At exactly
    ``floor(c)`` it is accepted with probability ``c - floor(c)``. Above that
    it is blocked.
    """
    if occupancy < 0:
        raise ValueError("occupancy must be non-negative")
    fl = math.floor(capacity)
    if occupancy < fl:
        return True
    if occupancy == fl:
        frac = capacity - fl
        return frac > 0 and rng.uniform() < frac
    return False


@dataclass
class BlockingEstimates:
    """Replication-averaged blocking estimates.

    ``p_pair`` is flat over the network's (class, route position) pairs (see
    ``NetworkSpec.pairs``); ``p_station`` aggregates all classes at a station.
    ``ci_*`` is the score-interval width at the estimate, using the mean
    arrival count per replication (the scale the stopping rule works at).
    """
    p_pair: np.ndarray
    arrivals_pair: np.ndarray
    blocked_pair: np.ndarray
    ci_pair: np.ndarray
    p_station: np.ndarray
    arrivals_station: np.ndarray
    blocked_station: np.ndarray
    ci_station: np.ndarray
    mean_occupancy: np.ndarray
    sim_time: float
    replications: int
    converged: bool
    zero_floor: float
    rep_arrivals_pair: np.ndarray = field(repr=False)
    rep_blocked_pair: np.ndarray = field(repr=False)
    rep_p_pair: np.ndarray = field(repr=False)
    rep_ci_pair: np.ndarray = field(repr=False)
    pairs: list = field(repr=False, default_factory=list)

    def p(self, r: int, i: int) -> float:
        return float(self.p_pair[self.pairs.index((r, i))])

    def interval(self, r: int, i: int) -> tuple[float, float]:
        k = self.pairs.index((r, i))
        half = self.ci_pair[k] / 2
        return float(self.p_pair[k] - half), float(self.p_pair[k] + half)

    def to_csv(self, path) -> None:
        """Per-replication counters, one row per (replication, class, position); 1-based r and i."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replication", "r", "i", "arrivals", "blocked", "p_hat", "ci"])
            for rep in range(self.replications):
                for k, (r, i) in enumerate(self.pairs):
                    w.writerow([rep, r + 1, i + 1, int(self.rep_arrivals_pair[rep, k]),
                                int(self.rep_blocked_pair[rep, k]),
                                repr(float(self.rep_p_pair[rep, k])), repr(float(self.rep_ci_pair[rep, k]))])


class _Encoded:
    """Array encoding of a network for the event loop."""

    def __init__(self, spec: NetworkSpec):
        R = spec.n_classes
        max_n = max(len(c.route) for c in spec.classes)
        self.route = np.zeros((R, max_n), dtype=np.int64)
        self.route_len = np.array([len(c.route) for c in spec.classes], dtype=np.int64)
        for r, c in enumerate(spec.classes):
            self.route[r, :len(c.route)] = c.route
        self.pair_off = spec.pair_offsets[:-1].astype(np.int64)
        self.svc = np.zeros((len(spec.pairs), 3))
        for k, (r, i) in enumerate(spec.pairs):
            self.svc[k] = spec.stations[spec.classes[r].route[i]].service_for(r).encode()
        sources = spec.sources()
        S = len(sources)
        self.sources = sources
        self.src_kind = np.zeros(S, dtype=np.int64)
        self.src_par = np.zeros((S, 8))
        max_c = max(len(s.classes) for s in sources)
        self.src_cls = np.zeros((S, max_c), dtype=np.int64)
        self.src_cum = np.ones((S, max_c))
        self.src_ncls = np.zeros(S, dtype=np.int64)
        # stream index per source: own-class sources use the class index
        self.src_stream_index = np.zeros(S, dtype=np.int64)
        n_shared = 0
        for s, src in enumerate(sources):
            proc = src.process
            if proc.kind == POISSON:
                self.src_kind[s] = _engine.SRC_POISSON
                self.src_par[s, 0] = proc.rate
            elif proc.kind == RENEWAL:
                kind, a, b = proc.interarrival.encode()
                self.src_kind[s] = _engine.SRC_RENEWAL
                self.src_par[s, 0:3] = a, b, kind
            elif proc.kind == MMPP3:
                self.src_kind[s] = _engine.SRC_MMPP
                self.src_par[s, 3:6] = proc.state_rates
                self.src_par[s, 6] = proc.switch_rate
                self.src_par[s, 7] = max(proc.state_rates)
            n = len(src.classes)
            self.src_ncls[s] = n
            self.src_cls[s, :n] = src.classes
            self.src_cum[s, :n] = np.cumsum(proc.mix_for(n))
            if n == 1 and spec.classes[src.classes[0]].arrival is src.process:
                self.src_stream_index[s] = src.classes[0]
            else:
                self.src_stream_index[s] = R + n_shared
                n_shared += 1
        self.n_pairs = len(spec.pairs)
        self.L = spec.n_stations


_ENCODE_CACHE: dict[int, tuple[NetworkSpec, _Encoded]] = {}


def _encode(spec: NetworkSpec) -> _Encoded:
    hit = _ENCODE_CACHE.get(id(spec))
    if hit is not None and hit[0] is spec:
        return hit[1]
    enc = _Encoded(spec)
    if len(_ENCODE_CACHE) > 64:
        _ENCODE_CACHE.clear()
    _ENCODE_CACHE[id(spec)] = (spec, enc)
    return enc


@dataclass
class _RepResult:
    arr_p: np.ndarray
    blk_p: np.ndarray
    arr_l: np.ndarray
    blk_l: np.ndarray
    area: np.ndarray
    time: float
    converged: bool


def _run_replication(enc: _Encoded, c: np.ndarray, cfg: SimConfig, seed, rep: int, target: float) -> _RepResult:
    S, L = len(enc.sources), enc.L
    streams = [RngStream(seed, rep, "arrival", int(enc.src_stream_index[s])) for s in range(S)]
    streams += [RngStream(seed, rep, "station", l) for l in range(L)]

    cap_floor = np.floor(c).astype(np.int64)
    cap_frac = c - cap_floor
    rule = _engine.RULE_FRACTIONAL
    if cfg.admission == "integer":
        rule = _engine.RULE_INTEGER
        cap_floor = np.floor(c + 0.5).astype(np.int64)
        cap_frac = np.zeros(L)
    n_slots = int(np.sum(cap_floor + 1)) + 1
    slot_r = np.zeros(n_slots, dtype=np.int64)
    slot_i = np.zeros(n_slots, dtype=np.int64)
    free = np.arange(n_slots, dtype=np.int64)
    fmeta = np.array([n_slots], dtype=np.int64)
    H = n_slots + 2 * S + 4
    ht = np.zeros(H)
    hk = np.zeros(H, dtype=np.int64)
    ho = np.zeros(H, dtype=np.int64)
    hs = np.zeros(H, dtype=np.int64)
    hmeta = np.zeros(2, dtype=np.int64)

    src_state = np.zeros(S, dtype=np.int64)
    # initial events come first in each source stream; the buffers continue from there
    for s, src in enumerate(enc.sources):
        st = streams[s]
        src_state[s] = initial_state(src.process, st)
        if enc.src_kind[s] == _engine.SRC_MMPP:
            _engine.heap_push(ht, hk, ho, hs, hmeta, float(_exp(enc.src_par[s, 6], st)), _engine.SW, s)
            first = _exp(enc.src_par[s, 7], st)
        elif enc.src_kind[s] == _engine.SRC_POISSON:
            first = _exp(enc.src_par[s, 0], st)
        else:
            first = src.process.interarrival.sample(st)
        _engine.heap_push(ht, hk, ho, hs, hmeta, float(first), _engine.ARR, s)
    buf = np.empty((S + L, BUFFER_WIDTH))
    for k, st in enumerate(streams):
        buf[k] = st.uniforms(BUFFER_WIDTH)
    ptr = np.zeros(S + L, dtype=np.int64)

    occ = np.zeros(L, dtype=np.int64)
    area = np.zeros(L)
    clock = np.zeros(1)
    arr_p = np.zeros(enc.n_pairs, dtype=np.int64)
    blk_p = np.zeros(enc.n_pairs, dtype=np.int64)
    arr_l = np.zeros(L, dtype=np.int64)
    blk_l = np.zeros(L, dtype=np.int64)

    batch = 0
    while True:
        batch += 1
        t_end = min(batch * cfg.batch_length, cfg.max_sim_time)
        while True:
            status = _engine.advance(
                t_end, clock, occ, area, enc.route, enc.route_len, enc.pair_off, enc.svc,
                cap_floor, cap_frac, rule, enc.src_kind, enc.src_par, enc.src_cls, enc.src_cum,
                enc.src_ncls, src_state, slot_r, slot_i, free, fmeta, ht, hk, ho, hs, hmeta,
                buf, ptr, arr_p, blk_p, arr_l, blk_l)
            if status == 0:
                break
            if status == 2:
                raise RuntimeError("event calendar overflow")
            for k in np.flatnonzero(BUFFER_WIDTH - ptr < _engine.MIN_BUFFER * 4):
                rest = buf[k, ptr[k]:].copy()
                buf[k, :len(rest)] = rest
                buf[k, len(rest):] = streams[k].uniforms(BUFFER_WIDTH - len(rest))
                ptr[k] = 0
        done = _widths_ok(arr_p, blk_p, target) and _widths_ok(arr_l, blk_l, target)
        if done or t_end >= cfg.max_sim_time:
            return _RepResult(arr_p, blk_p, arr_l, blk_l, area, float(clock[0]), done)


def _exp(rate, st):
    return -math.log1p(-st.uniform()) / rate


def _widths_ok(arr, blk, target) -> bool:
    seen = arr > 0
    if not seen.any():
        return False
    w = ci_width(blk[seen] / arr[seen], arr[seen])
    return bool(np.all(w < target))


def simulate_blocking(spec: NetworkSpec, c, cfg: SimConfig, seed=0, iteration: int = 1,
                      check: bool = True) -> BlockingEstimates:
    """Estimate blocking proportions at capacity ``c`` from ``cfg.replications`` runs."""
    c = np.asarray(c, dtype=float)
    if check:
        problems = validate(spec)
        if problems:
            raise ValueError("invalid network: " + "; ".join(problems))
    if c.shape != (spec.n_stations,):
        raise ValueError(f"capacity vector must have length {spec.n_stations}")
    if np.any(c < 1) or not np.all(np.isfinite(c)):
        raise ValueError("capacities must be finite and at least 1")
    enc = _encode(spec)
    target = cfg.ci_target(iteration)
    floor = cfg.zero_floor
    reps = [_run_replication(enc, c, cfg, seed, k, target) for k in range(cfg.replications)]

    rep_arr = np.array([r.arr_p for r in reps])
    rep_blk = np.array([r.blk_p for r in reps])
    with np.errstate(invalid="ignore", divide="ignore"):
        rep_p = np.where(rep_arr > 0, rep_blk / np.maximum(rep_arr, 1), 0.0)
        rep_pl = np.array([np.where(r.arr_l > 0, r.blk_l / np.maximum(r.arr_l, 1), 0.0) for r in reps])
    rep_p = np.maximum(rep_p, floor)
    rep_pl = np.maximum(rep_pl, floor)
    rep_ci = ci_width(rep_p, rep_arr)
    p_pair = np.clip(rep_p.mean(axis=0), floor, 1.0)
    p_station = np.clip(rep_pl.mean(axis=0), floor, 1.0)
    arr_l = np.sum([r.arr_l for r in reps], axis=0)
    times = np.array([r.time for r in reps])
    occ = np.mean([r.area / r.time for r in reps], axis=0)
    return BlockingEstimates(
        p_pair=p_pair,
        arrivals_pair=rep_arr.sum(axis=0),
        blocked_pair=rep_blk.sum(axis=0),
        ci_pair=ci_width(p_pair, rep_arr.mean(axis=0)),
        p_station=p_station,
        arrivals_station=arr_l,
        blocked_station=np.sum([r.blk_l for r in reps], axis=0),
        ci_station=ci_width(p_station, arr_l / cfg.replications),
        mean_occupancy=occ,
        sim_time=float(times.sum()),
        replications=cfg.replications,
        converged=all(r.converged for r in reps),
        zero_floor=floor,
        rep_arrivals_pair=rep_arr,
        rep_blocked_pair=rep_blk,
        rep_p_pair=rep_p,
        rep_ci_pair=rep_ci,
        pairs=list(spec.pairs),
    )


Simulator = Callable[..., BlockingEstimates]
