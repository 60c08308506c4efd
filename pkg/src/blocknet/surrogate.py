"""Weibull-shaped blocking surrogate, its calibration, objective and gradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NetworkSpec

MODES = ("coupled", "decoupled")


def weibull_blocking(c, tau, k: float):
    """``exp(-(c * tau) ** k)``: 1 at c = 0, strictly decreasing, vanishing as c grows."""
    return np.exp(-(np.asarray(c, dtype=float) * tau) ** k)


def weibull_blocking_slope(c, tau, k: float):
    """Derivative of :func:`weibull_blocking` with respect to ``c``."""
    c = np.asarray(c, dtype=float)
    if k < 1 and np.any(c <= 0):
        raise ValueError("slope is singular at c = 0 for shape k < 1")
    return -k * tau**k * c ** (k - 1) * np.exp(-(c * tau) ** k)


def calibrate_tau(p_hat, c, k: float, floor: float = 0.0):
    """Scale making the surrogate hit ``p_hat`` exactly at capacity ``c``.

    ``p_hat`` is clamped to ``[floor, 1 - floor]`` first; with ``floor = 0`` a
    value of 0 or 1 raises.
    """
    p = np.asarray(p_hat, dtype=float)
    if floor > 0:
        p = np.clip(p, floor, 1.0 - floor)
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError("blocking estimates must lie strictly inside (0, 1) to calibrate")
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValueError("calibration capacity must be positive")
    return (-np.log(p)) ** (1.0 / k) / c


@dataclass
class SurrogateParams:
    mode: str
    k: float
    tau: np.ndarray  # per pair (coupled) or per station (decoupled)
    c_prev: np.ndarray
    # decoupled only: point estimates frozen at c_prev
    p_pair: np.ndarray | None = None
    p_station: np.ndarray | None = None


def _estimates(p_hat):
    return np.asarray(getattr(p_hat, "p_pair", p_hat), dtype=float)


def calibrate_coupled(p_hat, c_prev, spec: NetworkSpec, k: float = 2.0, floor: float | None = None) -> SurrogateParams:
    """One scale per (class, route position), fitted at the station's previous capacity."""
    if floor is None:
        floor = getattr(p_hat, "zero_floor", 0.0)
    c_prev = np.asarray(c_prev, dtype=float)
    tau = calibrate_tau(_estimates(p_hat), c_prev[spec.pair_station], k, floor)
    return SurrogateParams("coupled", k, tau, c_prev.copy())


def calibrate_decoupled(p_hat, c_prev, spec: NetworkSpec, k: float = 2.0, floor: float | None = None) -> SurrogateParams:
    """One scale per station from the station-level estimate; also freezes the point estimates."""
    if floor is None:
        floor = p_hat.zero_floor
    c_prev = np.asarray(c_prev, dtype=float)
    p_station = np.asarray(p_hat.p_station, dtype=float)
    p_pair = _estimates(p_hat)
    if floor > 0:
        p_station = np.clip(p_station, floor, 1 - floor)
        p_pair = np.clip(p_pair, floor, 1 - floor)
    tau = calibrate_tau(p_station, c_prev, k)
    return SurrogateParams("decoupled", k, tau, c_prev.copy(), p_pair, p_station)


def _require(params: SurrogateParams, mode: str):
    if params.mode != mode:
        raise ValueError(f"expected {mode} surrogate parameters, got {params.mode}")


def surrogate_pair_blocking(params: SurrogateParams, spec: NetworkSpec, c) -> np.ndarray:
    _require(params, "coupled")
    c = np.asarray(c, dtype=float)
    return weibull_blocking(c[spec.pair_station], params.tau, params.k)


def surrogate_objective(params: SurrogateParams, spec: NetworkSpec, c) -> float:
    c = np.asarray(c, dtype=float)
    p = surrogate_pair_blocking(params, spec, c)
    total = -c @ spec.theta
    for lam, cls, pr in zip(spec.arrival_rates, spec.classes, spec.split_pairs(p)):
        total += lam * np.dot(cls.rewards, np.cumprod(1.0 - pr))
    return float(total)


def downstream_weights(rewards, p) -> np.ndarray:
    """For each route position j: sum over i >= j of w_i * prod_{m <= i, m != j} (1 - p_m).

    Computed as prefix survival times a suffix recursion, so no division by
    ``1 - p_j`` is needed.
    """
    rewards = np.asarray(rewards, dtype=float)
    surv = 1.0 - np.asarray(p, dtype=float)
    n = len(rewards)
    prefix = np.concatenate([[1.0], np.cumprod(surv[:-1])])
    tail = np.empty(n)
    tail[-1] = rewards[-1]
    for j in range(n - 2, -1, -1):
        tail[j] = rewards[j] + surv[j + 1] * tail[j + 1]
    return prefix * tail


def surrogate_gradient(params: SurrogateParams, spec: NetworkSpec, c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValueError("gradient needs positive capacities")
    p = surrogate_pair_blocking(params, spec, c)
    slope = weibull_blocking_slope(c[spec.pair_station], params.tau, params.k)
    grad = -spec.theta.copy()
    o = spec.pair_offsets
    for r, (lam, cls) in enumerate(zip(spec.arrival_rates, spec.classes)):
        weights = downstream_weights(cls.rewards, p[o[r]:o[r + 1]])
        np.add.at(grad, list(cls.route), -lam * slope[o[r]:o[r + 1]] * weights)
    return grad


def decoupled_gamma(params: SurrogateParams, spec: NetworkSpec) -> np.ndarray:
    """Per-station sensitivity of network reward, from point estimates frozen at ``c_prev``."""
    _require(params, "decoupled")
    assert np.all(params.p_station > 0)
    gamma = np.zeros(spec.n_stations)
    o = spec.pair_offsets
    for r, (lam, cls) in enumerate(zip(spec.arrival_rates, spec.classes)):
        pr = params.p_pair[o[r]:o[r + 1]]
        weights = downstream_weights(cls.rewards, pr)
        route = list(cls.route)
        np.add.at(gamma, route, lam * pr / params.p_station[route] * weights)
    return gamma
