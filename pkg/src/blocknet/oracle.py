"""Exact objective values for Markovian benchmark systems.

Erlang-B for a single loss station, and the two-station tandem loss network
solved as a finite CTMC. The tandem solve also yields the stationary rates at
which customers enter each station (``kappa1 / omega11`` and
``kappa2 / omega12``), which is all the objective needs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

MAX_STATES = 100_000


def erlang_b(a: float, c: int) -> float:
    """Blocking probability of an M/M/c/c queue with offered load ``a``."""
    if a <= 0:
        raise ValueError("offered load must be positive")
    if c < 0:
        raise ValueError("number of servers must be non-negative")
    b = 1.0
    for j in range(1, int(c) + 1):
        b = a * b / (j + a * b)
    return b


@dataclass(frozen=True)
class TandemSpec:
    lam: float
    mu1: float
    mu2: float
    theta1: float
    theta2: float
    omega1: float
    omega2: float
    # capacities may be fractional: at occupancy floor(c) an arrival is
    # admitted with probability c - floor(c)
    c1: float = 1
    c2: float = 1

    def __post_init__(self):
        for name in ("lam", "mu1", "mu2", "theta1", "theta2", "omega1", "omega2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.c1 < 1 or self.c2 < 1:
            raise ValueError("capacities must be at least 1")

    def at(self, c1: float, c2: float) -> "TandemSpec":
        return replace(self, c1=_as_capacity(c1), c2=_as_capacity(c2))


def _as_capacity(c):
    c = float(c)
    return int(c) if c.is_integer() else c


def _levels(c) -> tuple[int, float, int]:
    """(floor, boundary admission probability, largest reachable occupancy)."""
    whole = math.floor(c)
    frac = float(c) - whole
    return whole, frac, whole + (frac > 0)


# The benchmark tandem: lambda=16, service rates 0.8 / 0.6, costs 0.2 / 0.3,
# rewards 1 / 0.9.
BENCHMARK_TANDEM = TandemSpec(lam=16.0, mu1=0.8, mu2=0.6, theta1=0.2, theta2=0.3,
                              omega1=1.0, omega2=0.9)


@dataclass
class TandemSolution:
    pi: np.ndarray  # shape (c1 + 1, c2 + 1), pi[x1, x2]
    kappa1: float
    kappa2: float
    objective: float
    p11: float  # blocking at station 1
    p12: float  # blocking at station 2 among customers reaching it
    residual: float  # max |pi D|


def _state_index(c1: int, c2: int):
    # x1 is the fast index
    return lambda x1, x2: x2 * (c1 + 1) + x1


def tandem_generator(spec: TandemSpec):
    """Generator ``D`` plus the marking matrices for entries into stations 1 and 2.

    Built directly from the transition description. States ``(x1, x2)`` are
    ordered with ``x1`` varying fastest.
    """
    f1, q1, c1 = _levels(spec.c1)
    f2, q2, c2 = _levels(spec.c2)
    n = (c1 + 1) * (c2 + 1)
    if n > MAX_STATES:
        raise ValueError(f"state space of {n} states exceeds cap {MAX_STATES}")
    x1 = np.tile(np.arange(c1 + 1), c2 + 1)
    x2 = np.repeat(np.arange(c2 + 1), c1 + 1)
    idx = np.arange(n)
    admit1 = np.where(x1 < f1, 1.0, np.where(x1 == f1, q1, 0.0))
    admit2 = np.where(x2 < f2, 1.0, np.where(x2 == f2, q2, 0.0))

    rows, cols, vals = [], [], []
    # external arrival admitted at station 1
    m = admit1 > 0
    arr = (idx[m], idx[m] + 1, spec.lam * admit1[m])
    # station-1 completion moving on to station 2
    m = (x1 > 0) & (admit2 > 0)
    move = (idx[m], idx[m] - 1 + (c1 + 1), x1[m] * spec.mu1 * admit2[m])
    # station-1 completion lost at a full station 2
    m = (x1 > 0) & (admit2 < 1)
    lost = (idx[m], idx[m] - 1, x1[m] * spec.mu1 * (1 - admit2[m]))
    # station-2 completion
    m = x2 > 0
    dep = (idx[m], idx[m] - (c1 + 1), x2[m] * spec.mu2)
    for r, cc, v in (arr, move, lost, dep):
        rows.append(r)
        cols.append(cc)
        vals.append(v)
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    off = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    diag = -np.asarray(off.sum(axis=1)).ravel()
    D = (off + sp.diags(diag)).tocsr()
    D11 = sp.csr_matrix((arr[2], (arr[0], arr[1])), shape=(n, n))
    D12 = sp.csr_matrix((move[2], (move[0], move[1])), shape=(n, n))
    return D, D11, D12


def tandem_generator_kronecker(spec: TandemSpec):
    """Same generator assembled from Kronecker products.

    Kept as an independent construction for cross-checking
    :func:`tandem_generator`. Station 2 has no exogenous input: its arrivals
    are station-1 completions, so they enter through the coupling term rather
    than a separate birth-death block.
    """
    c1, c2 = spec.c1, spec.c2
    if not (float(c1).is_integer() and float(c2).is_integer()):
        raise ValueError("the Kronecker assembly covers integer capacities only")
    c1, c2 = int(c1), int(c2)
    up1 = sp.diags(np.full(c1, spec.lam), 1, shape=(c1 + 1, c1 + 1))
    down1 = sp.diags(np.arange(1, c1 + 1) * spec.mu1, -1, shape=(c1 + 1, c1 + 1))
    down2 = sp.diags(np.arange(1, c2 + 1) * spec.mu2, -1, shape=(c2 + 1, c2 + 1))
    shift2 = sp.diags(np.ones(c2), 1, shape=(c2 + 1, c2 + 1))
    full2 = sp.csr_matrix(([1.0], ([c2], [c2])), shape=(c2 + 1, c2 + 1))
    I1 = sp.identity(c1 + 1)
    I2 = sp.identity(c2 + 1)
    D11 = sp.kron(I2, up1)
    D12 = sp.kron(shift2, down1)
    off = D11 + D12 + sp.kron(full2, down1) + sp.kron(down2, I1)
    diag = -np.asarray(off.sum(axis=1)).ravel()
    D = off + sp.diags(diag)
    return D.tocsr(), D11.tocsr(), D12.tocsr()


def stationary_distribution(D) -> np.ndarray:
    """Solve ``pi D = 0, sum(pi) = 1`` by swapping one balance equation for normalisation."""
    n = D.shape[0]
    keep = np.ones(n)
    keep[0] = 0.0
    norm_row = sp.csr_matrix((np.ones(n), (np.zeros(n, dtype=int), np.arange(n))), shape=(n, n))
    A = sp.diags(keep) @ D.T + norm_row
    b = np.zeros(n)
    b[0] = 1.0
    pi = spla.spsolve(A.tocsc(), b)
    if not np.all(np.isfinite(pi)):
        raise np.linalg.LinAlgError("singular generator")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def tandem_exact(spec: TandemSpec) -> TandemSolution:
    D, D11, D12 = tandem_generator(spec)
    pi = stationary_distribution(D)
    residual = float(np.abs(D.T @ pi).max())
    one = np.ones(D.shape[0])
    enter1 = float(pi @ (D11 @ one))
    enter2 = float(pi @ (D12 @ one))
    kappa1 = spec.omega1 * enter1
    kappa2 = spec.omega2 * enter2
    objective = -spec.theta1 * spec.c1 - spec.theta2 * spec.c2 + kappa1 + kappa2
    p11 = 1.0 - enter1 / spec.lam
    p12 = 1.0 - enter2 / enter1 if enter1 > 0 else 1.0
    return TandemSolution(
        pi=pi.reshape(_levels(spec.c2)[2] + 1, _levels(spec.c1)[2] + 1).T,
        kappa1=kappa1,
        kappa2=kappa2,
        objective=objective,
        p11=p11,
        p12=p12,
        residual=residual,
    )


def tandem_objective(spec: TandemSpec, c1: float, c2: float) -> float:
    return tandem_exact(spec.at(c1, c2)).objective


@dataclass
class GridResult:
    argmax: tuple[int, int]
    value: float
    c1: np.ndarray
    c2: np.ndarray
    table: np.ndarray  # table[i, j] = f(c1[i], c2[j])


def grid_search(spec: TandemSpec, c1_range: tuple[int, int] = (1, 60),
                c2_range: tuple[int, int] | None = None) -> GridResult:
    """Brute-force maximisation of the exact tandem objective over an integer box.

    Ranges are inclusive. Ties go to the lexicographically smallest point.
    """
    if c2_range is None:
        c2_range = c1_range
    c1s = np.arange(c1_range[0], c1_range[1] + 1)
    c2s = np.arange(c2_range[0], c2_range[1] + 1)
    table = np.empty((len(c1s), len(c2s)))
    for i, a in enumerate(c1s):
        for j, b in enumerate(c2s):
            table[i, j] = tandem_objective(spec, a, b)
    # argmax returns the first maximiser in C order, i.e. lexicographic
    i, j = np.unravel_index(np.argmax(table), table.shape)
    return GridResult(argmax=(int(c1s[i]), int(c2s[j])), value=float(table[i, j]),
                      c1=c1s, c2=c2s, table=table)


def erlang_b_fractional(a: float, c: float) -> float:
    """Blocking of a single Poisson-fed exponential loss station under fractional capacity."""
    if a <= 0:
        raise ValueError("offered load must be positive")
    whole, frac, top = _levels(c)
    # unnormalised stationary weights of the birth-death chain, in log space
    logw = [j * math.log(a) - math.lgamma(j + 1) for j in range(whole + 1)]
    if top > whole:
        logw.append(logw[-1] + math.log(a * frac / top))
    w = np.exp(np.array(logw) - max(logw))
    pi = w / w.sum()
    blocked = pi[whole] * (1 - frac) + (pi[top] if top > whole else 0.0)
    return float(blocked)


def erlang_b_direct(a: float, c: int) -> float:
    """Ratio-of-sums form, for small ``c`` only (used as a cross-check)."""
    terms = [a ** i / math.factorial(i) for i in range(c + 1)]
    return terms[-1] / sum(terms)
