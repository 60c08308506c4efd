import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from blocknet import ArrivalProcessSpec, ClassSpec, DistributionSpec, NetworkSpec, StationSpec
from blocknet.harness.scenarios import tandem_network

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def tandem():
    return tandem_network()


def single_station(lam=2.0, mu=1.0, theta=0.1, omega=1.0) -> NetworkSpec:
    return NetworkSpec([StationSpec(theta, DistributionSpec.exponential(mu))],
                       [ClassSpec((0,), (omega,), ArrivalProcessSpec.poisson(lam))])


def random_network(rng: np.random.Generator, L: int, R: int, with_idle_station: bool = False) -> NetworkSpec:
    """Random Poisson/exponential network; routes never repeat a station."""
    usable = L - 1 if with_idle_station and L > 1 else L
    stations = [StationSpec(float(rng.uniform(0.05, 0.5)), DistributionSpec.exponential(float(rng.uniform(0.3, 2))))
                for _ in range(L)]
    classes = []
    for _ in range(R):
        n = int(rng.integers(1, usable + 1))
        route = tuple(int(x) for x in rng.permutation(usable)[:n])
        classes.append(ClassSpec(route, tuple(rng.uniform(0.2, 2, n)),
                                 ArrivalProcessSpec.poisson(float(rng.uniform(1, 20)))))
    return NetworkSpec(stations, classes)


def fake_estimates(spec: NetworkSpec, p_pair, p_station=None, zero_floor: float = 1e-10, reps: int = 2):
    """BlockingEstimates carrying prescribed blocking values (identical across replications)."""
    from blocknet.simulator import BlockingEstimates
    p_pair = np.asarray(p_pair, dtype=float)
    if p_station is None:
        p_station = np.zeros(spec.n_stations)
        for k, l in enumerate(spec.pair_station):
            p_station[l] = p_pair[k]
    p_station = np.asarray(p_station, dtype=float)
    P, L = len(p_pair), spec.n_stations
    zp, zl = np.zeros(P), np.zeros(L)
    return BlockingEstimates(
        p_pair=p_pair, arrivals_pair=zp, blocked_pair=zp, ci_pair=zp,
        p_station=p_station, arrivals_station=zl, blocked_station=zl, ci_station=zl,
        mean_occupancy=zl, sim_time=0.0, replications=reps, converged=True, zero_floor=zero_floor,
        rep_arrivals_pair=np.zeros((reps, P)), rep_blocked_pair=np.zeros((reps, P)),
        rep_p_pair=np.tile(p_pair, (reps, 1)), rep_ci_pair=np.zeros((reps, P)), pairs=list(spec.pairs))


# acceptance criterion -> (passed, detail); printed once at the end of the session
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def report(criterion: str, passed: bool, detail: str) -> None:
    prev = ACCEPTANCE.get(criterion)
    if prev is not None:
        passed, detail = prev[0] and passed, f"{prev[1]}; {detail}"
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: (len(s), s)):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'} - {detail}")
