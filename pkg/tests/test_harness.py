import csv

import numpy as np
import pytest

from blocknet.harness import build_scenario, emit_plot_data, fingerprint, load_scenario, run_experiment, save_scenario
from blocknet.harness.cli import main
from blocknet.harness.config import dump_scenario, scenario_from_dict, scenario_to_dict
from blocknet.harness.experiment import RunResult, best_k, emit_k_sweep, k_sweep
from blocknet.harness.scenarios import CANONICAL_COV_TABLE, CANONICAL_ROUTES, RING_SWITCH_RATE, canonical_network
from blocknet.model import validate
from blocknet.stochastics import MMPP3, RENEWAL


def small_tandem(n_starts=3, **sim):
    sc = build_scenario("tandem", seed=1, n_starts=n_starts)
    from dataclasses import replace
    sc.sim = replace(sc.sim, replications=2, **sim)
    return sc


def test_tandem_constants():
    sc = build_scenario("tandem")
    net = sc.network
    assert list(net.theta) == [0.2, 0.3]
    assert net.classes[0].rewards == (1.0, 0.9)
    assert net.classes[0].arrival.rate == 16.0
    assert [s.service.rate for s in net.stations] == [0.8, 0.6]
    assert len(sc.initial_capacities) == 20
    assert all(np.all((c >= 1) & (c <= 60) & (c == np.floor(c))) for c in sc.initial_capacities)
    assert sc.sim.ci_target(1) == 0.1 and sc.sim.replications == 5 and sc.sim.zero_floor == 1e-4


def test_crisscross_ranges():
    sc = build_scenario("crisscross", seed=3)
    net = sc.network
    assert validate(net) == []
    assert net.n_stations == 10 and len(net.classes) == 2
    assert net.classes[1].route == tuple(reversed(range(10)))
    assert np.all((net.theta >= 0.1) & (net.theta <= 0.3))
    for st in net.stations:
        assert 0 < 1 / st.service.rate < 10 / 12
        assert 0 < 1 / st.service_by_class[1].rate < 10 / 12
    for cls in net.classes:
        assert all(0 < w < 2 for w in cls.rewards)
    src = net.shared_sources[0]
    assert src.process.kind == MMPP3 and tuple(src.process.state_rates) == (10, 20, 30)
    assert sc.sim.ci_target(4) == pytest.approx(0.015)
    assert sc.sa["sa_beta"] == 150.0 and sc.sa["sa_max_trials"] == 20
    assert len(sc.initial_capacities) == 10
    assert all(np.all((c >= 1) & (c <= 100)) for c in sc.initial_capacities)


def test_ring_structure():
    sc = build_scenario("ring", seed=5)
    net = sc.network
    assert validate(net) == []
    for i, cls in enumerate(net.classes):
        assert cls.route == tuple((i + j) % 10 for j in range(10))
        p = cls.arrival
        assert p.switch_rate == RING_SWITCH_RATE
        assert p.state_rates[0] == 1 and p.state_rates[1] == 2 and 0 < p.state_rates[2] < 4
        assert all(1 <= w <= 2 for w in cls.rewards)
    assert np.all((net.theta > 0) & (net.theta < 0.2))
    assert np.array_equal(sc.initial_capacities[0], np.ones(10))
    assert sc.sim.replications == 50


def test_scenarios_regenerate_identically():
    a, b = build_scenario("ring", seed=9), build_scenario("ring", seed=9)
    assert fingerprint(a) == fingerprint(b)
    assert fingerprint(a) != fingerprint(build_scenario("ring", seed=10))


@pytest.mark.parametrize("row", [1, 14, 29])
def test_canonical_rows(row):
    net = canonical_network(row, "unordered")
    assert validate(net) == []
    s1, s2, s3, s4, a1, a2 = CANONICAL_COV_TABLE[row - 1]
    assert [st.service.cov for st in net.stations] == [s1, s2, s3, s4, 1.5, 1.5]
    assert [1 + l for l in net.classes[4].route] == list(CANONICAL_ROUTES[4])
    assert net.classes[0].arrival.kind == RENEWAL
    assert net.classes[0].arrival.interarrival.cov == a1
    assert net.classes[8].arrival.interarrival.cov == a2
    assert net.arrival_rates[0] == pytest.approx(15.0) and net.arrival_rates[7] == pytest.approx(7.5)


def test_canonical_unknown_row_and_rewards():
    with pytest.raises(ValueError, match="row"):
        canonical_network(30)
    with pytest.raises(ValueError):
        canonical_network(1, "random")
    with pytest.raises(ValueError):
        build_scenario("mystery")


def test_yaml_round_trip_bit_exact(tmp_path):
    for name in ("tandem", "crisscross", "ring", "canonical"):
        sc = build_scenario(name, seed=2)
        save_scenario(sc, tmp_path / f"{name}.yaml")
        back = load_scenario(tmp_path / f"{name}.yaml")
        assert scenario_to_dict(back) == scenario_to_dict(sc)
        assert fingerprint(back) == fingerprint(sc)
        assert dump_scenario(back) == dump_scenario(sc)


def test_custom_scenario_from_yaml(tmp_path):
    save_scenario(build_scenario("crisscross", seed=1), tmp_path / "c.yaml")
    sc = build_scenario("custom", config=tmp_path / "c.yaml")
    assert sc.network.n_stations == 10
    with pytest.raises(ValueError):
        build_scenario("custom")


def test_yaml_rejects_unknown_fields():
    d = scenario_to_dict(build_scenario("tandem"))
    d["optimizer"]["learning_rate"] = 1
    with pytest.raises(ValueError, match="learning_rate"):
        scenario_from_dict(d)


def test_experiment_and_plot_data(tmp_path):
    sc = small_tandem()
    res = run_experiment(sc, ["coupled", "decoupled"], out_dir=tmp_path, max_iters=3)
    assert not res.failures
    assert len(res.traces["coupled"]) == 3
    assert (tmp_path / "tandem_coupled_000.csv").exists()
    res.save(tmp_path / "result.json")
    back = RunResult.load(tmp_path / "result.json")
    assert back.final_objectives("decoupled") == res.final_objectives("decoupled")

    files = {p.name: p for p in emit_plot_data(back, tmp_path / "plots")}
    rows = list(csv.DictReader(open(files["objective_envelope.csv"])))
    assert rows and all(float(r["min"]) <= float(r["mean"]) <= float(r["max"]) for r in rows)
    calls = list(csv.DictReader(open(files["cumulative_sim_calls.csv"])))
    for a in ("coupled", "decoupled"):
        last = {}
        for r in calls:
            if r["algorithm"] == a:
                last[r["path_id"]] = int(r["cumulative_sim_calls"])
        assert sum(last.values()) + sum(t.final_sim_calls for t in res.traces[a]) == res.sim_calls(a)
    assert next(csv.reader(open(files["objective_vs_iteration.csv"]))) == ["algorithm", "path_id", "iter", "f_hat"]
    caps = list(csv.DictReader(open(files["final_capacities.csv"])))
    assert len(caps) == 2 * 3 * 2


def test_experiment_records_failures():
    sc = small_tandem(n_starts=1)
    sc.initial_capacities = [np.array([0.0, 5.0])]
    res = run_experiment(sc, ["decoupled"])
    assert len(res.failures) == 1 and "initial capacity" in res.failures[0]["error"]
    with pytest.raises(ValueError):
        run_experiment(sc, ["gradient-descent"])


def test_k_sweep_outputs(tmp_path):
    sc = small_tandem(n_starts=2)
    sweep = k_sweep(sc, [1.0, 2.0], ["decoupled"], evaluate=lambda c: -float(np.sum((c - 20) ** 2)))
    paths = emit_k_sweep(sweep, tmp_path)
    assert [p.name for p in paths] == ["k_sweep.csv", "k_sweep_summary.csv"]
    assert best_k(sweep, "decoupled") in (1.0, 2.0)


def test_cli_smoke(tmp_path, capsys):
    assert main(["scenario", "list"]) == 0
    assert "ring" in capsys.readouterr().out
    assert main(["exact", "--c1", "20", "--c2", "24"]) == 0
    assert '"objective": 13.09' in capsys.readouterr().out
    assert main(["simulate", "--capacity", "10,12", "--seed", "1"]) == 0
    assert "objective" in capsys.readouterr().out
    out = tmp_path / "run"
    assert main(["optimize", "--algorithm", "decoupled", "--starts", "2", "--max-iters", "2", "--out", str(out)]) == 0
    assert (out / "result.json").exists() and (out / "scenario.yaml").exists()
    assert main(["plot-data", str(out / "result.json")]) == 0
    assert (out / "plot_data" / "objective_envelope.csv").exists()
    assert main(["optimize", "--config", str(out / "scenario.yaml"), "--algorithm", "coupled",
                 "--max-iters", "1", "--out", str(tmp_path / "again")]) == 0
    assert main(["simulate", "--scenario", "canonical", "--row", "30", "--capacity", "5"]) == 2


def test_output_dir_from_environment(monkeypatch, tmp_path):
    from blocknet.harness.experiment import default_output_dir
    monkeypatch.setenv("BLOCKNET_OUTPUT_DIR", str(tmp_path))
    assert default_output_dir() == tmp_path
