"""YAML scenario files.

Schema (stations and classes are 1-based in the file)::

    name: custom            # free-form label
    seed: 0
    options: {}             # scenario options, e.g. {row: 3, rewards: equal}
    network:
      stations:
        - capacity_cost: 0.2
          service: {kind: exponential, rate: 0.8}        # or {kind: coxian2, mean: .., cov: ..}
          service_by_class: {2: {kind: exponential, rate: 1.5}}   # optional, keyed by class
      classes:
        - route: [1, 2]
          rewards: [1.0, 0.9]
          arrival: {kind: poisson, rate: 16}              # omit when fed by a shared source
      shared_sources:                                     # optional
        - process: {kind: mmpp3, state_rates: [10, 20, 30], switch_rate: 1.0, class_mix: [0.5, 0.5]}
          classes: [1, 2]
    sim: {batch_length: 10, ci_target: {scale: 0.1, power: 0}, replications: 5,
          zero_floor: 1.0e-4, max_sim_time: 1.0e5, admission: fractional}
    optimizer: {k: 2, stop_tol: 1, max_iters: 10, c_max: 200, ...}   # any OptimizerConfig field
    sa: {sa_delta: 5, sa_beta: 150, ...}                               # SA overrides, optional
    initial_capacities: [[10, 10], [30, 5]]

Arrival kinds: ``poisson`` (rate), ``renewal`` (interarrival: a service-style
law), ``mmpp3`` (state_rates, switch_rate). Floats are written with Python's
shortest round-trip representation, so save/load is bit-exact.
"""
from __future__ import annotations

from dataclasses import asdict, fields

import numpy as np
import yaml

from ..model import ClassSpec, NetworkSpec, SharedSource, StationSpec
from ..optimizers import OptimizerConfig
from ..simulator import CISchedule, SimConfig
from ..stochastics import COXIAN2, EXPONENTIAL, MMPP3, POISSON, RENEWAL, ArrivalProcessSpec, DistributionSpec
from .scenarios import ScenarioSpec


def _num(x):
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2**53 else x


def dist_to_dict(d: DistributionSpec) -> dict:
    if d.kind == EXPONENTIAL:
        return {"kind": EXPONENTIAL, "rate": float(d.rate)}
    return {"kind": COXIAN2, "mean": float(d.mean_value), "cov": float(d.cov)}


def dist_from_dict(d: dict) -> DistributionSpec:
    kind = d.get("kind")
    if kind == EXPONENTIAL:
        return DistributionSpec.exponential(d["rate"])
    if kind == COXIAN2:
        return DistributionSpec.coxian2(d["mean"], d["cov"])
    raise ValueError(f"unknown distribution kind {kind!r}")


def process_to_dict(p: ArrivalProcessSpec) -> dict:
    out: dict = {"kind": p.kind}
    if p.kind == POISSON:
        out["rate"] = float(p.rate)
    elif p.kind == RENEWAL:
        out["interarrival"] = dist_to_dict(p.interarrival)
    else:
        out["state_rates"] = [float(x) for x in p.state_rates]
        out["switch_rate"] = float(p.switch_rate)
    if p.class_mix is not None:
        out["class_mix"] = [float(x) for x in p.class_mix]
    return out


def process_from_dict(d: dict) -> ArrivalProcessSpec:
    kind = d.get("kind")
    mix = d.get("class_mix")
    mix = None if mix is None else tuple(mix)
    if kind == POISSON:
        return ArrivalProcessSpec.poisson(d["rate"], mix)
    if kind == RENEWAL:
        return ArrivalProcessSpec.renewal(dist_from_dict(d["interarrival"]), mix)
    if kind == MMPP3:
        return ArrivalProcessSpec.mmpp3(d["state_rates"], d["switch_rate"], mix)
    raise ValueError(f"unknown arrival process kind {kind!r}")


def network_to_dict(spec: NetworkSpec) -> dict:
    stations = []
    for st in spec.stations:
        d = {"capacity_cost": float(st.capacity_cost), "service": dist_to_dict(st.service)}
        if st.service_by_class:
            d["service_by_class"] = {int(r) + 1: dist_to_dict(v) for r, v in sorted(st.service_by_class.items())}
        stations.append(d)
    classes = []
    for cls in spec.classes:
        d = {"route": [l + 1 for l in cls.route], "rewards": [float(w) for w in cls.rewards]}
        if cls.arrival is not None:
            d["arrival"] = process_to_dict(cls.arrival)
        classes.append(d)
    out = {"stations": stations, "classes": classes}
    if spec.shared_sources:
        out["shared_sources"] = [{"process": process_to_dict(s.process), "classes": [r + 1 for r in s.classes]}
                                 for s in spec.shared_sources]
    return out


def network_from_dict(d: dict) -> NetworkSpec:
    stations = [StationSpec(float(s["capacity_cost"]), dist_from_dict(s["service"]),
                            {int(r) - 1: dist_from_dict(v) for r, v in (s.get("service_by_class") or {}).items()})
                for s in d["stations"]]
    classes = [ClassSpec(tuple(int(l) - 1 for l in c["route"]), tuple(c["rewards"]),
                         process_from_dict(c["arrival"]) if c.get("arrival") else None)
               for c in d["classes"]]
    shared = [SharedSource(process_from_dict(s["process"]), tuple(int(r) - 1 for r in s["classes"]))
              for s in d.get("shared_sources") or []]
    return NetworkSpec(stations, classes, shared)


def sim_to_dict(cfg: SimConfig) -> dict:
    return {"batch_length": float(cfg.batch_length),
            "ci_target": {"scale": float(cfg.ci_target.scale), "power": float(cfg.ci_target.power)},
            "replications": int(cfg.replications), "zero_floor": float(cfg.zero_floor),
            "max_sim_time": float(cfg.max_sim_time), "admission": cfg.admission}


def sim_from_dict(d: dict) -> SimConfig:
    d = dict(d)
    ci = d.pop("ci_target", {"scale": 0.1})
    ci = CISchedule(float(ci), 0.0) if isinstance(ci, (int, float)) else CISchedule(float(ci["scale"]), float(ci.get("power", 0.0)))
    unknown = set(d) - {f.name for f in fields(SimConfig)}
    if unknown:
        raise ValueError(f"unknown sim fields {sorted(unknown)}")
    return SimConfig(ci_target=ci, **d)


def optimizer_from_dict(d: dict) -> OptimizerConfig:
    unknown = set(d) - {f.name for f in fields(OptimizerConfig)}
    if unknown:
        raise ValueError(f"unknown optimizer fields {sorted(unknown)}")
    return OptimizerConfig(**d)


def scenario_to_dict(sc: ScenarioSpec) -> dict:
    return {
        "name": sc.name,
        "seed": int(sc.seed),
        "options": dict(sc.options),
        "network": network_to_dict(sc.network),
        "sim": sim_to_dict(sc.sim),
        "optimizer": asdict(sc.optimizer),
        "sa": dict(sc.sa),
        "initial_capacities": [[_num(x) for x in c] for c in sc.initial_capacities],
    }


def scenario_from_dict(d: dict) -> ScenarioSpec:
    missing = {"network"} - set(d)
    if missing:
        raise ValueError(f"scenario file lacks {sorted(missing)}")
    net = network_from_dict(d["network"])
    init = d.get("initial_capacities") or [[1] * net.n_stations]
    return ScenarioSpec(
        name=d.get("name", "custom"),
        seed=int(d.get("seed", 0)),
        network=net,
        sim=sim_from_dict(d.get("sim") or {}),
        optimizer=optimizer_from_dict(d.get("optimizer") or {}),
        initial_capacities=[np.asarray(c, dtype=float) for c in init],
        options=dict(d.get("options") or {}),
        sa=dict(d.get("sa") or {}),
    )


def dump_scenario(sc: ScenarioSpec) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False)


def save_scenario(sc: ScenarioSpec, path) -> None:
    with open(path, "w") as fh:
        fh.write(dump_scenario(sc))


def load_scenario(path) -> ScenarioSpec:
    with open(path) as fh:
        return scenario_from_dict(yaml.safe_load(fh))
