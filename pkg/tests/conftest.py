import copy

import pytest

from binosim import Scenario, Simulation

# 100 kB splits at 10 B/ms give 10 s maps with 2 s spill segments, so every
# milestone lands on an exact millisecond.
EXACT_PROFILE = {
    "split_size": 100_000,
    "map_throughput": 10.0,
    "reduce_throughput": 10.0,
    "shuffle_throughput": 10.0,
    "num_spills": 5,
}


def scenario_dict(**blocks):
    raw = {
        "cluster": {"nodes": 6, "slots_per_node": 4, "heartbeat_ms": 1000},
        "jobs": [{"input_size": 300_000, "home_node": 0}],
        "job_profile": dict(EXACT_PROFILE),
    }
    for k, v in blocks.items():
        raw[k] = copy.deepcopy(v)
    return raw


def run(raw, policy="none", seed=0, faults=True, trace=False, until=None):
    sim = Simulation(Scenario.from_dict(raw), policy=policy, seed=seed, faults=faults, trace=trace)
    sim.run(until=until)
    return sim


@pytest.fixture
def make_sim():
    return run
