"""Run a scenario under a policy alongside its fault-free reference."""

from __future__ import annotations

from dataclasses import dataclass

from .metrics import MetricsRecord, job_records
from .simulation import Simulation


@dataclass
class RunResult:
    records: list[MetricsRecord]
    sim: Simulation
    reference: Simulation


def reference_run(scenario, seed: int) -> Simulation:
    ref = Simulation(scenario, policy="none", seed=seed, faults=False)
    ref.run()
    return ref


def run_policy(scenario, policy: str, seed: int, trace: bool = False,
               reference: Simulation | None = None) -> RunResult:
    """Faulted run plus the same-seed run with faults and speculation off.

    Both runs draw placement from the same seeded stream, so job home nodes
    match and the slowdown isolates the fault's cost.
    """
    if reference is None:
        reference = reference_run(scenario, seed)
    sim = Simulation(scenario, policy=policy, seed=seed, trace=trace)
    sim.run()
    return RunResult(job_records(sim.jobs, reference.jobs, policy), sim, reference)
