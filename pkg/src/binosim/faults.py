"""Scripted fault injection.

A fault script is a time-ordered list of :class:`FaultEntry`. Entries fire
either at an absolute virtual time or when a trigger predicate first holds:

* ``map_progress=<frac>``: mean ProgressScore over a job's map tasks
* ``spills=<k>`` (disk exceptions only): the targeted map attempt writes spill k

Targets are node ids, ``random``, ``job_home:<job>``, ``job_node:<job>``
(random node currently running one of the job's attempts) or task selectors
such as ``job=0,map=3``, ``job=0,completed_map=0`` and ``running_map:random``.
"""

from __future__ import annotations

import enum
import logging
import math
import random
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Optional, Union

if TYPE_CHECKING:
    from .simulation import Simulation

log = logging.getLogger(__name__)


class FaultKind(enum.Enum):
    NODE_FAIL = "node_fail"
    NODE_SLOW = "node_slow"
    MOF_LOSS = "mof_loss"
    DISK_EXCEPTION = "disk_exception"
    NET_DELAY = "net_delay"


class FaultConfigError(ValueError):
    pass


@dataclass
class FaultEntry:
    kind: FaultKind
    at: Optional[int] = None
    trigger: Optional[tuple[str, float]] = None
    target: Union[int, str] = "random"
    job: int = 0
    duration_ms: Optional[int] = None
    factor: float = 1.0
    fired: bool = False
    fired_at: Optional[int] = None

    @property
    def sort_time(self) -> float:
        return self.at if self.at is not None else math.inf

    def describe(self) -> str:
        when = f"t={self.at}" if self.at is not None else f"{self.trigger[0]}={self.trigger[1]}"
        return f"{self.kind.value}@{when}:target={self.target}"


@dataclass
class FaultScript:
    entries: list[FaultEntry] = field(default_factory=list)

    def __post_init__(self):
        self.entries.sort(key=lambda e: e.sort_time)

    def timed(self) -> list[FaultEntry]:
        return [e for e in self.entries if e.at is not None]

    def triggered(self) -> list[FaultEntry]:
        return [e for e in self.entries if e.at is None]

    def fresh(self) -> "FaultScript":
        return FaultScript([replace(e, fired=False, fired_at=None) for e in self.entries])


def parse_when(value: Any) -> tuple[Optional[int], Optional[tuple[str, float]]]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if value < 0:
            raise FaultConfigError(f"fault time must be >= 0, got {value}")
        return int(value), None
    if isinstance(value, str) and "=" in value:
        name, _, frac = value.partition("=")
        name = name.strip()
        if name not in ("map_progress", "spills"):
            raise FaultConfigError(f"unknown fault trigger {name!r}")
        return None, (name, float(frac))
    raise FaultConfigError(f"cannot parse fault time {value!r}")


def parse_entry(raw: dict) -> FaultEntry:
    try:
        kind = FaultKind(raw["kind"])
    except (KeyError, ValueError) as exc:
        raise FaultConfigError(f"bad fault kind in {raw!r}") from exc
    at, trigger = parse_when(raw.get("at", 0))
    if trigger and trigger[0] == "spills" and kind is not FaultKind.DISK_EXCEPTION:
        raise FaultConfigError("spills= trigger only applies to disk_exception")
    duration = raw.get("duration_ms")
    return FaultEntry(
        kind=kind,
        at=at,
        trigger=trigger,
        target=raw.get("target", "random"),
        job=int(raw.get("job", 0)),
        duration_ms=None if duration is None else int(duration),
        factor=float(raw.get("factor", 1.0)),
    )


def parse_script(raw_entries: list[dict]) -> FaultScript:
    return FaultScript([parse_entry(r) for r in raw_entries or []])


@dataclass
class RandomFaultSpec:
    count: int = 0
    failure_ratio: float = 0.5
    rate_per_ms: float = 1 / 60_000
    start_ms: int = 0
    fail_duration_ms: Optional[int] = None
    delay_mean_s: float = 20.0
    slow_factor: float = 4.0
    delay_kind: str = "node_slow"
    task_failures: int = 0
    nodes: Optional[list[int]] = None


def poisson(rng: random.Random, mean: float) -> int:
    """Knuth's multiplication method; fine for the small means used here."""
    if mean <= 0:
        return 0
    limit = math.exp(-mean)
    k = 0
    p = rng.random()
    while p > limit:
        k += 1
        p *= rng.random()
    return k


def expand_random_faults(spec: RandomFaultSpec, rng: random.Random, num_nodes: int) -> FaultScript:
    """Concrete fault script from counts, a failure ratio and Poisson timing.

    Exactly ``round(failure_ratio * count)`` entries are node failures, the
    rest are delays. Activation instants follow a Poisson process from
    ``start_ms``; delay durations are Poisson distributed (seconds).
    """
    if not 0.0 <= spec.failure_ratio <= 1.0:
        raise FaultConfigError(f"failure ratio {spec.failure_ratio} outside [0, 1]")
    if spec.count < 0:
        raise FaultConfigError("fault count must be >= 0")
    n_fail = int(round(spec.failure_ratio * spec.count))
    kinds = [True] * n_fail + [False] * (spec.count - n_fail)
    rng.shuffle(kinds)
    pool = list(spec.nodes) if spec.nodes is not None else list(range(num_nodes))
    entries = []
    t = float(spec.start_ms)
    for is_failure in kinds:
        t += rng.expovariate(spec.rate_per_ms) if spec.rate_per_ms > 0 else 0.0
        node = rng.choice(pool)
        if is_failure:
            entries.append(
                FaultEntry(FaultKind.NODE_FAIL, at=int(t), target=node, duration_ms=spec.fail_duration_ms)
            )
        else:
            duration = max(1, poisson(rng, spec.delay_mean_s)) * 1000
            entries.append(
                FaultEntry(
                    FaultKind(spec.delay_kind), at=int(t), target=node,
                    duration_ms=duration, factor=spec.slow_factor,
                )
            )
    t = float(spec.start_ms)
    for _ in range(spec.task_failures):
        t += rng.expovariate(spec.rate_per_ms) if spec.rate_per_ms > 0 else 0.0
        entries.append(FaultEntry(FaultKind.DISK_EXCEPTION, at=int(t), target="running_map:random"))
    return FaultScript(entries)


# -- activation --------------------------------------------------------------


def resolve_node(entry: FaultEntry, sim: "Simulation") -> Optional[int]:
    target = entry.target
    rng = sim.rng.stream("faults")
    if isinstance(target, int):
        return target if 0 <= target < len(sim.cluster) else None
    if target == "random":
        return rng.randrange(len(sim.cluster))
    if isinstance(target, str) and ":" in target:
        what, _, arg = target.partition(":")
        job = sim.jobs_by_id.get(int(arg))
        if job is None:
            return None
        if what == "job_home":
            return job.home_node
        if what == "job_node":
            hosts = sorted({a.node_id for t in job.tasks() for a in t.running_attempts()})
            return rng.choice(hosts) if hosts else None
    if isinstance(target, str) and target.isdigit():
        return int(target)
    return None


def parse_selector(target: str) -> dict[str, str]:
    out = {}
    for part in str(target).split(","):
        if "=" in part:
            k, _, v = part.partition("=")
            out[k.strip()] = v.strip()
    return out


def select_map_tasks(entry: FaultEntry, sim: "Simulation") -> list:
    """Map tasks addressed by a task selector."""
    target = entry.target
    rng = sim.rng.stream("faults")
    if target == "running_map:random":
        running = [
            a.task for job in sim.active_jobs() for a in sim.running_map_attempts(job)
        ]
        return [rng.choice(running)] if running else []
    sel = parse_selector(target)
    job = sim.jobs_by_id.get(int(sel.get("job", entry.job)))
    if job is None:
        return []
    if "map" in sel:
        if sel["map"] == "random":
            return [rng.choice(job.maps)]
        idx = int(sel["map"])
        return [job.maps[idx]] if 0 <= idx < len(job.maps) else []
    if "completed_map" in sel:
        done = sorted((t for t in job.maps if t.done), key=lambda t: (t.completed_at, t.index))
        if sel["completed_map"] == "random":
            return [rng.choice(done)] if done else []
        idx = int(sel["completed_map"])
        return [done[idx]] if 0 <= idx < len(done) else []
    return []


def activate(entry: FaultEntry, sim: "Simulation") -> bool:
    """Apply one fault. Returns False (and leaves a trace warning) if nothing matched."""
    entry.fired = True
    entry.fired_at = sim.now
    kind = entry.kind
    if kind in (FaultKind.NODE_FAIL, FaultKind.NODE_SLOW, FaultKind.NET_DELAY):
        node = resolve_node(entry, sim)
        if node is None:
            return _miss(entry, sim)
        sim.note("fault", f"{entry.describe()} node={node}")
        if kind is FaultKind.NODE_FAIL:
            sim.fail_node(node, entry.duration_ms)
        elif kind is FaultKind.NODE_SLOW:
            sim.slow_node(node, entry.factor, entry.duration_ms)
        else:
            sim.delay_network(node, entry.factor, entry.duration_ms)
        return True
    if kind is FaultKind.MOF_LOSS:
        tasks = [t for t in select_map_tasks(entry, sim) if t.done]
        if not tasks:
            return _miss(entry, sim)
        for task in tasks:
            sim.note("fault", f"{entry.describe()} task={task.task_id}")
            sim.lose_outputs(task)
        return True
    if kind is FaultKind.DISK_EXCEPTION:
        tasks = select_map_tasks(entry, sim)
        attempts = [a for t in tasks for a in t.running_attempts()]
        if not attempts:
            return _miss(entry, sim)
        for attempt in attempts:
            sim.note("fault", f"{entry.describe()} attempt={attempt.attempt_id}")
            sim.fail_attempt(attempt, reason="disk_exception")
        return True
    return _miss(entry, sim)


def _miss(entry: FaultEntry, sim: "Simulation") -> bool:
    sim.note("fault-warning", f"no match for {entry.describe()}")
    log.debug("fault selector matched nothing: %s", entry.describe())
    return False
