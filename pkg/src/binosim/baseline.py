"""YARN's default serial speculator.

One task per job at a time, a fixed delay between launches, and only running
tasks are candidates. Those restrictions are deliberate: they are what makes
the policy blind to lost map output and to jobs packed onto one node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .engine import WAKEUP
from .mapreduce import Job, Task, TaskKind, laggards, progress_rate
from .policy import Policy


@dataclass
class BaselineConfig:
    speculator_interval_ms: int = 1_000
    fixed_delay_ms: int = 15_000
    slow_task_threshold: float = 1.0
    max_concurrent_speculations: int = 1

    def __post_init__(self):
        if self.speculator_interval_ms <= 0 or self.fixed_delay_ms <= 0:
            raise ValueError("baseline durations must be positive")
        if self.max_concurrent_speculations < 1:
            raise ValueError("speculation cap must be >= 1")


def baseline_assess(
    candidates: list[tuple[Task, float, int]], threshold: float
) -> Optional[Task]:
    """Pick the slowest task lagging more than ``threshold`` sigma behind its kind.

    ``candidates`` holds ``(task, zeta, tau)`` for running tasks that have no
    second attempt yet. Map and reduce tasks are compared separately.
    """
    best: Optional[tuple[float, str, Task]] = None
    for kind in (TaskKind.MAP, TaskKind.REDUCE):
        rates = [
            (task, progress_rate(zeta, tau))
            for task, zeta, tau in candidates
            if task.kind is kind and tau > 0
        ]
        if len(rates) < 2:
            continue
        slow = laggards([r for _, r in rates], threshold)
        for (task, rate), lagging in zip(rates, slow):
            if lagging:
                key = (rate, task.task_id, task)
                if best is None or key[:2] < best[:2]:
                    best = key
    return None if best is None else best[2]


class BaselineSpeculator(Policy):
    name = "yarn"

    def __init__(self, sim, config: Optional[BaselineConfig] = None):
        super().__init__(sim)
        self.config = config or BaselineConfig()
        self.last_launch: dict[int, float] = {}

    def start(self) -> None:
        self.sim.every(self.config.speculator_interval_ms, WAKEUP, self.wakeup, "baseline")

    def wakeup(self) -> None:
        now = self.sim.now
        for job in self.sim.active_jobs():
            if now - self.last_launch.get(job.job_id, -math.inf) < self.config.fixed_delay_ms:
                continue
            if self.running_speculations(job) >= self.config.max_concurrent_speculations:
                continue
            task = baseline_assess(self.snapshot(job, now), self.config.slow_task_threshold)
            if task is None:
                continue
            self.last_launch[job.job_id] = now
            origin = task.running_attempts()[0].node_id
            self.sim.request_attempt(
                task, exclude=(origin,), speculative=True, reason="baseline-speculation"
            )

    def snapshot(self, job: Job, now: int) -> list[tuple[Task, float, int]]:
        out = []
        for task in job.tasks():
            if task.done:
                continue
            running = task.running_attempts()
            if len(running) != 1 or self.sim.has_pending_request(task):
                continue
            attempt = running[0]
            out.append((task, attempt.reported_zeta, attempt.running_time(now)))
        return out

    def running_speculations(self, job: Job) -> int:
        return sum(
            1
            for task in job.tasks()
            for a in task.running_attempts()
            if a.speculative
        ) + self.sim.pending_speculative(job)
