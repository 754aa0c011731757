"""Hooks a speculation policy can implement, plus the no-speculation policy."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .cluster import HeartbeatReport
    from .mapreduce import Task, TaskAttempt
    from .simulation import Simulation


class Policy:
    """Default YARN framework behaviour with speculation switched off.

    Used for fault-free reference runs. Subclasses override the hooks they
    care about.
    """

    name = "none"

    def __init__(self, sim: "Simulation"):
        self.sim = sim

    def start(self) -> None:
        pass

    def on_heartbeat(self, node_id: int, report: "HeartbeatReport") -> None:
        pass

    def on_fetch_failure(self, reduce_attempt: "TaskAttempt", map_task: "Task", count: int) -> None:
        pass

    def absorbs_fetch_limit(self, map_task: "Task") -> bool:
        return False

    def on_attempt_failed(self, attempt: "TaskAttempt") -> None:
        self.sim.relaunch(attempt.task)

    def on_attempt_succeeded(self, attempt: "TaskAttempt") -> None:
        pass

    def on_job_done(self, job) -> None:
        pass
