"""The MapReduce framework running on the event engine.

:class:`Simulation` plays both ResourceManager and per-job ApplicationMaster:
it owns the container request queue, drives attempt progress between
milestones, runs the shuffle, applies faults and hands policy hooks the
events they react to.

Progress is piecewise linear. Between rate changes an attempt is only
touched at milestones (spill boundaries, completion) or when something needs
its current ProgressScore; :meth:`Simulation.sync` brings it up to date.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import engine as ev
from .baseline import BaselineSpeculator
from .bino import BinoSpeculator
from .cluster import Cluster
from .engine import RngStreams, Simulator
from .faults import (
    FaultEntry,
    FaultKind,
    FaultScript,
    activate,
    expand_random_faults,
    select_map_tasks,
)
from .mapreduce import (
    AttemptState,
    FetchFailureCounter,
    Job,
    JobState,
    OutputStatus,
    REDUCE_WEIGHT,
    SpillEntry,
    SpillLog,
    Task,
    TaskAttempt,
    TaskKind,
    advance_map_attempt,
    discard_duplicate_outputs,
    kill_attempt,
    reduce_progress,
    retain_dual_outputs,
)
from .policy import Policy

# progress never reaches a milestone through sync(); only milestone events cross it
_EDGE = 1e-9

# heartbeats carry progress with finite precision; keeps float residue from
# the milestone cap out of rate comparisons
REPORT_DIGITS = 6

PRIO_RECOVERY = 0
PRIO_MAP = 1
PRIO_REDUCE = 2


@dataclass(eq=False)
class Request:
    seq: int
    task: Task
    prio: int
    preferred: tuple = ()
    exclude: tuple = ()
    fallback: bool = True
    speculative: bool = False
    resume: Optional[SpillEntry] = None
    reason: str = ""
    episode: Optional[int] = None
    wave: Optional[int] = None
    origin: Optional[TaskAttempt] = None
    issued_at: int = 0
    attempt: Optional[TaskAttempt] = None
    cancelled: bool = False


@dataclass
class LaunchRecord:
    time: int
    job_id: int
    task_id: str
    attempt_id: str
    node_id: int
    reason: str
    speculative: bool
    issued_at: int
    resume_spill: int = 0
    episode: Optional[int] = None
    wave: Optional[int] = None


class Simulation:
    def __init__(self, scenario, policy: str = "bino", seed: int = 0,
                 faults: bool = True, trace: bool = False):
        self.scenario = scenario
        self.seed = seed
        self.rng = RngStreams(seed)
        self.sim = Simulator(max_events=scenario.max_events, record_trace=trace)
        cc = scenario.cluster
        bc = scenario.bino
        self.cluster = Cluster(
            cc.nodes, cc.slots_per_node, bc.size_neighbor, cc.heartbeat_ms,
            bc.window_length, bc.safety_factor,
        )
        self.framework = scenario.framework
        self.counters = FetchFailureCounter()
        self.net_factor = [1.0] * cc.nodes
        self.jobs: list[Job] = scenario.build_jobs(self.rng)
        self.jobs_by_id = {j.job_id: j for j in self.jobs}
        self.attempts: dict[str, TaskAttempt] = {}
        self._job_running: dict[int, int] = {}
        self.launches: list[LaunchRecord] = []
        self.fetch_failures: list[tuple[int, str, str, int]] = []
        self.map_reports: list[tuple[int, str, str]] = []
        self.failures: list[tuple[int, str, str]] = []
        self._req_seq = itertools.count()
        self._pending: dict[int, list] = {}
        self._pending_by_task: dict[int, list[Request]] = {}
        self._heartbeats: dict[int, ev.SimEvent] = {}
        self._restores: dict[int, ev.SimEvent] = {}
        self._slow_ends: dict[int, ev.SimEvent] = {}
        self._net_ends: dict[int, ev.SimEvent] = {}
        self.finished = False
        script = scenario.fault_script() if faults else FaultScript()
        if faults and scenario.random_faults is not None:
            extra = expand_random_faults(
                scenario.random_faults, self.rng.stream("faults"), cc.nodes
            )
            script = FaultScript(script.entries + extra.entries)
        self.fault_script = script
        self._progress_triggers = [e for e in script.entries if e.trigger and e.trigger[0] == "map_progress"]
        self._spill_triggers = [e for e in script.entries if e.trigger and e.trigger[0] == "spills"]
        self.policy = make_policy(policy, self, scenario)

    # -- small helpers ---------------------------------------------------------

    @property
    def now(self) -> int:
        return self.sim.now

    def note(self, kind: str, payload: str) -> None:
        self.sim.note(kind, payload)

    def every(self, interval: int, kind: str, fn: Callable[[], None], payload: str = "") -> None:
        def tick():
            if self.finished:
                return
            fn()
            if not self.finished:
                self.sim.schedule_in(interval, kind, tick, payload)
        self.sim.schedule_in(interval, kind, tick, payload)

    def active_jobs(self) -> list[Job]:
        return [j for j in self.jobs if j.state is JobState.RUNNING]

    def attempts_on(self, node_id: int) -> list[TaskAttempt]:
        ids = sorted(self.cluster.nodes[node_id].running_attempts)
        return [self.attempts[i] for i in ids]

    def jobs_on_node(self, node_id: int) -> list[Job]:
        seen = {}
        for a in self.attempts_on(node_id):
            seen.setdefault(a.task.job.job_id, a.task.job)
        return [seen[k] for k in sorted(seen)]

    def running_map_attempts(self, job: Job) -> list[TaskAttempt]:
        return [a for t in job.maps for a in t.running_attempts()]

    def progressing(self, attempt: TaskAttempt) -> bool:
        """Running and not merely parked waiting on map output."""
        if not attempt.running:
            return False
        if attempt.kind is TaskKind.MAP:
            return True
        return attempt.in_reduce_phase or bool(attempt.fetching)

    def has_pending_request(self, task: Task) -> bool:
        return any(not r.cancelled for r in self._pending_by_task.get(id(task), ()))

    def pending_speculative(self, job: Job) -> int:
        return sum(
            1 for _, _, r in self._pending.get(job.job_id, ()) if not r.cancelled and r.speculative
        )

    # -- running -----------------------------------------------------------------

    def run(self, until: Optional[int] = None):
        for job in self.jobs:
            self.sim.schedule(job.arrival_time, ev.ARRIVAL, lambda j=job: self.arrive(j), f"job={job.job_id}")
        for node in self.cluster.nodes:
            self._schedule_heartbeat(node.node_id, self.cluster.heartbeat_ms)
        for entry in self.fault_script.timed():
            self.sim.schedule(entry.at, ev.FAULT, lambda e=entry: self.fire(e), entry.describe())
        self.every(self.framework.am_tick_ms, ev.WAKEUP, self.am_tick, "am")
        self.policy.start()
        if not self.jobs:
            self.finished = True
        summary = self.sim.run(until=until,
                               post_event=self._after_event if self._progress_triggers else None,
                               stop=lambda: self.finished)
        return summary

    def _after_event(self) -> None:
        for entry in self._progress_triggers:
            if entry.fired:
                continue
            job = self.jobs_by_id.get(entry.job)
            if job is None or job.state is not JobState.RUNNING:
                continue
            if self.map_progress(job) >= entry.trigger[1] - 1e-12:
                self.fire(entry)

    def map_progress(self, job: Job) -> float:
        now = self.now
        total = 0.0
        for task in job.maps:
            if task.done:
                total += 1.0
                continue
            best = 0.0
            for a in task.running_attempts():
                z = a.zeta
                if a.rate > 0:
                    z = min(1.0, z + (now - a.last_update) * a.rate)
                best = max(best, z)
            total += best
        return total / len(job.maps)

    def fire(self, entry: FaultEntry) -> None:
        if entry.fired or self.finished:
            return
        activate(entry, self)

    # -- heartbeats and the AM tick ------------------------------------------------

    def _schedule_heartbeat(self, node_id: int, delay: int) -> None:
        self._heartbeats[node_id] = self.sim.schedule_in(
            delay, ev.HEARTBEAT, lambda: self.heartbeat(node_id), f"node={node_id}"
        )

    def heartbeat(self, node_id: int) -> None:
        if self.finished:
            return
        report = self.cluster.emit_heartbeat(node_id, self.now)
        if report is None:
            return
        for a in self.attempts_on(node_id):
            self.sync(a)
            a.reported_zeta = max(a.reported_zeta, round(a.zeta, REPORT_DIGITS))
            a.reported_at = self.now
        self.policy.on_heartbeat(node_id, report)
        self._heartbeats[node_id] = self.sim.schedule(
            report.next_at, ev.HEARTBEAT, lambda: self.heartbeat(node_id), f"node={node_id}"
        )

    def am_tick(self) -> None:
        timeout = self.framework.task_timeout_ms
        for aid in sorted(self.attempts):
            a = self.attempts[aid]
            if a.running and self.now - a.reported_at > timeout:
                self.note("timeout", f"attempt={aid}")
                self.fail_attempt(a, reason="timeout")

    # -- progress ------------------------------------------------------------------

    def rate_for(self, attempt: TaskAttempt) -> float:
        node = self.cluster.nodes[attempt.node_id]
        if node.failed or not attempt.running:
            return 0.0
        factor = node.rate_factor
        if attempt.kind is TaskKind.MAP:
            return 1.0 / (attempt.task.nominal_ms * factor)
        if attempt.in_reduce_phase:
            return REDUCE_WEIGHT / (attempt.task.nominal_ms * factor)
        return 0.0

    def _next_target(self, attempt: TaskAttempt) -> float:
        if attempt.kind is TaskKind.REDUCE:
            return 1.0
        spills = attempt.task.job.profile.num_spills
        k = math.floor(attempt.zeta * spills + 1e-9) + 1
        return min(1.0, k / spills)

    def sync(self, attempt: TaskAttempt) -> None:
        dt = self.now - attempt.last_update
        if dt > 0 and attempt.running and attempt.rate > 0:
            cap = self._next_target(attempt) - _EDGE
            attempt.zeta = max(attempt.zeta, min(cap, attempt.zeta + dt * attempt.rate))
        attempt.last_update = self.now

    def reschedule(self, attempt: TaskAttempt) -> None:
        """Recompute rate and next milestone after anything that changes speed."""
        self.sync(attempt)
        self.sim.cancel(attempt.milestone)
        attempt.milestone = None
        attempt.rate = self.rate_for(attempt)
        if attempt.rate <= 0:
            return
        target = self._next_target(attempt)
        wait = max(0, math.ceil((target - attempt.zeta) / attempt.rate - 1e-9))
        attempt.milestone = self.sim.schedule_in(
            wait, ev.PROGRESS if target < 1.0 else ev.COMPLETE,
            lambda: self.milestone(attempt, target), f"attempt={attempt.attempt_id}",
        )

    def milestone(self, attempt: TaskAttempt, target: float) -> None:
        attempt.milestone = None
        if not attempt.running:
            return
        if attempt.kind is TaskKind.MAP:
            spills = attempt.task.job.profile.num_spills
            advance_map_attempt(attempt, self.now - attempt.last_update, spills, self.now)
            attempt.zeta = target
            if target >= 1.0:
                self.succeed(attempt)
                return
            k = round(target * spills)
            for entry in self._spill_triggers:
                if entry.fired:
                    continue
                if int(entry.trigger[1]) == k and attempt.task in select_map_tasks(entry, self):
                    entry.fired = True
                    entry.fired_at = self.now
                    self.note("fault", f"{entry.describe()} attempt={attempt.attempt_id}")
                    self.fail_attempt(attempt, reason="disk_exception")
                    return
        else:
            attempt.zeta = 1.0
            self.succeed(attempt)
            return
        self.reschedule(attempt)

    # -- container requests -----------------------------------------------------------

    def request_attempt(self, task: Task, preferred=(), exclude=(), fallback: bool = True,
                        speculative: bool = False, resume: Optional[SpillEntry] = None,
                        reason: str = "", prio: Optional[int] = None, episode=None,
                        wave=None, origin=None) -> Request:
        if prio is None:
            prio = PRIO_RECOVERY if (speculative or reason) else (
                PRIO_MAP if task.kind is TaskKind.MAP else PRIO_REDUCE
            )
        req = Request(
            next(self._req_seq), task, prio, tuple(preferred), tuple(exclude), fallback,
            speculative, resume, reason, episode, wave, origin, self.now,
        )
        if speculative:
            self.note("decision", f"task={task.task_id} reason={reason} prefer={list(preferred)}")
        job_id = task.job.job_id
        heapq.heappush(self._pending.setdefault(job_id, []), (req.prio, req.seq, req))
        self._pending_by_task.setdefault(id(task), []).append(req)
        if speculative or reason:
            self._try_launch(req)
        self.dispatch()
        return req

    def cancel_request(self, req: Request) -> None:
        req.cancelled = True
        self._drop_request(req)

    def _drop_request(self, req: Request) -> None:
        lst = self._pending_by_task.get(id(req.task))
        if lst and req in lst:
            lst.remove(req)

    def _try_launch(self, req: Request) -> bool:
        if req.cancelled or req.attempt is not None:
            return False
        if self._obsolete(req):
            req.cancelled = True
            self._drop_request(req)
            return False
        grant = self.cluster.allocate_container(
            req.task.job.job_id, req.preferred, req.exclude, req.fallback
        )
        if grant is None:
            return False
        req.cancelled = True
        self._drop_request(req)
        self.launch(req, *grant)
        return True

    def relaunch(self, task: Task) -> Optional[Request]:
        if task.done or task.running_attempts() or self.has_pending_request(task):
            return None
        return self.request_attempt(task, reason="relaunch")

    def dispatch(self) -> None:
        """Hand free slots to queued requests, fewest-running job first."""
        skipped: dict[int, list] = {}
        while True:
            if not any(self.cluster.free_slot_count(n.node_id) for n in self.cluster.nodes):
                break
            best = None
            for job_id, heap in list(self._pending.items()):
                while heap and (heap[0][2].cancelled or self._obsolete(heap[0][2])):
                    _, _, dead = heapq.heappop(heap)
                    if not dead.cancelled:
                        dead.cancelled = True
                        self._drop_request(dead)
                if not heap:
                    continue
                job = self.jobs_by_id[job_id]
                key = (self._running_count(job), job.arrival_time, job_id)
                if best is None or key < best[0]:
                    best = (key, job_id)
            if best is None:
                break
            job_id = best[1]
            _, _, req = heapq.heappop(self._pending[job_id])
            if not self._try_launch(req):
                skipped.setdefault(job_id, []).append(req)
        for job_id, reqs in skipped.items():
            # a launch above may have finished the job and dropped its queue
            if self.jobs_by_id[job_id].state is not JobState.RUNNING:
                continue
            for req in reqs:
                heapq.heappush(self._pending.setdefault(job_id, []), (req.prio, req.seq, req))
        for job_id in [k for k, v in self._pending.items() if not v]:
            del self._pending[job_id]

    def _obsolete(self, req: Request) -> bool:
        """A request whose task no longer needs another attempt."""
        task = req.task
        if task.job.state is not JobState.RUNNING:
            return True
        if not task.done:
            return False
        # a completed map whose every output copy is gone still needs one
        return task.kind is TaskKind.REDUCE or task.live_output() is not None

    def _running_count(self, job: Job) -> int:
        return self._job_running.get(job.job_id, 0)

    # -- attempt lifecycle ----------------------------------------------------------

    def launch(self, req: Request, node_id: int, slot: int) -> TaskAttempt:
        task = req.task
        job = task.job
        attempt = TaskAttempt(
            task.next_attempt_id(), task, node_id, slot, self.now,
            speculative=req.speculative, last_update=self.now, reported_at=self.now,
        )
        task.attempts.append(attempt)
        self.attempts[attempt.attempt_id] = attempt
        self._job_running[job.job_id] = self._job_running.get(job.job_id, 0) + 1
        self.cluster.occupy(node_id, attempt.attempt_id)
        req.attempt = attempt
        if req.speculative:
            job.speculative_launches += 1
        if task.kind is TaskKind.MAP:
            attempt.spill_log = SpillLog(node_id)
            if req.resume is not None:
                spills = job.profile.num_spills
                prior = req.origin.spill_log.entries if req.origin and req.origin.spill_log else []
                for e in prior:
                    if e.index <= req.resume.index:
                        attempt.spill_log.entries.append(e)
                attempt.resume_spill = req.resume.index
                attempt.resume_offset = req.resume.offset
                attempt.zeta = req.resume.index / spills
        self.launches.append(LaunchRecord(
            self.now, job.job_id, task.task_id, attempt.attempt_id, node_id, req.reason,
            req.speculative, req.issued_at, attempt.resume_spill, req.episode, req.wave,
        ))
        self.note("launch", f"attempt={attempt.attempt_id} node={node_id} reason={req.reason or 'normal'}")
        if task.kind is TaskKind.REDUCE:
            for m in job.maps:
                if m.done:
                    self.start_fetch(attempt, m)
            self._maybe_enter_reduce(attempt)
        self.reschedule(attempt)
        return attempt

    def _finish(self, attempt: TaskAttempt, state: AttemptState) -> None:
        self.sync(attempt)
        attempt.state = state
        attempt.end_time = self.now
        self._release(attempt)

    def _release(self, attempt: TaskAttempt) -> None:
        if self.attempts.pop(attempt.attempt_id, None) is not None:
            self._job_running[attempt.task.job.job_id] -= 1
        self.sim.cancel(attempt.milestone)
        attempt.milestone = None
        for h in list(attempt.fetching.values()) + list(attempt.retry_events.values()):
            self.sim.cancel(h)
        attempt.fetching.clear()
        attempt.retry_events.clear()
        self.cluster.release(attempt.node_id, attempt.slot, attempt.attempt_id)

    def kill(self, attempt: TaskAttempt) -> None:
        if not attempt.running:
            return
        self.sync(attempt)
        kill_attempt(attempt, self.now)
        self._release(attempt)
        self.note("kill", f"attempt={attempt.attempt_id}")

    def succeed(self, attempt: TaskAttempt) -> None:
        task = attempt.task
        job = task.job
        self._finish(attempt, AttemptState.SUCCEEDED)
        self.note("succeed", f"attempt={attempt.attempt_id}")
        if task.kind is TaskKind.MAP:
            first = not task.done
            if first:
                task.done = True
                task.completed_at = self.now
            retain_dual_outputs(task, attempt)
            for other in task.running_attempts():
                self.kill(other)
            for r in job.reduces:
                for ra in r.running_attempts():
                    self.start_fetch(ra, task, restart=True)
            if first and not job.reduces_requested:
                if job.completed_maps() >= job.profile.reduce_slowstart * len(job.maps):
                    job.reduces_requested = True
                    for r in job.reduces:
                        self.request_attempt(r, preferred=(job.home_node,))
            if not job.reduces and all(t.done for t in job.maps):
                self.complete_job(job)
        else:
            if not task.done:
                task.done = True
                task.completed_at = self.now
                for other in task.running_attempts():
                    self.kill(other)
            if all(t.done for t in job.reduces):
                self.complete_job(job)
        self.policy.on_attempt_succeeded(attempt)
        self.dispatch()

    def fail_attempt(self, attempt: TaskAttempt, reason: str = "", handle: bool = True) -> None:
        if not attempt.running:
            return
        task = attempt.task
        self._finish(attempt, AttemptState.FAILED)
        task.failures += 1
        self.failures.append((self.now, attempt.attempt_id, reason))
        self.note("attempt-failed", f"attempt={attempt.attempt_id} reason={reason}")
        if not handle:
            return
        self._after_failure(attempt)

    def _after_failure(self, attempt: TaskAttempt) -> None:
        task = attempt.task
        job = task.job
        if job.state is not JobState.RUNNING:
            return
        if task.failures >= self.framework.max_attempts:
            self.fail_job(job)
            return
        if not task.done:
            self.policy.on_attempt_failed(attempt)
        self.dispatch()

    def fail_job(self, job: Job) -> None:
        job.state = JobState.FAILED
        job.completion_time = None
        self.note("job-failed", f"job={job.job_id}")
        self._retire(job)

    def complete_job(self, job: Job) -> None:
        if job.state is not JobState.RUNNING:
            return
        job.state = JobState.DONE
        job.completion_time = self.now
        self.note("job-done", f"job={job.job_id}")
        self._retire(job)
        for task in job.maps:
            discard_duplicate_outputs(task)

    def _retire(self, job: Job) -> None:
        for task in job.tasks():
            for a in task.running_attempts():
                self.kill(a)
            for r in self._pending_by_task.get(id(task), []):
                r.cancelled = True
            self._pending_by_task.pop(id(task), None)
        self._pending.pop(job.job_id, None)
        self.policy.on_job_done(job)
        if all(j.state in (JobState.DONE, JobState.FAILED) for j in self.jobs):
            self.finished = True

    def arrive(self, job: Job) -> None:
        job.state = JobState.RUNNING
        self.note("arrival", f"job={job.job_id} size={job.input_size}")
        for task in job.maps:
            self.request_attempt(task, preferred=(job.home_node,))
        if job.profile.reduce_slowstart <= 0 and job.reduces:
            job.reduces_requested = True
            for r in job.reduces:
                self.request_attempt(r, preferred=(job.home_node,))
        self.dispatch()

    # -- shuffle ---------------------------------------------------------------------

    def fetch_ms(self, reducer: TaskAttempt, copy) -> int:
        job = reducer.task.job
        base = job.partition_bytes() / job.profile.shuffle_throughput
        factor = max(
            self.cluster.nodes[reducer.node_id].rate_factor,
            self.net_factor[copy.node_id],
            self.net_factor[reducer.node_id],
        )
        return max(1, math.ceil(base * factor))

    def start_fetch(self, reducer: TaskAttempt, map_task: Task, restart: bool = False) -> None:
        mid = map_task.task_id
        if not reducer.running or mid in reducer.fetched or mid in reducer.fetching:
            return
        if self.cluster.nodes[reducer.node_id].failed:
            return
        retry = reducer.retry_events.pop(mid, None)
        if retry is not None:
            if not restart:
                reducer.retry_events[mid] = retry
                return
            self.sim.cancel(retry)
        copy = map_task.live_output()
        if copy is None or self.cluster.nodes[copy.node_id].failed:
            self.fetch_failed(reducer, map_task)
            return
        reducer.fetching[mid] = self.sim.schedule_in(
            self.fetch_ms(reducer, copy), ev.FETCH,
            lambda: self.fetch_done(reducer, map_task, copy),
            f"reduce={reducer.attempt_id} map={mid}",
        )

    def fetch_done(self, reducer: TaskAttempt, map_task: Task, copy) -> None:
        mid = map_task.task_id
        reducer.fetching.pop(mid, None)
        if not reducer.running:
            return
        if copy.status is OutputStatus.AVAILABLE and not self.cluster.nodes[copy.node_id].failed:
            reducer.fetched.add(mid)
            self.counters.success(reducer.task.task_id, mid)
            self.sync(reducer)
            reducer.zeta = max(reducer.zeta, reduce_progress(len(reducer.fetched), len(reducer.task.job.maps)))
            self._maybe_enter_reduce(reducer)
            return
        self.fetch_failed(reducer, map_task)

    def fetch_failed(self, reducer: TaskAttempt, map_task: Task) -> None:
        mid = map_task.task_id
        rid = reducer.task.task_id
        count = self.counters.failure(rid, mid)
        self.fetch_failures.append((self.now, reducer.attempt_id, mid, count))
        self.note("fetch-failure", f"reduce={reducer.attempt_id} map={mid} count={count}")
        self.policy.on_fetch_failure(reducer, map_task, count)
        if not reducer.running:
            return
        if count >= self.framework.max_fetch_failures and not self.policy.absorbs_fetch_limit(map_task):
            self.fetch_limit(reducer)
            return
        reducer.retry_events[mid] = self.sim.schedule_in(
            self.framework.fetch_retry_ms, ev.FETCH,
            lambda: self._retry_fetch(reducer, map_task),
            f"retry reduce={reducer.attempt_id} map={mid}",
        )

    def _retry_fetch(self, reducer: TaskAttempt, map_task: Task) -> None:
        reducer.retry_events.pop(map_task.task_id, None)
        if map_task.done:
            self.start_fetch(reducer, map_task)

    def fetch_limit(self, reducer: TaskAttempt) -> None:
        """Too many failed fetches: report the maps lost and, optionally, give up."""
        rid = reducer.task.task_id
        for mid in self.counters.outstanding(rid):
            map_task = self._task_by_id(reducer.task.job, mid)
            if map_task is None or not map_task.done or self.policy.absorbs_fetch_limit(map_task):
                continue
            self.declare_map_lost(map_task, rid)
        if self.framework.reduce_fails_on_fetch_limit:
            self.fail_attempt(reducer, reason="fetch_limit")

    def declare_map_lost(self, map_task: Task, reporter: str) -> None:
        self.map_reports.append((self.now, map_task.task_id, reporter))
        self.note("map-lost", f"map={map_task.task_id} by={reporter}")
        map_task.done = False
        map_task.completed_at = None
        for copy in map_task.outputs:
            copy.status = OutputStatus.LOST
        map_task.outputs = []
        self.counters.reset_map(map_task.task_id)
        for r in map_task.job.reduces:
            for ra in r.running_attempts():
                h = ra.retry_events.pop(map_task.task_id, None)
                self.sim.cancel(h)
                h = ra.fetching.pop(map_task.task_id, None)
                self.sim.cancel(h)
        self.relaunch(map_task)

    def _task_by_id(self, job: Job, task_id: str) -> Optional[Task]:
        for t in job.maps:
            if t.task_id == task_id:
                return t
        return None

    def _maybe_enter_reduce(self, reducer: TaskAttempt) -> None:
        job = reducer.task.job
        if reducer.in_reduce_phase or len(reducer.fetched) < len(job.maps):
            return
        reducer.in_reduce_phase = True
        reducer.zeta = max(reducer.zeta, reduce_progress(len(job.maps), len(job.maps)))
        self.reschedule(reducer)

    # -- faults -----------------------------------------------------------------------

    def fail_node(self, node_id: int, duration_ms: Optional[int] = None) -> None:
        if not self.cluster.fail_node(node_id):
            return
        for a in self.attempts_on(node_id):
            self.reschedule(a)
            for h in list(a.fetching.values()) + list(a.retry_events.values()):
                self.sim.cancel(h)
            a.fetching.clear()
            a.retry_events.clear()
        for job in self.jobs:
            for task in job.maps:
                for copy in task.outputs:
                    if copy.node_id == node_id:
                        copy.status = OutputStatus.LOST
        self.sim.cancel(self._heartbeats.pop(node_id, None))
        if duration_ms is not None:
            self.sim.cancel(self._restores.pop(node_id, None))
            self._restores[node_id] = self.sim.schedule_in(
                duration_ms, ev.FAULT, lambda: self.restore_node(node_id), f"restore node={node_id}"
            )

    def restore_node(self, node_id: int) -> None:
        self._restores.pop(node_id, None)
        if not self.cluster.nodes[node_id].failed:
            return
        lost = self.attempts_on(node_id)
        for a in lost:
            self.fail_attempt(a, reason="node_restart", handle=False)
        self.cluster.restore_node(node_id)
        self.note("restore", f"node={node_id}")
        self.heartbeat(node_id)
        for a in lost:
            self._after_failure(a)
        self.dispatch()

    def slow_node(self, node_id: int, factor: float, duration_ms: Optional[int]) -> None:
        self.cluster.set_slow(node_id, factor)
        for a in self.attempts_on(node_id):
            self.reschedule(a)
        if duration_ms is not None:
            self.sim.cancel(self._slow_ends.pop(node_id, None))
            self._slow_ends[node_id] = self.sim.schedule_in(
                duration_ms, ev.FAULT, lambda: self.slow_node(node_id, 1.0, None),
                f"unslow node={node_id}",
            )

    def delay_network(self, node_id: int, factor: float, duration_ms: Optional[int]) -> None:
        self.net_factor[node_id] = factor
        if duration_ms is not None:
            self.sim.cancel(self._net_ends.pop(node_id, None))
            self._net_ends[node_id] = self.sim.schedule_in(
                duration_ms, ev.FAULT, lambda: self.delay_network(node_id, 1.0, None),
                f"undelay node={node_id}",
            )

    def lose_outputs(self, map_task: Task) -> None:
        for copy in map_task.outputs:
            copy.status = OutputStatus.LOST


def make_policy(name: str, sim: Simulation, scenario) -> Policy:
    if name in ("none", "off", "reference"):
        return Policy(sim)
    if name in ("yarn", "baseline"):
        return BaselineSpeculator(sim, scenario.baseline)
    if name == "bino":
        return BinoSpeculator(sim, scenario.bino)
    raise ValueError(f"unknown policy {name!r}")
