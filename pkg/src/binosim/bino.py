"""Binocular speculation.

Three pieces cooperate here:

* neighborhood glance: spatial (node vs. its neighborhood), temporal (node vs.
  its own recent progress) and failure (heartbeat silence vs. an adaptive
  threshold) assessments;
* collective speculation: copies go to free neighborhood slots first, then to
  the rest of the cluster in waves of ``init * multiply**i``, a wave only
  following once a copy from the previous one proves faster than its
  original. Completed maps whose output is gone are speculated the same way;
* speculative rollback: a failed map restarts on its own node from the last
  logged spill while an ordinary copy races it on the fastest node.
"""

from __future__ import annotations

import itertools
import statistics
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .engine import WAKEUP
from .mapreduce import SpillEntry, Task, TaskAttempt, TaskKind, lags_behind, progress_rate
from .policy import Policy


@dataclass
class BinoConfig:
    threshold_slowdown: float = 0.1
    window_length: int = 4
    coll_init_num: int = 1
    coll_multiply: int = 2
    size_neighbor: int = 3
    progress_check_interval_ms: int = 500
    safety_factor: float = 1.5
    assess_spatial: bool = True
    assess_temporal: bool = True
    assess_failure: bool = True
    include_self: bool = True
    fetch_failure_trigger: int = 2
    rollback: bool = True

    def __post_init__(self):
        if not 0.0 < self.threshold_slowdown < 1.0:
            raise ValueError("threshold_slowdown must lie in (0, 1)")
        if self.coll_init_num < 1 or self.coll_multiply < 1:
            raise ValueError("collective speculation needs init >= 1 and multiply >= 1")
        if self.size_neighbor < 2:
            raise ValueError("a neighborhood needs at least two nodes")


# -- assessments -------------------------------------------------------------


def node_progress_rate(rates: Sequence[float]) -> Optional[float]:
    """Average task progress rate on a node; None when nothing is eligible."""
    if not rates:
        return None
    return statistics.fmean(rates)


def spatial_assess(node_rate: float, neighborhood_rates: Sequence[float]) -> bool:
    """Slow iff below the neighborhood mean by more than one population sigma.

    ``neighborhood_rates`` is the population the mean and sigma are taken
    over; whether it contains ``node_rate`` is the caller's choice.
    """
    return lags_behind(node_rate, neighborhood_rates)


def node_progress_change_rate(
    prev: tuple[int, dict[str, float]], cur: tuple[int, dict[str, float]]
) -> Optional[float]:
    """Change of summed ProgressScore per ms between two samples.

    Only attempts present in both samples count, so tasks that finished or
    started in between neither inflate nor deflate the rate. With no attempt
    in common there is nothing to compare and the result is None.
    """
    t0, z0 = prev
    t1, z1 = cur
    if t1 <= t0:
        return None
    common = z0.keys() & z1.keys()
    if not common:
        return None
    before = sum(z0[a] for a in common)
    after = sum(z1[a] for a in common)
    return (after - before) / (t1 - t0)


def temporal_assess(prev_delta: Optional[float], delta: Optional[float], threshold: float) -> bool:
    if prev_delta is None or delta is None or prev_delta <= 0:
        return False
    return delta < threshold * prev_delta


def failure_assess(now: int, last_heartbeat_at: int, fail_threshold: float) -> bool:
    return now - last_heartbeat_at > fail_threshold


def wave_size(index: int, init: int, multiply: int) -> int:
    return init * multiply ** index


# -- rollback ----------------------------------------------------------------


@dataclass
class SpeculationDecision:
    task: Task
    node: Optional[int]
    resume: Optional[SpillEntry] = None
    reason: str = ""
    fallback: bool = True
    exclude: tuple = ()


def plan_rollback(
    attempt: TaskAttempt,
    node_ok: bool,
    log_usable: bool,
    fast_node: Optional[int],
    need_fresh_copy: bool = True,
) -> list[SpeculationDecision]:
    """Up to two recovery attempts for a failed or slow map attempt.

    The first restarts on the original node from the last spill, and only if
    that node is neither slow nor failed. The second is a from-scratch copy on
    ``fast_node``.
    """
    task = attempt.task
    out = []
    if node_ok:
        resume = None
        if log_usable and attempt.spill_log is not None and attempt.spill_log.entries:
            resume = attempt.spill_log.last
        out.append(
            SpeculationDecision(task, attempt.node_id, resume, "rollback", fallback=False)
        )
    if need_fresh_copy or not out:
        out.append(
            SpeculationDecision(
                task, fast_node, None, "rollback-fresh", exclude=(attempt.node_id,)
            )
        )
    return out


# -- collective speculation --------------------------------------------------


@dataclass(eq=False)
class Episode:
    episode_id: int
    job_id: int
    node_id: int
    reason: str
    queue: list = field(default_factory=list)  # (task, original attempt or None)
    wave: int = -1
    wave_requests: list = field(default_factory=list)
    wave_counts: list = field(default_factory=list)
    neighborhood_launched: int = 0
    done: bool = False


class BinoSpeculator(Policy):
    name = "bino"

    def __init__(self, sim, config: Optional[BinoConfig] = None):
        super().__init__(sim)
        self.config = config or BinoConfig()
        self.samples: dict[tuple[int, int], tuple[int, dict[str, float]]] = {}
        self.deltas: dict[tuple[int, int], float] = {}
        self.suspected: set[int] = set()
        self.slow_flags: set[tuple[int, int]] = set()
        self.episodes: list[Episode] = []
        self._ids = itertools.count()
        self.assessment_log: list[tuple[int, str, int, int]] = []

    def start(self) -> None:
        self.sim.every(self.config.progress_check_interval_ms, WAKEUP, self.check, "bino")

    # -- views ---------------------------------------------------------------

    def ongoing(self, job, node_id: int) -> list[TaskAttempt]:
        return [
            a
            for a in self.sim.attempts_on(node_id)
            if a.task.job is job and self.sim.progressing(a)
        ]

    def node_rate(self, job, node_id: int, now: int) -> Optional[float]:
        rates = [
            progress_rate(a.reported_zeta, a.running_time(now))
            for a in self.ongoing(job, node_id)
            if a.running_time(now) > 0
        ]
        return node_progress_rate(rates)

    def bad_node(self, job_id: int, node_id: int) -> bool:
        return node_id in self.suspected or (job_id, node_id) in self.slow_flags

    # -- hooks ---------------------------------------------------------------

    def on_heartbeat(self, node_id: int, report) -> None:
        if report.lost_ms is not None and node_id in self.suspected:
            self.suspected.discard(node_id)
            self.sim.note("bino-resume", f"node={node_id} lost_ms={report.lost_ms}")
        now = self.sim.now
        for job in self.sim.jobs_on_node(node_id):
            key = (job.job_id, node_id)
            flagged = None
            if self.config.assess_temporal:
                sample = (now, {a.attempt_id: a.reported_zeta for a in self.ongoing(job, node_id)})
                prev = self.samples.get(key)
                self.samples[key] = sample
                if prev is not None:
                    delta = node_progress_change_rate(prev, sample)
                    if temporal_assess(self.deltas.get(key), delta, self.config.threshold_slowdown):
                        flagged = "temporal"
                    if delta is not None:
                        self.deltas[key] = delta
            if flagged is None and self.config.assess_spatial and self.spatial(job, node_id, now):
                flagged = "spatial"
            if flagged:
                self.flag_slow(job, node_id, flagged)

    def spatial(self, job, node_id: int, now: int) -> bool:
        mine = self.node_rate(job, node_id, now)
        if mine is None:
            return False
        rates = []
        for n in self.sim.cluster.neighborhood(node_id):
            if n == node_id and not self.config.include_self:
                continue
            p = mine if n == node_id else self.node_rate(job, n, now)
            if p is not None:
                rates.append(p)
        return spatial_assess(mine, rates)

    def check(self) -> None:
        now = self.sim.now
        if self.config.assess_failure:
            for node in self.sim.cluster.nodes:
                n = node.node_id
                if n in self.suspected:
                    continue
                if failure_assess(now, node.last_heartbeat_at, node.history.fail_threshold):
                    self.suspected.add(n)
                    self.assessment_log.append((now, "failure", -1, n))
                    self.sim.note("bino-failure", f"node={n}")
                    self.on_node_failure(n)
        for ep in list(self.episodes):
            self.monitor(ep)

    def on_node_failure(self, node_id: int) -> None:
        for job in self.sim.active_jobs():
            stragglers = self.stragglers(job, node_id)
            if job.reduces and any(not r.done for r in job.reduces):
                for task in job.maps:
                    if not task.done or self.recovering(task):
                        continue
                    copy = task.live_output()
                    held_here = any(o.node_id == node_id for o in task.outputs)
                    if (copy is None and held_here) or (copy is not None and copy.node_id == node_id):
                        stragglers.append((task, None))
            if stragglers:
                self.start_episode(job, node_id, "failure", stragglers, advance=True)

    def flag_slow(self, job, node_id: int, how: str) -> None:
        self.slow_flags.add((job.job_id, node_id))
        self.assessment_log.append((self.sim.now, how, job.job_id, node_id))
        stragglers = self.stragglers(job, node_id)
        if stragglers:
            self.sim.note("bino-slow", f"job={job.job_id} node={node_id} via={how}")
            self.start_episode(job, node_id, how, stragglers)

    def stragglers(self, job, node_id: int) -> list[tuple[Task, TaskAttempt]]:
        out = []
        for a in self.sim.attempts_on(node_id):
            task = a.task
            if task.job is not job or task.done or not a.running:
                continue
            if self.sim.has_pending_request(task) or self.queued(task):
                continue
            healthy_twin = any(
                o is not a and not self.bad_node(job.job_id, o.node_id)
                for o in task.running_attempts()
            )
            if not healthy_twin:
                out.append((task, a))
        out.sort(key=lambda pair: (pair[0].kind is TaskKind.REDUCE, pair[0].index))
        return out

    def queued(self, task: Task) -> bool:
        return any(task is t for ep in self.episodes for t, _ in ep.queue)

    def recovering(self, task: Task) -> bool:
        return bool(task.running_attempts()) or self.sim.has_pending_request(task) or self.queued(task)

    def on_fetch_failure(self, reduce_attempt, map_task, count: int) -> None:
        if count != self.config.fetch_failure_trigger:
            return
        if map_task.running_attempts() or self.sim.has_pending_request(map_task):
            return
        # a lost output waiting in some episode's queue jumps it
        for ep in self.episodes:
            ep.queue = [(t, o) for t, o in ep.queue if t is not map_task]
        self.speculate_completed_task(map_task, "fetch-failure")

    def speculate_completed_task(self, map_task: Task, trigger: str) -> None:
        outputs = map_task.outputs
        node = outputs[0].node_id if outputs else map_task.job.home_node
        self.assessment_log.append((self.sim.now, trigger, map_task.job.job_id, node))
        self.start_episode(map_task.job, node, trigger, [(map_task, None)], advance=True)

    def absorbs_fetch_limit(self, map_task: Task) -> bool:
        return self.recovering(map_task)

    def on_attempt_failed(self, attempt: TaskAttempt) -> None:
        task = attempt.task
        if task.done:
            return
        others = [a for a in task.running_attempts() if a is not attempt]
        if task.kind is TaskKind.MAP and self.config.rollback:
            node = self.sim.cluster.nodes[attempt.node_id]
            node_ok = not node.failed and not self.bad_node(task.job.job_id, attempt.node_id)
            log_usable = attempt.spill_log is not None and not self.sim.cluster.nodes[
                attempt.spill_log.stored_on
            ].failed
            need_fresh = not others and not self.sim.has_pending_request(task)
            decisions = plan_rollback(
                attempt, node_ok, log_usable, self.fast_node(task.job, attempt.node_id), need_fresh
            )
            for d in decisions:
                self.sim.request_attempt(
                    d.task,
                    preferred=() if d.node is None else (d.node,),
                    exclude=d.exclude + tuple(sorted(self.suspected)),
                    fallback=d.fallback,
                    speculative=True,
                    resume=d.resume,
                    reason=d.reason,
                    origin=attempt,
                )
            return
        if not others and not self.sim.has_pending_request(task):
            fast = self.fast_node(task.job, attempt.node_id)
            self.sim.request_attempt(
                task,
                preferred=() if fast is None else (fast,),
                exclude=tuple(sorted(self.suspected)),
                reason="relaunch",
            )

    def fast_node(self, job, exclude: int) -> Optional[int]:
        now = self.sim.now
        best = None
        for node in self.sim.cluster.nodes:
            n = node.node_id
            if n == exclude or node.failed or self.bad_node(job.job_id, n):
                continue
            p = self.node_rate(job, n, now)
            if p is None:
                continue
            if best is None or p > best[0]:
                best = (p, n)
        return None if best is None else best[1]

    def on_job_done(self, job) -> None:
        for ep in self.episodes:
            if ep.job_id == job.job_id:
                ep.done = True
        self.episodes = [ep for ep in self.episodes if not ep.done]
        for key in [k for k in self.samples if k[0] == job.job_id]:
            del self.samples[key]
            self.deltas.pop(key, None)

    # -- collective speculation ---------------------------------------------

    def start_episode(self, job, node_id: int, reason: str, stragglers, advance: bool = False) -> None:
        for ep in self.episodes:
            if ep.job_id == job.job_id and ep.node_id == node_id and not ep.done:
                known = {id(t) for t, _ in ep.queue}
                fresh = [p for p in stragglers if id(p[0]) not in known]
                if advance:
                    # urgent recoveries go out in the very next wave
                    ep.queue = fresh + ep.queue
                    self.launch_wave(ep)
                else:
                    ep.queue.extend(fresh)
                return
        ep = Episode(next(self._ids), job.job_id, node_id, reason)
        self.episodes.append(ep)
        self.sim.note("bino-episode", f"id={ep.episode_id} job={job.job_id} node={node_id} reason={reason} n={len(stragglers)}")
        remaining = list(stragglers)
        hood = [
            n for n in self.sim.cluster.neighborhood(node_id)
            if n != node_id and not self.bad_node(job.job_id, n)
        ]
        free = sum(self.sim.cluster.free_slot_count(n) for n in hood)
        while remaining and free > 0:
            task, original = remaining.pop(0)
            req = self.sim.request_attempt(
                task,
                preferred=tuple(hood),
                fallback=False,
                speculative=True,
                reason=f"collective-neighborhood:{reason}",
                episode=ep.episode_id,
            )
            if req.attempt is None:
                self.sim.cancel_request(req)
                remaining.insert(0, (task, original))
                break
            ep.neighborhood_launched += 1
            free -= 1
        ep.queue = remaining
        if ep.queue:
            self.launch_wave(ep)
        else:
            ep.done = True
            self.episodes.remove(ep)

    def launch_wave(self, ep: Episode) -> None:
        ep.queue = [(t, o) for t, o in ep.queue if not t.done or t.live_output() is None]
        if not ep.queue:
            ep.done = True
            if ep in self.episodes:
                self.episodes.remove(ep)
            return
        ep.wave += 1
        size = wave_size(ep.wave, self.config.coll_init_num, self.config.coll_multiply)
        batch, ep.queue = ep.queue[:size], ep.queue[size:]
        job_id = batch[0][0].job.job_id
        hood = set(self.sim.cluster.neighborhood(ep.node_id))
        exclude = tuple(sorted(hood | self.suspected | {n for j, n in self.slow_flags if j == job_id}))
        ep.wave_requests = []
        for task, original in batch:
            req = self.sim.request_attempt(
                task,
                exclude=exclude,
                speculative=True,
                reason=f"collective-wave{ep.wave}:{ep.reason}",
                episode=ep.episode_id,
                wave=ep.wave,
            )
            ep.wave_requests.append((req, original))
        ep.wave_counts.append(len(batch))
        self.sim.note("bino-wave", f"episode={ep.episode_id} wave={ep.wave} size={len(batch)}")

    def monitor(self, ep: Episode) -> None:
        if ep.done:
            return
        if not ep.queue:
            ep.done = True
            self.episodes.remove(ep)
            return
        now = self.sim.now
        settled = all(
            req.cancelled or (req.attempt is not None and not req.attempt.running)
            for req, _ in ep.wave_requests
        )
        if settled:
            # nothing left to compare against; the queue still holds stragglers
            self.launch_wave(ep)
            return
        for req, original in ep.wave_requests:
            copy = req.attempt
            if copy is None:
                continue
            if copy.task.done and copy.state.value == "succeeded":
                self.launch_wave(ep)
                return
            if not copy.running or copy.running_time(now) <= 0:
                continue
            copy_rate = progress_rate(copy.reported_zeta, copy.running_time(now))
            if original is None or not original.running:
                orig_rate = 0.0 if (original is None or not original.task.done) else float("inf")
            elif original.running_time(now) > 0:
                orig_rate = progress_rate(original.reported_zeta, original.running_time(now))
            else:
                continue
            if copy_rate > orig_rate:
                self.launch_wave(ep)
                return
