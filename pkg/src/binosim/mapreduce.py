"""Jobs, task attempts, spill logs, map outputs and the shuffle dependency."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

GiB = 1024 ** 3
MiB = 1024 ** 2

SHUFFLE_WEIGHT = 2.0 / 3.0
REDUCE_WEIGHT = 1.0 / 3.0


class TaskKind(enum.Enum):
    MAP = "m"
    REDUCE = "r"


class AttemptState(enum.Enum):
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    KILLED = "killed"


class JobState(enum.Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


class OutputStatus(enum.Enum):
    AVAILABLE = "available"
    LOST = "lost"


@dataclass
class JobProfile:
    """Data-volume model of a job; durations are linear in bytes."""

    split_size: int = 128 * MiB
    map_throughput: float = 10_000.0  # bytes/ms
    reduce_throughput: float = 100_000.0  # bytes/ms
    shuffle_throughput: float = 100_000.0  # bytes/ms per fetch
    num_spills: int = 5
    reduce_bytes_per_task: int = 4 * GiB
    reduces: Optional[int] = None
    reduce_slowstart: float = 0.05

    def num_maps(self, input_size: int) -> int:
        return max(1, math.ceil(input_size / self.split_size))

    def num_reduces(self, input_size: int) -> int:
        if self.reduces is not None:
            return self.reduces
        return max(1, math.ceil(input_size / self.reduce_bytes_per_task))


@dataclass
class FrameworkConfig:
    """YARN behaviour shared by every speculation policy."""

    task_timeout_ms: int = 600_000
    max_attempts: int = 4
    max_fetch_failures: int = 4
    fetch_retry_ms: int = 3_000
    reduce_fails_on_fetch_limit: bool = True
    am_tick_ms: int = 1_000


@dataclass
class SpillEntry:
    index: int
    offset: int
    produced_at: int


@dataclass
class SpillLog:
    stored_on: int
    entries: list[SpillEntry] = field(default_factory=list)

    def append(self, index: int, offset: int, produced_at: int) -> None:
        if self.entries and offset <= self.entries[-1].offset:
            raise ValueError("spill offsets must strictly increase")
        self.entries.append(SpillEntry(index, offset, produced_at))

    @property
    def last(self) -> Optional[SpillEntry]:
        return self.entries[-1] if self.entries else None


def spill_offsets(split_bytes: int, num_spills: int) -> list[int]:
    """Input offsets at which spills 1..num_spills are written."""
    return [split_bytes * k // num_spills for k in range(1, num_spills + 1)]


@dataclass(eq=False)
class MapOutput:
    """One copy of a map output file; holds one partition per reducer."""

    map_task_id: str
    attempt_id: str
    node_id: int
    partitions: int
    original: bool = True
    status: OutputStatus = OutputStatus.AVAILABLE

    @property
    def available(self) -> bool:
        return self.status is OutputStatus.AVAILABLE


def choose_output(copies: list[MapOutput]) -> Optional[MapOutput]:
    """Copy a reducer should fetch from: the original if usable, else lowest node id."""
    usable = [c for c in copies if c.available]
    if not usable:
        return None
    usable.sort(key=lambda c: (not c.original, c.node_id))
    return usable[0]


class FetchFailureCounter:
    """Consecutive fetch failures per (reduce task, map task)."""

    def __init__(self):
        self._counts: dict[tuple[str, str], int] = {}

    def failure(self, reduce_id: str, map_id: str) -> int:
        key = (reduce_id, map_id)
        self._counts[key] = self._counts.get(key, 0) + 1
        return self._counts[key]

    def success(self, reduce_id: str, map_id: str) -> None:
        self._counts.pop((reduce_id, map_id), None)

    def reset_map(self, map_id: str) -> None:
        for key in [k for k in self._counts if k[1] == map_id]:
            del self._counts[key]

    def get(self, reduce_id: str, map_id: str) -> int:
        return self._counts.get((reduce_id, map_id), 0)

    def outstanding(self, reduce_id: str) -> list[str]:
        return sorted(m for (r, m), c in self._counts.items() if r == reduce_id and c > 0)


@dataclass(eq=False)
class TaskAttempt:
    attempt_id: str
    task: "Task"
    node_id: int
    slot: int
    start_time: int
    speculative: bool = False
    zeta: float = 0.0
    last_update: int = 0
    rate: float = 0.0  # progress per ms while running
    state: AttemptState = AttemptState.RUNNING
    end_time: Optional[int] = None
    resume_spill: int = 0
    resume_offset: Optional[int] = None
    spill_log: Optional[SpillLog] = None
    reported_zeta: float = 0.0
    reported_at: int = 0
    # reduce-side shuffle bookkeeping
    fetched: set = field(default_factory=set)
    fetching: dict = field(default_factory=dict)
    retry_events: dict = field(default_factory=dict)
    in_reduce_phase: bool = False
    milestone: object = None

    @property
    def kind(self) -> TaskKind:
        return self.task.kind

    @property
    def running(self) -> bool:
        return self.state is AttemptState.RUNNING

    def running_time(self, now: int) -> int:
        return now - self.start_time


def progress_rate(zeta: float, running_ms: float) -> float:
    """Progress per millisecond, zeta / tau."""
    if running_ms <= 0:
        raise ValueError("progress rate undefined for zero running time")
    return zeta / running_ms


def _sigma_cut(population: Sequence[float]) -> tuple[Fraction, Fraction]:
    xs = [Fraction(x) for x in population]
    mean = sum(xs) / len(xs)
    return mean, sum((x - mean) ** 2 for x in xs) / len(xs)


def laggards(population: Sequence[float], k: float = 1.0) -> list[bool]:
    """Per member, whether it lies below ``mean - k * sigma`` (population sigma).

    Decided in exact rational arithmetic on the given floats. With two members
    the slower one sits exactly on the cut, and rounding must not tip it over.
    """
    if len(population) < 2:
        return [False] * len(population)
    mean, var = _sigma_cut(population)
    if var == 0:
        return [False] * len(population)
    bound = Fraction(k) ** 2 * var
    out = []
    for x in population:
        gap = mean - Fraction(x)
        out.append(gap > 0 and gap * gap > bound)
    return out


def lags_behind(value: float, population: Sequence[float], k: float = 1.0) -> bool:
    """``laggards`` for a value that need not belong to ``population``."""
    if len(population) < 2:
        return False
    mean, var = _sigma_cut(population)
    gap = mean - Fraction(value)
    return var > 0 and gap > 0 and gap * gap > Fraction(k) ** 2 * var


def attempt_progress_rate(attempt: TaskAttempt, now: int, reported: bool = True) -> float:
    zeta = attempt.reported_zeta if reported else attempt.zeta
    return progress_rate(zeta, attempt.running_time(now))


@dataclass(eq=False)
class Task:
    task_id: str
    job: "Job"
    kind: TaskKind
    index: int
    nominal_ms: float
    split_bytes: int = 0
    attempts: list[TaskAttempt] = field(default_factory=list)
    done: bool = False
    completed_at: Optional[int] = None
    failures: int = 0
    outputs: list[MapOutput] = field(default_factory=list)

    def running_attempts(self) -> list[TaskAttempt]:
        return [a for a in self.attempts if a.running]

    def next_attempt_id(self) -> str:
        return f"{self.task_id}.a{len(self.attempts)}"

    def live_output(self) -> Optional[MapOutput]:
        return choose_output(self.outputs)


@dataclass(eq=False)
class Job:
    job_id: int
    input_size: int
    arrival_time: int
    profile: JobProfile
    home_node: int = 0
    maps: list[Task] = field(default_factory=list)
    reduces: list[Task] = field(default_factory=list)
    state: JobState = JobState.PENDING
    completion_time: Optional[int] = None
    reduces_requested: bool = False
    speculative_launches: int = 0

    def __post_init__(self):
        if not self.maps:
            self.maps, self.reduces = build_tasks(self)

    @property
    def exec_time(self) -> Optional[int]:
        if self.completion_time is None:
            return None
        return self.completion_time - self.arrival_time

    def tasks(self) -> list[Task]:
        return self.maps + self.reduces

    def partition_bytes(self) -> float:
        return self.profile.split_size / max(1, len(self.reduces))

    def completed_maps(self) -> int:
        return sum(1 for t in self.maps if t.done)


def build_tasks(job: Job) -> tuple[list[Task], list[Task]]:
    prof = job.profile
    n_maps = prof.num_maps(job.input_size)
    n_red = prof.num_reduces(job.input_size)
    maps = []
    remaining = job.input_size
    for i in range(n_maps):
        split = min(prof.split_size, remaining) if i == n_maps - 1 else prof.split_size
        split = max(split, 1)
        remaining -= split
        maps.append(
            Task(f"j{job.job_id}.m{i}", job, TaskKind.MAP, i, split / prof.map_throughput, split)
        )
    shuffled = job.input_size / n_red
    reduces = [
        Task(f"j{job.job_id}.r{i}", job, TaskKind.REDUCE, i, shuffled / prof.reduce_throughput)
        for i in range(n_red)
    ]
    return maps, reduces


def advance_map_attempt(
    attempt: TaskAttempt, dt: float, num_spills: int, now: Optional[int] = None
) -> TaskAttempt:
    """Move a running map attempt forward by ``dt`` ms at its current rate.

    A spill entry is appended for every multiple of ``1/num_spills`` crossed;
    its timestamp is interpolated inside the step. Reaching zeta=1 marks the
    attempt succeeded (the caller registers its output).
    """
    if not attempt.running or dt <= 0 or attempt.rate <= 0:
        return attempt
    start_zeta = attempt.zeta
    end_zeta = min(1.0, start_zeta + dt * attempt.rate)
    t0 = attempt.last_update if now is None else now - dt
    log = attempt.spill_log
    if log is not None:
        split = attempt.task.split_bytes
        offsets = spill_offsets(split, num_spills)
        k = max(attempt.resume_spill, len_spills(attempt)) + 1
        while k <= num_spills and k / num_spills <= end_zeta + 1e-12:
            produced = t0 + (k / num_spills - start_zeta) / attempt.rate
            log.append(k, offsets[k - 1], int(math.ceil(produced - 1e-9)))
            k += 1
    attempt.zeta = end_zeta
    attempt.last_update = int(t0 + dt)
    if end_zeta >= 1.0:
        attempt.state = AttemptState.SUCCEEDED
    return attempt


def len_spills(attempt: TaskAttempt) -> int:
    """Highest spill index this attempt has written (counting a resume point)."""
    log = attempt.spill_log
    if log is None or not log.entries:
        return attempt.resume_spill
    return max(attempt.resume_spill, log.entries[-1].index)


def reduce_progress(fetched: int, total: int, reduce_fraction: float = 0.0) -> float:
    """Reducer ProgressScore: shuffle fills [0, 2/3], the reduce phase the rest."""
    if total <= 0:
        shuffle = SHUFFLE_WEIGHT
    else:
        shuffle = SHUFFLE_WEIGHT * fetched / total
    return min(1.0, shuffle + REDUCE_WEIGHT * max(0.0, min(1.0, reduce_fraction)))


def advance_reduce_attempt(attempt: TaskAttempt, dt: float) -> TaskAttempt:
    """Advance the reduce sub-phase; shuffle progress comes from completed fetches."""
    if not attempt.running or not attempt.in_reduce_phase or dt <= 0:
        return attempt
    attempt.zeta = min(1.0, attempt.zeta + dt * attempt.rate)
    attempt.last_update += int(dt)
    if attempt.zeta >= 1.0:
        attempt.state = AttemptState.SUCCEEDED
    return attempt


def kill_attempt(attempt: TaskAttempt, now: Optional[int] = None) -> TaskAttempt:
    """Kill a running attempt; a no-op on anything already finished.

    The spill log is left in place so a later rollback can still use it.
    """
    if not attempt.running:
        return attempt
    attempt.state = AttemptState.KILLED
    attempt.end_time = now
    return attempt


def retain_dual_outputs(task: Task, attempt: TaskAttempt) -> list[MapOutput]:
    """Register a re-speculated map's output next to the earlier copies."""
    copy = MapOutput(
        task.task_id,
        attempt.attempt_id,
        attempt.node_id,
        len(task.job.reduces),
        original=not task.outputs,
    )
    task.outputs.append(copy)
    return task.outputs


def discard_duplicate_outputs(task: Task) -> None:
    keep = task.live_output()
    task.outputs = [keep] if keep is not None else task.outputs[:1]
