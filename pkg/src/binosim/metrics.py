"""Per-job records and distribution summaries written as CSV."""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .mapreduce import AttemptState, Job

METRIC_COLUMNS = [
    "job_id", "input_size", "policy", "exec_time_ms", "baseline_ms",
    "slowdown", "spec_tasks", "wasted_work",
]


@dataclass
class MetricsRecord:
    job_id: int
    input_size: int
    policy: str
    exec_time: Optional[int]
    baseline_time: Optional[int]
    slowdown: Optional[float]
    speculative_task_count: int
    wasted_work: float

    @property
    def complete(self) -> bool:
        return self.slowdown is not None

    def row(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return f"{v:.6f}"
            return str(v)

        return [
            str(self.job_id), str(self.input_size), self.policy, fmt(self.exec_time),
            fmt(self.baseline_time), fmt(self.slowdown), str(self.speculative_task_count),
            fmt(self.wasted_work),
        ]


def compute_slowdown(exec_time: Optional[float], baseline_time: Optional[float]) -> Optional[float]:
    """Faulted over fault-free time; ``None`` flags an incomplete record."""
    if exec_time is None or baseline_time is None:
        return None
    if baseline_time <= 0:
        raise ValueError("reference execution time must be positive")
    return exec_time / baseline_time


def wasted_work(job: Job) -> float:
    return sum(
        a.zeta for t in job.tasks() for a in t.attempts if a.state is AttemptState.KILLED
    )


def job_records(jobs: Sequence[Job], reference: Sequence[Job], policy: str) -> list[MetricsRecord]:
    ref = {j.job_id: j for j in reference}
    out = []
    for job in jobs:
        base = ref.get(job.job_id)
        base_time = base.exec_time if base is not None else None
        out.append(MetricsRecord(
            job.job_id, job.input_size, policy, job.exec_time, base_time,
            compute_slowdown(job.exec_time, base_time),
            job.speculative_launches, wasted_work(job),
        ))
    return out


@dataclass
class Summary:
    count: int
    mean: float
    sigma: float
    pdf: list[tuple[float, float, float]]  # (bin_lo, bin_hi, density)
    cdf: list[tuple[float, float]]  # (value, cumulative fraction)


def summarize(values: Iterable[float], bin_width: float = 0.5) -> Summary:
    xs = sorted(float(v) for v in values)
    if not xs:
        raise ValueError("summarize needs at least one value")
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    n = len(xs)
    mean = math.fsum(xs) / n
    sigma = math.sqrt(math.fsum((x - mean) ** 2 for x in xs) / n)
    lo_bin = math.floor(xs[0] / bin_width)
    hi_bin = math.floor(xs[-1] / bin_width)
    counts = [0] * (hi_bin - lo_bin + 1)
    for x in xs:
        counts[math.floor(x / bin_width) - lo_bin] += 1
    pdf = [
        ((lo_bin + i) * bin_width, (lo_bin + i + 1) * bin_width, c / (n * bin_width))
        for i, c in enumerate(counts)
    ]
    cdf = []
    for i, x in enumerate(xs):
        if i + 1 < n and xs[i + 1] == x:
            continue
        cdf.append((x, (i + 1) / n))
    return Summary(n, mean, sigma, pdf, cdf)


def _write(path: Path, header: list[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def write_records(path, records: Sequence[MetricsRecord]) -> None:
    _write(Path(path), METRIC_COLUMNS, (r.row() for r in records))


def write_summary(out_dir, records: Sequence[MetricsRecord], bin_width: float) -> Optional[Summary]:
    """summary.csv, pdf.csv and cdf.csv over complete records' slowdowns."""
    out_dir = Path(out_dir)
    done = [r for r in records if r.complete]
    rows = [
        ["jobs", len(records)],
        ["complete", len(done)],
    ]
    if not done:
        _write(out_dir / "summary.csv", ["metric", "value"], rows)
        return None
    s = summarize([r.slowdown for r in done], bin_width)
    exec_times = [float(r.exec_time) for r in done]
    rows += [
        ["mean_slowdown", f"{s.mean:.6f}"],
        ["sigma_slowdown", f"{s.sigma:.6f}"],
        ["mean_exec_time_ms", f"{statistics.fmean(exec_times):.6f}"],
        ["sigma_exec_time_ms", f"{statistics.pstdev(exec_times):.6f}"],
        ["spec_tasks", sum(r.speculative_task_count for r in done)],
    ]
    _write(out_dir / "summary.csv", ["metric", "value"], rows)
    _write(out_dir / "pdf.csv", ["bin_lo", "bin_hi", "density"],
           ([f"{a:.6f}", f"{b:.6f}", f"{d:.6f}"] for a, b, d in s.pdf))
    _write(out_dir / "cdf.csv", ["slowdown", "cdf"],
           ([f"{x:.6f}", f"{c:.6f}"] for x, c in s.cdf))
    return s
