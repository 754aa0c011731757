"""Synthetic job streams: sizes from a discrete mix, Poisson arrivals."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Optional

from .mapreduce import GiB

# job-size mix reported for production clusters (PACMan)
PACMAN_MIX = [(1 * GiB, 0.85), (10 * GiB, 0.08), (50 * GiB, 0.05), (100 * GiB, 0.02)]


@dataclass
class WorkloadSpec:
    size_mix: list = field(default_factory=lambda: list(PACMAN_MIX))
    rate_per_ms: float = 1 / 30_000
    total_jobs: int = 20
    seed: Optional[int] = None
    start_ms: int = 0

    def __post_init__(self):
        total = sum(p for _, p in self.size_mix)
        if not self.size_mix or abs(total - 1.0) > 1e-9:
            raise ValueError(f"size mix probabilities sum to {total}, expected 1")
        if any(p < 0 for _, p in self.size_mix):
            raise ValueError("negative probability in size mix")
        if self.rate_per_ms <= 0:
            raise ValueError("arrival rate must be positive")
        if self.total_jobs < 0:
            raise ValueError("total_jobs must be >= 0")


def generate_workload(spec: WorkloadSpec, rng: Optional[random.Random] = None) -> list[tuple[int, int]]:
    """``(arrival_ms, input_size)`` for each job, in arrival order.

    Inter-arrival gaps are exponential with mean ``1 / rate_per_ms``. A
    ``seed`` on the spec takes precedence over the supplied stream.
    """
    if spec.seed is not None or rng is None:
        rng = random.Random(spec.seed)
    sizes = [s for s, _ in spec.size_mix]
    cumulative = list(itertools.accumulate(p for _, p in spec.size_mix))
    out = []
    t = float(spec.start_ms)
    for _ in range(spec.total_jobs):
        t += rng.expovariate(spec.rate_per_ms)
        size = rng.choices(sizes, cum_weights=cumulative)[0]
        out.append((int(t), size))
    return out
