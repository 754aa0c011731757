"""Scenario files: one YAML document per experiment.

Top-level blocks (all optional except one of ``jobs``/``workload``)::

    cluster:      {nodes, slots_per_node, heartbeat_ms, size_neighbor}
    job_profile:  {split_size, map_throughput, reduce_throughput,
                   shuffle_throughput, num_spills, reduce_bytes_per_task,
                   reduces, reduce_slowstart}
    jobs:         [{job_id, input_size, arrival_ms, home_node}]
    workload:     {size_mix: [[size, p], ...], rate_per_ms, total_jobs, seed}
    faults:       [{at, kind, target, job, duration_ms, factor}]
    random_faults: {count, failure_ratio, rate_per_ms, start_ms, ...}
    framework:    {task_timeout_ms, max_attempts, max_fetch_failures, ...}
    baseline:     {speculator_interval_ms, fixed_delay_ms, ...}
    bino:         {threshold_slowdown, window_length, coll_init_num, ...,
                   assess: {spatial, temporal, failure}}
    output:       {pdf_bin_width}

Sizes accept plain byte counts or strings such as ``"1GB"`` / ``"128MB"``
(binary multiples).
"""

from __future__ import annotations

import copy
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .baseline import BaselineConfig
from .bino import BinoConfig
from .engine import RngStreams
from .faults import FaultConfigError, RandomFaultSpec, parse_script
from .mapreduce import FrameworkConfig, Job, JobProfile
from .workload import WorkloadSpec, generate_workload


class ScenarioError(ValueError):
    pass


_UNITS = {"": 1, "B": 1, "KB": 1024, "MB": 1024 ** 2, "GB": 1024 ** 3, "TB": 1024 ** 4}
_UNITS.update({"KIB": 1024, "MIB": 1024 ** 2, "GIB": 1024 ** 3, "TIB": 1024 ** 4})


def parse_size(value: Any) -> int:
    if isinstance(value, bool):
        raise ScenarioError(f"bad size {value!r}")
    if isinstance(value, (int, float)):
        return int(value)
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+)\s*([A-Za-z]*)\s*", str(value))
    if not m or m.group(2).upper() not in _UNITS:
        raise ScenarioError(f"bad size {value!r}")
    return int(float(m.group(1)) * _UNITS[m.group(2).upper()])


@dataclass
class ClusterConfig:
    nodes: int = 21
    slots_per_node: int = 8
    heartbeat_ms: int = 1000
    # overrides bino.size_neighbor when given
    size_neighbor: Optional[int] = None


@dataclass
class JobSpec:
    job_id: int
    input_size: int
    arrival_ms: int = 0
    home_node: Optional[int] = None


@dataclass
class OutputConfig:
    pdf_bin_width: float = 0.5


def _build(cls, raw: Optional[dict], block: str, **conv):
    raw = dict(raw or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ScenarioError(f"unknown field(s) in {block}: {sorted(unknown)}")
    for key, fn in conv.items():
        if key in raw and raw[key] is not None:
            raw[key] = fn(raw[key])
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid {block} block: {exc}") from exc


@dataclass
class Scenario:
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    profile: JobProfile = field(default_factory=JobProfile)
    jobs: list[JobSpec] = field(default_factory=list)
    workload: Optional[WorkloadSpec] = None
    faults: list[dict] = field(default_factory=list)
    random_faults: Optional[RandomFaultSpec] = None
    framework: FrameworkConfig = field(default_factory=FrameworkConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    bino: BinoConfig = field(default_factory=BinoConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    max_events: int = 20_000_000
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        raw = copy.deepcopy(raw or {})
        known = {
            "cluster", "job_profile", "jobs", "workload", "faults", "random_faults",
            "framework", "baseline", "bino", "output", "max_events", "name",
        }
        unknown = set(raw) - known
        if unknown:
            raise ScenarioError(f"unknown scenario block(s): {sorted(unknown)}")
        cluster = _build(ClusterConfig, raw.get("cluster"), "cluster")
        if cluster.nodes < 1 or cluster.slots_per_node < 1:
            raise ScenarioError("cluster needs at least one node and one slot")
        size_fields = {k: parse_size for k in ("split_size", "reduce_bytes_per_task")}
        profile = _build(JobProfile, raw.get("job_profile"), "job_profile", **size_fields)
        jobs = []
        for i, j in enumerate(raw.get("jobs") or []):
            j = dict(j)
            j.setdefault("job_id", i)
            jobs.append(_build(JobSpec, j, "jobs", input_size=parse_size))
        workload = None
        if raw.get("workload"):
            w = dict(raw["workload"])
            if "size_mix" in w:
                w["size_mix"] = [(parse_size(s), float(p)) for s, p in w["size_mix"]]
            workload = _build(WorkloadSpec, w, "workload")
        if not jobs and workload is None:
            raise ScenarioError("scenario needs a jobs list or a workload block")
        bino_raw = dict(raw.get("bino") or {})
        if cluster.size_neighbor is not None:
            bino_raw["size_neighbor"] = cluster.size_neighbor
        assess = bino_raw.pop("assess", None) or {}
        for key in ("spatial", "temporal", "failure"):
            if key in assess:
                bino_raw[f"assess_{key}"] = bool(assess[key])
        random_faults = None
        if raw.get("random_faults"):
            random_faults = _build(RandomFaultSpec, raw["random_faults"], "random_faults")
            if not 0.0 <= random_faults.failure_ratio <= 1.0:
                raise ScenarioError("failure_ratio must lie in [0, 1]")
        scenario = cls(
            cluster=cluster,
            profile=profile,
            jobs=jobs,
            workload=workload,
            faults=list(raw.get("faults") or []),
            random_faults=random_faults,
            framework=_build(FrameworkConfig, raw.get("framework"), "framework"),
            baseline=_build(BaselineConfig, raw.get("baseline"), "baseline"),
            bino=_build(BinoConfig, bino_raw, "bino"),
            output=_build(OutputConfig, raw.get("output"), "output"),
            max_events=int(raw.get("max_events", 20_000_000)),
            raw=raw,
        )
        try:
            scenario.fault_script()
        except FaultConfigError as exc:
            raise ScenarioError(str(exc)) from exc
        return scenario

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            raw = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ScenarioError(f"scenario {path} is not a mapping")
        return cls.from_dict(raw)

    def fault_script(self):
        return parse_script(self.faults)

    def build_jobs(self, rng: RngStreams) -> list[Job]:
        placement = rng.stream("placement")
        specs = list(self.jobs)
        if self.workload is not None:
            stream = rng.stream("workload")
            for i, (t, size) in enumerate(generate_workload(self.workload, stream)):
                specs.append(JobSpec(len(self.jobs) + i, size, t))
        out = []
        for spec in specs:
            home = spec.home_node
            if home is None:
                home = placement.randrange(self.cluster.nodes)
            out.append(Job(spec.job_id, spec.input_size, spec.arrival_ms, self.profile, home))
        return out


def set_path(raw: dict, dotted: str, value: Any) -> dict:
    """Return a copy of ``raw`` with ``a.b.c`` set to ``value``.

    Integer parts index into lists, so ``jobs.0.input_size`` names the first job.
    """
    out = copy.deepcopy(raw)
    node: Any = out
    parts = dotted.split(".")
    for i, p in enumerate(parts):
        last = i == len(parts) - 1
        if isinstance(node, list):
            try:
                idx = int(p)
                node[idx]
            except (ValueError, IndexError):
                raise ScenarioError(f"cannot set {dotted}: no list entry {p!r}") from None
            if last:
                node[idx] = value
            else:
                node = node[idx]
            continue
        if not isinstance(node, dict):
            raise ScenarioError(f"cannot set {dotted}: {parts[i - 1]} is not a block")
        if last:
            node[p] = value
        else:
            node = node.setdefault(p, {})
    return out
