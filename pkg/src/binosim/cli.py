"""``simulate`` command line."""

from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

import yaml

from .engine import SimulationError
from .experiment import run_policy
from .metrics import write_records, write_summary
from .scenario import Scenario, ScenarioError, set_path


def parse_sweep(items: list[str]) -> list[tuple[str, list]]:
    out = []
    for item in items:
        key, sep, values = item.partition("=")
        if not sep or not key or not values:
            raise ScenarioError(f"bad --sweep {item!r}, expected key=v1,v2,...")
        out.append((key, [yaml.safe_load(v) for v in values.split(",")]))
    return out


def _label(combo: list[tuple[str, object]]) -> str:
    return "_".join(f"{k}={v}" for k, v in combo)


def run_one(scenario: Scenario, policy: str, seed: int, out: Path, trace: bool):
    out.mkdir(parents=True, exist_ok=True)
    result = run_policy(scenario, policy, seed, trace=trace)
    write_records(out / "metrics.csv", result.records)
    summary = write_summary(out / ".", result.records, scenario.output.pdf_bin_width)
    if trace:
        (out / "trace.txt").write_text(result.sim.sim.dump_trace())
    return result, summary


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="simulate", description="Simulate speculation policies under faults.")
    p.add_argument("--scenario", required=True, help="scenario YAML file")
    p.add_argument("--policy", required=True, choices=["yarn", "bino"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--trace", action="store_true", help="write the event trace")
    p.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2",
                   help="dotted scenario key and values; repeat to cross-product")
    args = p.parse_args(argv)
    if not 0 <= args.seed < 2 ** 64:
        p.error("seed must be an unsigned 64-bit integer")
    out = Path(args.out)
    try:
        base = Scenario.load(args.scenario)
        sweep = parse_sweep(args.sweep)
        if not sweep:
            _, summary = run_one(base, args.policy, args.seed, out, args.trace)
            if summary is not None:
                print(f"{args.policy}: {summary.count} jobs, mean slowdown {summary.mean:.3f}")
            return 0
        keys = [k for k, _ in sweep]
        merged = []
        for values in itertools.product(*(v for _, v in sweep)):
            combo = list(zip(keys, values))
            raw = base.raw
            for k, v in combo:
                raw = set_path(raw, k, v)
            scenario = Scenario.from_dict(raw)
            _, summary = run_one(scenario, args.policy, args.seed, out / _label(combo), args.trace)
            mean = f"{summary.mean:.6f}" if summary else ""
            sigma = f"{summary.sigma:.6f}" if summary else ""
            merged.append([*map(str, values), summary.count if summary else 0, mean, sigma])
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep_summary.csv", "w") as fh:
            fh.write(",".join(keys + ["complete_jobs", "mean_slowdown", "sigma_slowdown"]) + "\n")
            for row in merged:
                fh.write(",".join(map(str, row)) + "\n")
        return 0
    except (ScenarioError, SimulationError) as exc:
        print(f"simulate: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
