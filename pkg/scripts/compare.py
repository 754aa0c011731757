"""Run a scenario under both policies over a range of seeds and tabulate.

    python3 scripts/compare.py scenarios/stress.yaml --seeds 5
    python3 scripts/compare.py scenarios/size_trend.yaml --set jobs.0.input_size=100GB --policies yarn
"""

import argparse
import collections
import csv
import statistics
import sys
from pathlib import Path

import yaml

from binosim import Scenario
from binosim.experiment import reference_run, run_policy
from binosim.scenario import set_path


def size_class(nbytes):
    gib = nbytes / 2 ** 30
    return f"{gib:g}GB" if gib >= 1 else f"{nbytes}B"


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("scenario")
    p.add_argument("--seeds", type=int, default=5, help="run seeds 0..N-1")
    p.add_argument("--policies", default="yarn,bino")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a dotted scenario key before running")
    p.add_argument("--csv", help="write one row per job here")
    args = p.parse_args(argv)

    raw = yaml.safe_load(Path(args.scenario).read_text())
    for item in args.set:
        key, _, value = item.partition("=")
        raw = set_path(raw, key, yaml.safe_load(value))
    scenario = Scenario.from_dict(raw)
    policies = args.policies.split(",")

    rows = []
    for seed in range(args.seeds):
        ref = reference_run(scenario, seed)
        for policy in policies:
            for r in run_policy(scenario, policy, seed, reference=ref).records:
                rows.append((seed, policy, r))

    table = collections.defaultdict(list)
    for _, policy, r in rows:
        if r.exec_time is not None:
            table[policy, size_class(r.input_size)].append(r)
    classes = sorted({c for _, c in table}, key=lambda c: (len(c), c))
    print(f"{'policy':6} {'class':>8} {'jobs':>5} {'exec ms':>10} {'slowdown':>9} {'sigma':>7}")
    for policy in policies:
        for c in classes:
            recs = table.get((policy, c))
            if not recs:
                continue
            slow = [r.slowdown for r in recs]
            print(f"{policy:6} {c:>8} {len(recs):5d} {statistics.fmean(r.exec_time for r in recs):10.0f} "
                  f"{statistics.fmean(slow):9.3f} {statistics.pstdev(slow):7.3f}")
    incomplete = sum(r.exec_time is None for *_, r in rows)
    if incomplete:
        print(f"{incomplete} jobs did not complete")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", "policy", "job_id", "input_size", "exec_time", "slowdown"])
            for seed, policy, r in rows:
                w.writerow([seed, policy, r.job_id, r.input_size, r.exec_time, r.slowdown])
    return 0


if __name__ == "__main__":
    sys.exit(main())
