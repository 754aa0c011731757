"""Recovery time of a map hit by a disk exception after k spills, per policy."""

import argparse
import sys
from pathlib import Path

import yaml

from binosim import Scenario
from binosim.experiment import run_policy
from binosim.scenario import set_path


def recovery_ms(raw, k, policy, seed):
    sim = run_policy(Scenario.from_dict(set_path(raw, "faults.0.at", f"spills={k}")), policy, seed).sim
    failed_at = next(t for t, _, reason in sim.failures if reason == "disk_exception")
    return sim.jobs[0].maps[0].completed_at - failed_at


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("scenario", nargs="?", default="scenarios/disk_exception.yaml")
    p.add_argument("--max-spill", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    raw = yaml.safe_load(Path(args.scenario).read_text())
    print(f"{'spills':>6} {'yarn ms':>9} {'bino ms':>9}")
    for k in range(1, args.max_spill + 1):
        y, b = (recovery_ms(raw, k, pol, args.seed) for pol in ("yarn", "bino"))
        print(f"{k:6d} {y:9d} {b:9d}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
