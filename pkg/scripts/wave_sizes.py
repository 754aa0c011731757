"""Print the collective-speculation wave sizes for a grid of init/multiplier settings."""

import argparse
import collections
import sys
from pathlib import Path

import yaml

from binosim import Scenario
from binosim.experiment import run_policy
from binosim.scenario import set_path


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("scenario", nargs="?", default="scenarios/waves.yaml")
    p.add_argument("--init", default="1,2,3")
    p.add_argument("--mult", default="1,2,4")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    raw = yaml.safe_load(Path(args.scenario).read_text())
    for init in map(int, args.init.split(",")):
        for mult in map(int, args.mult.split(",")):
            cfg = set_path(set_path(raw, "bino.coll_init_num", init), "bino.coll_multiply", mult)
            sim = run_policy(Scenario.from_dict(cfg), "bino", args.seed).sim
            waves = collections.defaultdict(collections.Counter)
            for launch in sim.launches:
                if launch.wave is not None:
                    waves[launch.episode][launch.wave] += 1
            for ep, counts in sorted(waves.items()):
                sizes = [counts[i] for i in range(len(counts))]
                print(f"init={init} mult={mult} episode={ep}: {sizes}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
