"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``C<n> PASS|FAIL`` line with its measurements and
wall time, then asserts both the criterion and its time budget.
"""

import collections
import filecmp
import random
import statistics
import time
from fractions import Fraction
from pathlib import Path

import pytest
import yaml

from binosim import Scenario
from binosim.bino import node_progress_change_rate, node_progress_rate, spatial_assess, temporal_assess
from binosim.cli import main as cli_main
from binosim.cluster import estimate_next_loss
from binosim.experiment import reference_run, run_policy
from binosim.scenario import set_path

from test_bino import as_float, exact_delta, exact_spatial, exact_temporal
from test_cluster import direct_estimate

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def load(name):
    return yaml.safe_load((SCENARIOS / name).read_text())


@pytest.fixture
def report(capsys):
    start = time.perf_counter()

    def emit(n, ok, detail, budget_s=None):
        elapsed = time.perf_counter() - start
        in_time = budget_s is None or elapsed < budget_s
        verdict = "PASS" if ok and in_time else "FAIL"
        budget = f"/{budget_s}s" if budget_s else ""
        with capsys.disabled():
            print(f"\nC{n} {verdict} [{elapsed:.1f}s{budget}] {detail}")
        assert ok, detail
        assert in_time, f"took {elapsed:.1f}s, budget {budget_s}s"

    return emit


def test_c1_formula_oracles(report):
    rng = random.Random(1)
    worst = 0.0
    for _ in range(1000):
        window = [rng.randint(1, 10 ** 6) for _ in range(rng.randint(1, 12))]
        want = direct_estimate(window)
        worst = max(worst, abs(estimate_next_loss(window) - want) / want)
    mismatches = 0
    for _ in range(200):
        exact_rates, float_rates = [], []
        for _ in range(rng.randint(2, 6)):
            att = [(rng.randint(1, 99), rng.randint(1, 60) * 1000) for _ in range(rng.randint(1, 4))]
            exact_rates.append(sum(Fraction(z, 100 * tau) for z, tau in att) / len(att))
            float_rates.append(node_progress_rate([z / 100 / tau for z, tau in att]))
        for p, q in zip(exact_rates, float_rates):
            mismatches += spatial_assess(q, float_rates) != exact_spatial(p, exact_rates)
        ids = [f"a{i}" for i in range(rng.randint(1, 5))]
        s0 = (0, {a: rng.randint(0, 50) for a in ids})
        s1 = (1000, {a: s0[1][a] + rng.randint(0, 25) for a in ids})
        s2 = (2000, {a: s1[1][a] + rng.randint(0, 25) for a in ids})
        e1, e2 = exact_delta(s0, s1), exact_delta(s1, s2)
        d1 = node_progress_change_rate(as_float(s0), as_float(s1))
        d2 = node_progress_change_rate(as_float(s1), as_float(s2))
        if not (e1 > 0 and e2 == e1 / 10):  # exact decimal boundary
            mismatches += temporal_assess(d1, d2, 0.1) != exact_temporal(e1, e2)
    ok = worst <= 1e-9 and mismatches == 0
    report(1, ok, f"eq4 worst rel err {worst:.2e} over 1000 windows; "
                  f"{mismatches} verdict mismatches over 200 snapshots", 5)


def test_c2_scope_limited_failure(report):
    scenario = Scenario.load(SCENARIOS / "single_node_failure.yaml")
    timeout = scenario.framework.task_timeout_ms
    ratios, lags = [], []
    ok = True
    for seed in range(10):
        ref = reference_run(scenario, seed)
        yarn = run_policy(scenario, "yarn", seed, reference=ref)
        bino = run_policy(scenario, "bino", seed, reference=ref)
        y, b = yarn.records[0].exec_time, bino.records[0].exec_time
        fault_at = bino.sim.fault_script.entries[0].fired_at
        detected = min(t for t, how, _, _ in bino.sim.policy.assessment_log if how in ("failure", "temporal"))
        lags.append(detected - fault_at)
        ratios.append(b / y)
        ok &= y > timeout and b <= 0.5 * y
    report(2, ok, f"bino/yarn time max {max(ratios):.3f} (mean {statistics.fmean(ratios):.3f}); "
                  f"detection {min(lags)}-{max(lags)} ms after the fault", 30)


def test_c3_dependency_oblivious(report):
    scenario = Scenario.load(SCENARIOS / "mof_loss.yaml")
    pairs, exact_second, yarn_limit = [], 0, 0
    ok = True
    for seed in range(10):
        ref = reference_run(scenario, seed)
        yarn = run_policy(scenario, "yarn", seed, reference=ref)
        bino = run_policy(scenario, "bino", seed, reference=ref)
        ys, bs = yarn.records[0].slowdown, bino.records[0].slowdown
        pairs.append((ys, bs))
        ok &= bs < ys
        yarn_limit += any(c >= scenario.framework.max_fetch_failures for *_, c in yarn.sim.fetch_failures)
        lost = {m for _, _, m, _ in bino.sim.fetch_failures}
        for m in lost:
            second = min(t for t, _, mm, c in bino.sim.fetch_failures if mm == m and c == 2)
            rerun = min(l.issued_at for l in bino.sim.launches if l.task_id == m and l.speculative)
            exact_second += rerun == second
        ok &= len(lost) == 1
    ok &= exact_second == 10
    gains = [y / b for y, b in pairs]
    report(3, ok, f"yarn slowdown mean {statistics.fmean(y for y, _ in pairs):.3f}, "
                  f"bino {statistics.fmean(b for _, b in pairs):.3f}, min gain {min(gains):.3f}; "
                  f"bino relaunched at 2nd fetch failure in {exact_second}/10; "
                  f"yarn reached the fetch limit in {yarn_limit}/10", 30)


def test_c4_size_dependent_slowdown(report):
    raw = load("size_trend.yaml")
    means = {}
    for size in ("1GB", "100GB"):
        scenario = Scenario.from_dict(set_path(raw, "jobs.0.input_size", size))
        means[size] = statistics.fmean(
            run_policy(scenario, "yarn", seed).records[0].slowdown for seed in range(20)
        )
    ratio = means["1GB"] / means["100GB"]
    report(4, ratio >= 2.0, f"yarn mean slowdown 1GB {means['1GB']:.3f}, 100GB {means['100GB']:.3f}, "
                            f"ratio {ratio:.2f}", 120)


def test_c5_variance_reduction(report):
    scenario = Scenario.load(SCENARIOS / "variance.yaml")
    slow = {"yarn": [], "bino": []}
    for seed in range(50):
        ref = reference_run(scenario, seed)
        for policy in slow:
            slow[policy].append(run_policy(scenario, policy, seed, reference=ref).records[0].slowdown)
    sy, sb = statistics.pstdev(slow["yarn"]), statistics.pstdev(slow["bino"])
    report(5, sb < 0.5 * sy, f"sigma yarn {sy:.3f}, bino {sb:.3f}, ratio {sb / sy:.3f} over 50 seeds", 180)


def recovery_after_spill(raw, k):
    scenario = Scenario.from_dict(set_path(raw, "faults.0.at", f"spills={k}"))
    sim = run_policy(scenario, "bino", 0).sim
    failed_at = next(t for t, aid, reason in sim.failures if reason == "disk_exception")
    task = sim.jobs[0].maps[0]
    return task.completed_at - failed_at


def test_c6_rollback_monotone(report):
    raw = load("disk_exception.yaml")
    times = [recovery_after_spill(raw, k) for k in (1, 2, 3, 4)]
    ok = all(b < a for a, b in zip(times, times[1:])) and times[3] <= 0.5 * times[0]
    report(6, ok, f"recovery ms after spill 1-4: {times}; spill4/spill1 {times[3] / times[0]:.3f}", 30)


def test_c7_stress_trend(report):
    scenario = Scenario.load(SCENARIOS / "stress.yaml")
    by_class = {"yarn": collections.defaultdict(list), "bino": collections.defaultdict(list)}
    per_seed = []
    for seed in range(5):
        ref = reference_run(scenario, seed)
        means = {}
        for policy in by_class:
            recs = [r for r in run_policy(scenario, policy, seed, reference=ref).records if r.exec_time]
            for r in recs:
                by_class[policy][r.input_size >> 30].append(r.exec_time)
            means[policy] = statistics.fmean(r.exec_time for r in recs)
        per_seed.append(1 - means["bino"] / means["yarn"])
    overall = {p: statistics.fmean(x for v in c.values() for x in v) for p, c in by_class.items()}

    def gain(gb):
        return 1 - statistics.fmean(by_class["bino"][gb]) / statistics.fmean(by_class["yarn"][gb])

    have_large = bool(by_class["yarn"][100]) and bool(by_class["bino"][100])
    small = gain(1)
    large = gain(100) if have_large else float("nan")
    ok = have_large and overall["bino"] < overall["yarn"] and small > large
    seeds = ", ".join(f"{g:+.3f}" for g in per_seed)
    report(7, ok, f"mean exec yarn {overall['yarn']:.0f} ms, bino {overall['bino']:.0f} ms "
                  f"(gain {1 - overall['bino'] / overall['yarn']:.3f}; per seed {seeds}); "
                  f"gain 1GB {small:.3f} vs 100GB {large:.3f} (n={len(by_class['yarn'][100])})", 300)


def wave_counts(sim):
    waves = collections.defaultdict(lambda: collections.Counter())
    for launch in sim.launches:
        if launch.wave is not None:
            waves[launch.episode][launch.wave] += 1
    return waves


def test_c8_wave_accounting(report):
    raw = load("waves.yaml")
    bad, checked, longest = [], 0, 0
    for init in (1, 2, 3):
        for mult in (1, 2, 4):
            scenario = Scenario.from_dict(
                set_path(set_path(raw, "bino.coll_init_num", init), "bino.coll_multiply", mult)
            )
            for seed in range(3):
                sim = run_policy(scenario, "bino", seed).sim
                for episode, counts in wave_counts(sim).items():
                    seq = [counts[i] for i in range(len(counts))]
                    want = [init * mult ** i for i in range(len(seq))]
                    longest = max(longest, len(seq))
                    if seq[:-1] != want[:-1] or not 1 <= seq[-1] <= want[-1]:
                        bad.append((init, mult, seed, episode, seq))
                    checked += 1
                dupes = sum(len(t.running_attempts()) for j in sim.jobs for t in j.tasks())
                unfinished = [j.job_id for j in sim.jobs if j.exec_time is None]
                if dupes or unfinished:
                    bad.append((init, mult, seed, "leftover", dupes, unfinished))
    report(8, not bad and longest >= 3,
           f"{checked} episodes checked, longest {longest} waves; violations {bad[:3]}", 10)


DETERMINISM_RUNS = [
    ("single_node_failure.yaml", 3, []),
    ("mof_loss.yaml", 3, []),
    ("size_trend.yaml", 3, ["--sweep", "jobs.0.input_size=1GB,100GB"]),
    ("variance.yaml", 3, []),
    ("disk_exception.yaml", 3, ["--sweep", "faults.0.at=spills=1,spills=4"]),
    ("stress.yaml", 3, []),
    ("waves.yaml", 3, ["--sweep", "bino.coll_init_num=1,3", "--sweep", "bino.coll_multiply=1,4"]),
]


def test_c9_determinism(report, tmp_path):
    diffs, compared = [], 0
    for name, seed, extra in DETERMINISM_RUNS:
        for policy in ("yarn", "bino"):
            outs = []
            for rep in ("a", "b"):
                out = tmp_path / f"{name}-{policy}-{rep}"
                code = cli_main(["--scenario", str(SCENARIOS / name), "--policy", policy,
                                 "--seed", str(seed), "--out", str(out), *extra])
                assert code == 0
                outs.append(out)
            files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*.csv"))
            _, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], [str(f) for f in files], shallow=False)
            compared += len(files)
            diffs += [f"{name}/{policy}/{f}" for f in mismatch + errors]
    report(9, compared > 0 and not diffs, f"{compared} CSV pairs compared, {len(diffs)} differ {diffs[:3]}")
