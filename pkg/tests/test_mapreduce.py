import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binosim import Scenario, Simulation
from binosim.mapreduce import (
    SHUFFLE_WEIGHT,
    AttemptState,
    FetchFailureCounter,
    Job,
    JobProfile,
    MapOutput,
    OutputStatus,
    SpillLog,
    TaskAttempt,
    advance_map_attempt,
    choose_output,
    discard_duplicate_outputs,
    kill_attempt,
    progress_rate,
    reduce_progress,
    retain_dual_outputs,
    spill_offsets,
)

from conftest import EXACT_PROFILE, run, scenario_dict


def one_map_job(split=100_000):
    profile = JobProfile(**EXACT_PROFILE)
    return Job(0, split, 0, profile)


def fresh_attempt(task, rate_factor=1.0):
    a = TaskAttempt(task.next_attempt_id(), task, 0, 0, 0)
    a.spill_log = SpillLog(0)
    a.rate = 1.0 / (task.nominal_ms * rate_factor)
    task.attempts.append(a)
    return a


def test_full_duration_completes_map():
    task = one_map_job().maps[0]
    a = fresh_attempt(task)
    advance_map_attempt(a, task.nominal_ms, 5)
    assert a.zeta == 1.0
    assert a.state is AttemptState.SUCCEEDED
    assert len(a.spill_log.entries) == 5


def test_first_spill_offset():
    task = one_map_job().maps[0]
    a = fresh_attempt(task)
    advance_map_attempt(a, 0.21 * task.nominal_ms, 5)
    assert [(e.index, e.offset) for e in a.spill_log.entries] == [(1, 20_000)]


def test_slow_node_halves_progress():
    task = one_map_job().maps[0]
    a = fresh_attempt(task, rate_factor=2.0)
    advance_map_attempt(a, task.nominal_ms, 5)
    assert a.zeta == pytest.approx(0.5)
    assert a.running


def test_progress_rate_examples():
    assert progress_rate(0.5, 10_000) == 5e-5
    assert progress_rate(0.0, 123) == 0
    assert progress_rate(1.0, 20_000) == 5e-5
    with pytest.raises(ValueError):
        progress_rate(0.3, 0)


def test_kill_semantics():
    task = one_map_job().maps[0]
    a = fresh_attempt(task)
    advance_map_attempt(a, 0.5 * task.nominal_ms, 5)
    kill_attempt(a, 5000)
    assert a.state is AttemptState.KILLED
    assert len(a.spill_log.entries) == 2  # retained for rollback
    done = fresh_attempt(task)
    done.state = AttemptState.SUCCEEDED
    kill_attempt(done)
    assert done.state is AttemptState.SUCCEEDED


def test_spill_log_offsets_strictly_increase():
    log = SpillLog(0)
    log.append(1, 10, 0)
    with pytest.raises(ValueError):
        log.append(2, 10, 1)


@given(st.integers(1, 10 ** 9), st.integers(1, 10))
def test_spill_offsets_deterministic_and_increasing(split, n):
    offs = spill_offsets(split, n)
    assert offs == spill_offsets(split, n)
    assert offs[-1] == split
    if split >= n:
        assert all(b > a for a, b in zip(offs, offs[1:]))


def test_reduce_progress_composition():
    assert reduce_progress(0, 4) == 0
    assert reduce_progress(2, 4) == pytest.approx(SHUFFLE_WEIGHT / 2)
    assert reduce_progress(4, 4) == pytest.approx(2 / 3)
    assert reduce_progress(4, 4, 1.0) == 1.0


def test_fetch_counter_consecutive_and_reset():
    c = FetchFailureCounter()
    assert c.failure("r0", "m1") == 1
    assert c.failure("r0", "m1") == 2
    c.success("r0", "m1")
    assert c.get("r0", "m1") == 0
    c.failure("r0", "m2")
    c.failure("r1", "m2")
    assert c.outstanding("r0") == ["m2"]
    c.reset_map("m2")
    assert c.outstanding("r1") == []


def test_output_routing_and_cleanup():
    job = one_map_job()
    task = job.maps[0]
    a0 = fresh_attempt(task)
    a0.node_id = 3
    retain_dual_outputs(task, a0)
    a1 = fresh_attempt(task)
    a1.node_id = 1
    retain_dual_outputs(task, a1)
    assert task.live_output().node_id == 3  # original preferred
    task.outputs[0].status = OutputStatus.LOST
    assert task.live_output().node_id == 1
    discard_duplicate_outputs(task)
    assert [o.node_id for o in task.outputs] == [1]


def test_choose_output_tiebreak_by_node():
    a = MapOutput("m", "a1", 4, 1, original=False)
    b = MapOutput("m", "a2", 2, 1, original=False)
    assert choose_output([a, b]) is b
    assert choose_output([]) is None


def test_task_counts_follow_profile():
    prof = JobProfile()
    gib = 1024 ** 3
    assert prof.num_maps(1 * gib) == 8
    assert [prof.num_reduces(s * gib) for s in (1, 10, 100)] == [1, 3, 25]


# -- whole-run properties ---------------------------------------------------


def critical_path(durations, fetch_ms, reduce_ms):
    """Longest path through map_i -> fetch_i -> reduce, reducers starting at the first map end."""
    reduce_start = min(durations)
    longest = 0
    for d in durations:
        fetch_begin = max(reduce_start, d)
        longest = max(longest, fetch_begin + fetch_ms)
    return longest + reduce_ms


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 2), st.integers(20, 100))
def test_fault_free_time_equals_critical_path(n_maps, n_red, last_k):
    last = last_k * 1000
    size = (n_maps - 1) * 100_000 + last
    raw = scenario_dict(
        jobs=[{"input_size": size, "home_node": 0}],
        job_profile={**EXACT_PROFILE, "reduces": n_red, "shuffle_throughput": 100.0},
    )
    sim = run(raw)
    job = sim.jobs[0]
    durations = [t.split_bytes / 10 for t in job.maps]
    fetch_ms = 100_000 / n_red / 100
    reduce_ms = size / n_red / 10
    assert job.exec_time == pytest.approx(critical_path(durations, fetch_ms, reduce_ms), abs=1)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_dependency_stall_bounds_reducer_progress(m):
    for k in range(m + 1):
        raw = scenario_dict(
            jobs=[{"input_size": m * 100_000, "home_node": 0}],
            job_profile={**EXACT_PROFILE, "reduces": 1, "reduce_slowstart": 1.0,
                         "shuffle_throughput": 1000.0},
            faults=[
                {"kind": "mof_loss", "at": 10_050, "target": f"job=0,map={i}"}
                for i in range(k)
            ],
        )
        sim = run(raw, until=12_500)
        ceiling = SHUFFLE_WEIGHT * (m - k) / m
        reducer = sim.jobs[0].reduces[0].attempts[0]
        if k == 0:
            assert reducer.in_reduce_phase
        else:
            assert reducer.zeta <= ceiling + 1e-12
            assert reducer.zeta == pytest.approx(ceiling)


def test_reported_progress_never_decreases_on_live_nodes():
    raw = scenario_dict(
        jobs=[{"input_size": 600_000, "home_node": 0}],
        faults=[{"kind": "node_slow", "at": 3000, "target": 0, "factor": 3.0, "duration_ms": 8000}],
    )
    sim = Simulation(Scenario.from_dict(raw), policy="none")
    seen = {}
    orig = sim.policy.on_heartbeat

    def spy(node_id, report):
        for a in sim.attempts_on(node_id):
            assert a.reported_zeta >= seen.get(a.attempt_id, 0.0)
            seen[a.attempt_id] = a.reported_zeta
        orig(node_id, report)

    sim.policy.on_heartbeat = spy
    sim.run()
    assert seen and sim.jobs[0].exec_time is not None


def test_run_spill_logs_match_offsets():
    sim = run(scenario_dict())
    for task in sim.jobs[0].maps:
        log = task.attempts[0].spill_log
        assert [e.offset for e in log.entries] == spill_offsets(task.split_bytes, 5)
