import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eamcsim.appdb import load_bundled
from eamcsim.epm import PolicyConfig, Strategy
from eamcsim.jobs import Job, Partition
from eamcsim.sim import (TRACE_COLUMNS, SimulationError, TraceRecord, WorkloadSpec,
                         compute_metrics, favored_mix, generate_workload, run_simulation,
                         scenario_mix, trace_csv, uniform_mix)

DB = load_bundled()
TWO = [Partition("p1", 16, "p1"), Partition("p2", 16, "p2")]
THREE = TWO + [Partition("p3", 16, "p3")]


def record(job_id, arrival, start, end, partition="p1", rank0="p1", energy=1.0, freq=2.0,
           nodes=1):
    return TraceRecord(job_id, "ep.D", arrival, start, end, partition, freq, nodes, energy,
                       rank0)


# -- workload -----------------------------------------------------------------------

def test_single_job_workload():
    jobs = generate_workload(WorkloadSpec(1, seed=5, app_mix=uniform_mix(sorted(DB.apps))), DB)
    assert len(jobs) == 1 and jobs[0].arrival_time >= 0


def test_favored_share_within_binomial_bound():
    spec = WorkloadSpec(10000, seed=11, app_mix=favored_mix(sorted(DB.apps), "stream", 0.5))
    jobs = generate_workload(spec, DB)
    share = sum(j.app_id == "stream" for j in jobs) / len(jobs)
    assert abs(share - 0.5) <= 0.02


def test_workload_deterministic():
    spec = WorkloadSpec(300, seed=9, app_mix=scenario_mix(DB, "33"))
    assert generate_workload(spec, DB) == generate_workload(spec, DB)
    other = generate_workload(WorkloadSpec(300, seed=10, app_mix=scenario_mix(DB, "33")), DB)
    assert other != generate_workload(spec, DB)


def test_workload_shape():
    spec = WorkloadSpec(2000, seed=3, mean_interarrival=7.0, max_power=4,
                        app_mix=uniform_mix(sorted(DB.apps)), requested_time_factor=2.0)
    jobs = generate_workload(spec, DB)
    arrivals = [j.arrival_time for j in jobs]
    assert arrivals[0] == 0.0 and arrivals == sorted(arrivals)
    assert (arrivals[-1] / (len(jobs) - 1)) == pytest.approx(7.0, rel=0.08)
    assert {j.requested_nodes for j in jobs} <= set(range(1, 17))
    pow2 = sum(j.requested_nodes in (1, 2, 4, 8, 16) for j in jobs) / len(jobs)
    assert pow2 > 0.75
    for j in jobs[:20]:
        assert j.requested_time == pytest.approx(2.0 * DB.reference_runtime(j.app_id))


def test_workload_rejects_bad_mix():
    with pytest.raises(ValueError, match="unknown apps"):
        generate_workload(WorkloadSpec(5, app_mix={"nope": 1.0}), DB)
    with pytest.raises(ValueError, match="sum"):
        WorkloadSpec(5, app_mix={"ep.D": 0.6})
    with pytest.raises(ValueError):
        WorkloadSpec(0, app_mix={"ep.D": 1.0})


def test_scenario_mixes():
    assert scenario_mix(DB, "13") == pytest.approx(uniform_mix(sorted(DB.apps)))
    assert scenario_mix(DB, "13")["stream"] == pytest.approx(0.125)
    assert scenario_mix(DB, "50")["stream"] == 0.5


# -- metrics ------------------------------------------------------------------------

def test_metrics_single_job():
    m = compute_metrics([record(0, 0.0, 0.0, 100.0)], [Job(0, "ep.D", 0.0, 1, 100.0)])
    assert m.makespan == 100 and m.avg_response_time == 100


def test_metrics_two_jobs():
    jobs = [Job(0, "ep.D", 0.0, 1, 100.0), Job(1, "ep.D", 10.0, 1, 100.0)]
    trace = [record(0, 0.0, 0.0, 100.0), record(1, 10.0, 10.0, 50.0, partition="p2")]
    m = compute_metrics(trace, jobs)
    assert m.makespan == 100
    assert m.avg_response_time == 70
    assert m.pct_optimal_partition == 50.0
    assert m.pct_optimal_by_partition == {"p1": 50.0}
    assert m.avg_frequency_by_partition == {"p1": 2.0, "p2": 2.0}


def test_metrics_node_hour_weighting():
    jobs = [Job(0, "ep.D", 0.0, 1, 1), Job(1, "ep.D", 0.0, 1, 1)]
    trace = [record(0, 0, 0, 10, freq=1.0, nodes=1), record(1, 0, 0, 10, freq=2.0, nodes=3)]
    assert compute_metrics(trace, jobs).avg_frequency == 1.5
    assert compute_metrics(trace, jobs, "node_hours").avg_frequency == 1.75
    with pytest.raises(ValueError):
        compute_metrics(trace, jobs, "watts")


def test_metrics_all_optimal_and_incomplete():
    jobs = [Job(i, "ep.D", 0.0, 1, 1) for i in range(3)]
    trace = [record(i, 0, 0, 5) for i in range(3)]
    assert compute_metrics(trace, jobs).pct_optimal_partition == 100.0
    with pytest.raises(ValueError, match="incomplete"):
        compute_metrics(trace[:2], jobs)


# -- simulation ----------------------------------------------------------------------

def test_single_job_idle_system():
    job = Job(0, "lu.C", 0.0, 4, 1000.0)
    part = [Partition("p1", 16, "p1")]
    res = run_simulation([job], part, DB, PolicyConfig(Strategy.MIN_RUNTIME))
    pred = DB.predict("lu.C", "p1", 2.7, 4)
    assert res.metrics.makespan == pytest.approx(pred.runtime)
    assert res.metrics.avg_response_time == pytest.approx(pred.runtime)
    assert res.metrics.total_energy == pytest.approx(pred.energy)
    assert res.trace[0].frequency_ghz == 2.7


def test_full_partition_jobs_serialize():
    jobs = [Job(0, "ep.D", 0.0, 16, 200.0), Job(1, "ep.D", 0.0, 16, 200.0)]
    part = [Partition("p1", 16, "p1")]
    res = run_simulation(jobs, part, DB, PolicyConfig(Strategy.MIN_RUNTIME))
    rt = DB.predict("ep.D", "p1", 2.7, 16).runtime
    assert res.trace[1].start == pytest.approx(res.trace[0].end)
    assert res.metrics.makespan == pytest.approx(2 * rt)


def test_underestimated_job_truncated_at_requested_time():
    job = Job(0, "lu.C", 0.0, 1, 10.0)
    res = run_simulation([job], [Partition("p1", 4, "p1")], DB, PolicyConfig(Strategy.MIN_RUNTIME))
    full = DB.predict("lu.C", "p1", 2.7, 1)
    assert res.trace[0].end == pytest.approx(10.0)
    assert res.trace[0].energy_j == pytest.approx(full.energy * 10.0 / full.runtime)


def test_oversized_job_aborts_with_id():
    with pytest.raises(SimulationError) as info:
        run_simulation([Job(3, "ep.D", 0.0, 32, 10.0)], TWO, DB, PolicyConfig())
    assert info.value.job_id == 3


def test_priority_inc_beats_min_runtime_on_optimal_share():
    spec = WorkloadSpec(200, seed=42, mean_interarrival=12.0, app_mix=uniform_mix(sorted(DB.apps)))
    jobs = generate_workload(spec, DB)
    inc = run_simulation(jobs, THREE, DB, PolicyConfig(Strategy.EAMC_PRIORITY_INC))
    base = run_simulation(jobs, THREE, DB, PolicyConfig(Strategy.MIN_RUNTIME))
    assert inc.metrics.pct_optimal_partition > base.metrics.pct_optimal_partition


def test_min_runtime_runtime_sum_regression():
    for seed in (1, 2, 3):
        spec = WorkloadSpec(300, seed=seed, mean_interarrival=12.0, app_mix=scenario_mix(DB, "50"))
        jobs = generate_workload(spec, DB)
        fast = run_simulation(jobs, TWO, DB, PolicyConfig(Strategy.MIN_RUNTIME))
        slow = run_simulation(jobs, TWO, DB, PolicyConfig(Strategy.MIN_ENERGY))
        assert fast.metrics.total_runtime <= slow.metrics.total_runtime


def test_trace_csv_columns():
    text = trace_csv([record(0, 0.0, 1.0, 2.5)])
    header, row = text.strip().split("\n")
    assert header.split(",") == TRACE_COLUMNS
    assert row.split(",")[4] == "2.5"


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(list(Strategy)), st.sampled_from(["13", "33", "50"]))
def test_simulation_invariants(seed, strategy, scenario):
    spec = WorkloadSpec(60, seed=seed, mean_interarrival=8.0, app_mix=scenario_mix(DB, scenario))
    jobs = generate_workload(spec, DB)
    res = run_simulation(jobs, TWO, DB, PolicyConfig(strategy, 1.5))
    by_id = {r.job_id: r for r in res.trace}
    assert sorted(by_id) == [j.job_id for j in jobs] and len(res.trace) == len(jobs)
    for j in jobs:
        r = by_id[j.job_id]
        assert r.start >= j.arrival_time and r.end > r.start
    # energy additivity against fresh per-job predictions
    expected = 0.0
    for r in res.trace:
        pred = DB.predict(r.app_id, r.partition, r.frequency_ghz, r.nodes)
        expected += pred.energy * (r.end - r.start) / pred.runtime
    assert res.metrics.total_energy == pytest.approx(expected, rel=1e-6)
    assert 0 <= res.metrics.pct_optimal_partition <= 100
    if strategy is Strategy.BASE_SLURM:
        assert res.metrics.pct_optimal_partition == 100.0
        for r in res.trace:
            assert r.frequency_ghz == DB.models[r.partition].freq_range.f_max
    again = run_simulation(jobs, TWO, DB, PolicyConfig(strategy, 1.5))
    assert again.metrics == res.metrics


def test_energy_is_nonnegative_and_finite():
    spec = WorkloadSpec(100, seed=4, app_mix=scenario_mix(DB, "50"))
    res = run_simulation(generate_workload(spec, DB), TWO, DB,
                         PolicyConfig(Strategy.EAMC_PRIORITY_INC_V))
    assert all(math.isfinite(r.energy_j) and r.energy_j > 0 for r in res.trace)
