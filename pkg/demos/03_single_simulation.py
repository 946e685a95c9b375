"""
One simulation run
==================

Generate a synthetic workload where half of the jobs run STREAM, simulate
it on two 16-node partitions under EamcPriorityInc and look at the trace.
"""

from eamcsim import (Partition, PolicyConfig, Strategy, WorkloadSpec, generate_workload,
                     load_bundled, run_simulation, scenario_mix)

db = load_bundled()
partitions = [Partition("p1", 16, "p1"), Partition("p2", 16, "p2")]

spec = WorkloadSpec(job_count=200, seed=1, mean_interarrival=12.0, app_mix=scenario_mix(db, "50"))
jobs = generate_workload(spec, db)
print(f"{len(jobs)} jobs, mean request {sum(j.requested_nodes for j in jobs) / len(jobs):.2f} nodes")

result = run_simulation(jobs, partitions, db, PolicyConfig(Strategy.EAMC_PRIORITY_INC))
m = result.metrics
print(f"makespan {m.makespan:.0f} s, mean response {m.avg_response_time:.1f} s")
print(f"energy {m.total_energy / 1e6:.2f} MJ, runtime sum {m.total_runtime:.0f} s")
print(f"mean frequency {m.avg_frequency:.2f} GHz, on preferred partition "
      f"{m.pct_optimal_partition:.1f}%")
print("per partition:", m.pct_optimal_by_partition)

print("\nfirst jobs:")
for r in result.trace[:8]:
    print(f"  job {r.job_id:>3} {r.app_id:<8} arrive {r.arrival:>7.1f}  start {r.start:>7.1f}  "
          f"{r.partition} @ {r.frequency_ghz:.1f} GHz  x{r.nodes:<2} (prefers {r.rank0_partition})")
