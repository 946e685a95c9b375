"""
Policy comparison
=================

Run every policy on the same workloads and report the change against
MinRuntime, averaged over three seeds, for the three STREAM shares.
"""

from eamcsim import (Partition, PolicyConfig, Strategy, WorkloadSpec, generate_workload,
                     load_bundled, run_simulation, scenario_mix)
from eamcsim.cli import format_table, summarize

db = load_bundled()
partitions = [Partition("p1", 16, "p1"), Partition("p2", 16, "p2")]
policies = [PolicyConfig(s, tw) for s in Strategy for tw in (1.0, 1.5)]

rows = []
for scenario in ("13", "33", "50"):
    for seed in (1, 2, 3):
        spec = WorkloadSpec(500, seed=seed, mean_interarrival=12.0,
                            app_mix=scenario_mix(db, scenario))
        jobs = generate_workload(spec, db)
        for policy in policies:
            metrics = run_simulation(jobs, partitions, db, policy).metrics
            rows.append({"policy": policy.strategy.value, "t_weight": policy.t_weight,
                         "scenario": scenario, "seed": seed, **metrics.as_row([])})

print("improvement over MinRuntime:1 (positive is better)")
print(format_table(summarize(rows, PolicyConfig(Strategy.MIN_RUNTIME, 1.0))))
