"""
Per-partition frequency choice and ranking
==========================================

For each application, pick the frequency that balances energy and runtime
on every partition, then rank the partitions. A larger t_weight favours
runtime over energy.
"""

from eamcsim import Job, Partition, PolicyConfig, Strategy, assign_priorities, load_bundled

db = load_bundled()
partitions = [Partition(pid, 16, pid) for pid in ("p1", "p2", "p3")]

for tw in (1.0, 1.5):
    print(f"\nt_weight = {tw}")
    print(f"{'app':<9} " + "  ".join(f"{p.partition_id + ' GHz/eff':>14}" for p in partitions)
          + "  best")
    for app in sorted(db.apps):
        job = Job(0, app, 0.0, 4, 1.5 * db.reference_runtime(app))
        entries = assign_priorities(job, partitions, PolicyConfig(Strategy.EAMC_PRIORITY_INC, tw),
                                    db)
        by_pid = {e.partition_id: e for e in entries}
        cells = [f"{by_pid[p.partition_id].chosen_frequency:>6.1f} / "
                 f"{by_pid[p.partition_id].part_eff:<5.3f}" for p in partitions]
        print(f"{app:<9} " + "  ".join(f"{c:>14}" for c in cells) + f"  {entries[0].partition_id}")
