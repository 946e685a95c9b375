"""Randomised tiny cluster instances and trace invariant checks."""

from dataclasses import dataclass, field

import numpy as np

from eamcsim.appdb import AppDatabase
from eamcsim.epm import PolicyConfig, Strategy, assign_priorities, eligible_partitions
from eamcsim.jobs import Job, Partition
from eamcsim.model import AppSignature, FrequencyRange, HardwareModel, SignatureEntry
from eamcsim.sched import plan_pass
from eamcsim.sim import run_simulation

import easy_reference

ARRIVAL_ORDERED = (Strategy.BASE_SLURM, Strategy.MIN_RUNTIME, Strategy.MIN_ENERGY,
                   Strategy.EAMC_REORDER)


@dataclass
class Instance:
    jobs: list
    partitions: list
    db: AppDatabase
    config: PolicyConfig


def make_instance(seed, total_nodes=8, max_jobs=10):
    rng = np.random.default_rng(seed)
    fr = FrequencyRange((2.0,), 2.0)
    models = {m: HardwareModel(m, 4, fr) for m in ("m1", "m2")}
    apps = {}
    for k in range(3):
        entries = {"m1": SignatureEntry(float(rng.integers(2, 9)), float(rng.integers(100, 400)),
                                        0.0, 1.0)}
        if rng.random() < 0.8:
            entries["m2"] = SignatureEntry(float(rng.integers(2, 9)),
                                           float(rng.integers(100, 400)), 0.0, 1.0)
        apps[f"a{k}"] = AppSignature(f"a{k}", entries)
    db = AppDatabase(apps, models, "m1")

    n1 = int(rng.integers(2, total_nodes - 1))
    partitions = [Partition("x", n1, "m1"), Partition("y", total_nodes - n1, "m2")]
    biggest = max(n1, total_nodes - n1)
    jobs = []
    for jid in range(int(rng.integers(3, max_jobs + 1))):
        app = f"a{int(rng.integers(3))}"
        ref = apps[app].entries["m1"].t_ref
        factor = float(rng.choice([0.5, 1.0, 1.5, 2.0]))
        jobs.append(Job(jid, app, float(rng.integers(0, 12)), int(rng.integers(1, biggest + 1)),
                        ref * factor))
    strategy = list(Strategy)[int(rng.integers(len(Strategy)))]
    config = PolicyConfig(strategy, float(rng.choice([1.0, 1.5])))
    return Instance(jobs, partitions, db, config)


def entries_by_job(inst):
    ordered = sorted(inst.jobs, key=lambda j: (j.arrival_time, j.job_id))
    out = {}
    for idx, job in enumerate(ordered):
        out[job.job_id] = assign_priorities(
            job, eligible_partitions(job, inst.partitions), inst.config, inst.db, idx)
    return out


@dataclass
class PassLog:
    passes: list = field(default_factory=list)

    def __call__(self, queue, state, now):
        starts, res = plan_pass(queue, state, now)
        self.passes.append((now, list(queue), starts, res))
        return starts, res


def run_logged(inst):
    log = PassLog()
    result = run_simulation(inst.jobs, inst.partitions, inst.db, inst.config, pass_fn=log,
                            record_reservations=True)
    return result, log


def run_reference(inst):
    caps = {p.partition_id: p.node_count for p in inst.partitions}
    return easy_reference.reference_simulation(inst.jobs, entries_by_job(inst), caps)


def compare_with_reference(inst):
    """Mismatch descriptions between eamcsim and the reference (empty if equal)."""
    result, _ = run_logged(inst)
    ref_trace, ref_res = run_reference(inst)
    ours = {r.job_id: (r.partition, r.start, r.end) for r in result.trace}
    problems = []
    if ours != ref_trace:
        problems.append(f"trace differs: {ours} vs {ref_trace}")
    got_res = [(t, (r.job_id, r.partition_id, r.nodes, r.start)) for t, r in result.reservations]
    if got_res != ref_res:
        problems.append(f"reservations differ: {got_res} vs {ref_res}")
    return problems


def check_no_oversubscription(trace, partitions):
    caps = {p.partition_id: p.node_count for p in partitions}
    for pid, cap in caps.items():
        rows = [r for r in trace if r.partition == pid]
        for t in {r.start for r in rows}:
            used = sum(r.nodes for r in rows if r.start <= t < r.end)
            assert used <= cap, f"{pid} uses {used} > {cap} at t={t}"


def check_reservation_integrity(log):
    """Entries backfilled past a reservation's start fit in its spare nodes."""
    for now, queue, starts, res in log.passes:
        if res is None:
            continue
        order = [(e.job_id, e.partition_id) for e in queue]
        res_pos = order.index((res.job_id, res.partition_id))
        crossing = 0
        for entry, _ in starts:
            pos = order.index((entry.job_id, entry.partition_id))
            if pos > res_pos and entry.partition_id == res.partition_id \
                    and now + entry.requested_time > res.start:
                crossing += entry.nodes
        assert crossing <= res.spare_nodes, (now, res, crossing)


def check_no_starvation(inst, trace, log):
    """A reservation holder starts by its first promised time unless displaced.

    Displacement means another job held the reservation at some pass before
    the holder started, or a later-arriving job with a higher-priority entry
    started in the reservation's partition before the promised time.
    """
    starts = {r.job_id: r.start for r in trace}
    by_job = entries_by_job(inst)
    key_of = {(e.job_id, e.partition_id): e.sort_key() for es in by_job.values() for e in es}
    arrival = {j.job_id: j.arrival_time for j in inst.jobs}
    first = {}
    for now, _, _, res in log.passes:
        if res is not None and res.job_id not in first:
            first[res.job_id] = (now, res)
    checked = 0
    for jid, (t0, res) in first.items():
        if starts[jid] <= res.start:
            checked += 1
            continue
        holder_key = key_of[(jid, res.partition_id)]
        holders = {r.job_id for now, _, _, r in log.passes
                   if r is not None and t0 <= now < starts[jid]}
        jumped = any(
            arrival[r.job_id] > t0 and r.partition == res.partition_id
            and r.start <= res.start and key_of[(r.job_id, r.partition)] < holder_key
            for r in trace)
        assert holders != {jid} or jumped, f"holder {jid} starved: {res}, {starts[jid]}"
        assert inst.config.strategy not in ARRIVAL_ORDERED, \
            f"holder {jid} displaced under {inst.config.strategy}"
    return checked
