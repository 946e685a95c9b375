"""Discrete-event simulation, synthetic workloads and evaluation metrics."""

from __future__ import annotations

import bisect
import csv
import heapq
import io
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Mapping, Sequence

import numpy as np

from .appdb import AppDatabase
from .epm import JobPartitionEntry, PolicyConfig, assign_priorities, eligible_partitions
from .jobs import Job, Partition
from .sched import ClusterState, Reservation, SchedulingError, UnschedulableError, plan_pass

FAVORED_APP = "stream"

# share of jobs running the p2-favoured application; None means uniform over all apps
SCENARIOS = {"13": None, "33": 0.33, "50": 0.5}


class SimulationError(RuntimeError):
    def __init__(self, message, job_id=None):
        self.job_id = job_id
        super().__init__(message)


@dataclass(frozen=True)
class WorkloadSpec:
    job_count: int
    seed: int = 0
    mean_interarrival: float = 10.0
    max_power: int = 4  # node requests span [1, 2**max_power]
    pow2_bias: float = 0.75  # probability of rounding a request to a power of two
    app_mix: Mapping[str, float] = field(default_factory=dict)
    requested_time_factor: float = 1.5

    def __post_init__(self):
        if self.job_count <= 0:
            raise ValueError("job_count must be positive")
        if not self.mean_interarrival > 0:
            raise ValueError("mean_interarrival must be positive")
        if self.max_power < 0:
            raise ValueError("max_power must be >= 0")
        if not 0 <= self.pow2_bias <= 1:
            raise ValueError("pow2_bias must be in [0, 1]")
        if not self.requested_time_factor > 0:
            raise ValueError("requested_time_factor must be positive")
        mix = dict(self.app_mix)
        if not mix:
            raise ValueError("app_mix is empty")
        if any(p < 0 for p in mix.values()):
            raise ValueError("app_mix probabilities must be >= 0")
        if abs(sum(mix.values()) - 1.0) > 1e-9:
            raise ValueError(f"app_mix probabilities sum to {sum(mix.values())}, not 1")
        object.__setattr__(self, "app_mix", mix)


def uniform_mix(app_ids: Sequence[str]) -> dict[str, float]:
    return {a: 1.0 / len(app_ids) for a in app_ids}


def favored_mix(app_ids: Sequence[str], favored: str, share: float) -> dict[str, float]:
    """``share`` of jobs run ``favored``; the rest is uniform over the other apps."""
    others = [a for a in app_ids if a != favored]
    if favored not in app_ids:
        raise ValueError(f"unknown app {favored!r}")
    mix = {a: (1.0 - share) / len(others) for a in others}
    mix[favored] = share
    return mix


def scenario_mix(db: AppDatabase, scenario: str, favored: str = FAVORED_APP) -> dict[str, float]:
    share = SCENARIOS[scenario]
    apps = sorted(db.apps)
    return uniform_mix(apps) if share is None else favored_mix(apps, favored, share)


def generate_workload(spec: WorkloadSpec, db: AppDatabase) -> list[Job]:
    unknown = [a for a in spec.app_mix if a not in db.apps]
    if unknown:
        raise ValueError(f"app_mix references unknown apps: {', '.join(sorted(unknown))}")
    rng = np.random.default_rng(spec.seed)
    n = spec.job_count
    apps = sorted(spec.app_mix)
    probs = np.array([spec.app_mix[a] for a in apps])
    probs = probs / probs.sum()

    arrivals = np.cumsum(rng.exponential(spec.mean_interarrival, n))
    arrivals -= arrivals[0]
    exponents = rng.uniform(0.0, spec.max_power, n)
    snap = rng.random(n) < spec.pow2_bias
    sizes = np.where(snap, 2.0 ** np.round(exponents), np.round(2.0 ** exponents))
    sizes = np.clip(sizes, 1, 2 ** spec.max_power).astype(int)
    picks = rng.choice(len(apps), size=n, p=probs)

    ref_runtime = {a: db.reference_runtime(a) for a in apps}
    jobs = []
    for i in range(n):
        app = apps[picks[i]]
        jobs.append(Job(
            job_id=i,
            app_id=app,
            arrival_time=float(arrivals[i]),
            requested_nodes=int(sizes[i]),
            requested_time=spec.requested_time_factor * ref_runtime[app],
        ))
    return jobs


@dataclass(frozen=True)
class TraceRecord:
    job_id: int
    app_id: str
    arrival: float
    start: float
    end: float
    partition: str
    frequency_ghz: float
    nodes: int
    energy_j: float
    rank0_partition: str


TRACE_COLUMNS = [f.name for f in fields(TraceRecord)]


@dataclass
class MetricsReport:
    makespan: float
    avg_response_time: float
    total_energy: float
    total_runtime: float
    avg_frequency: float
    pct_optimal_partition: float
    avg_frequency_by_partition: dict[str, float] = field(default_factory=dict)
    pct_optimal_by_partition: dict[str, float] = field(default_factory=dict)

    def as_row(self, partitions: Sequence[str]) -> dict[str, float]:
        row = {k: v for k, v in asdict(self).items() if not isinstance(v, dict)}
        for pid in partitions:
            row[f"avg_frequency_{pid}"] = self.avg_frequency_by_partition.get(pid, math.nan)
            row[f"pct_optimal_{pid}"] = self.pct_optimal_by_partition.get(pid, math.nan)
        return row


METRIC_NAMES = ["makespan", "avg_response_time", "total_energy", "total_runtime",
                "avg_frequency", "pct_optimal_partition"]


@dataclass
class SimulationResult:
    metrics: MetricsReport
    trace: list[TraceRecord]
    reservations: list[tuple[float, Reservation]] = field(default_factory=list)


def _mean(values, weights=None) -> float:
    if not values:
        return math.nan
    if weights is None:
        return sum(values) / len(values)
    return sum(v * w for v, w in zip(values, weights)) / sum(weights)


def compute_metrics(trace: Sequence[TraceRecord], jobs: Sequence[Job],
                    frequency_weighting: str = "job") -> MetricsReport:
    """Workload metrics from a complete trace.

    ``frequency_weighting`` is ``"job"`` (plain mean over jobs) or
    ``"node_hours"`` (weighted by nodes x runtime).
    """
    if frequency_weighting not in ("job", "node_hours"):
        raise ValueError(f"unknown frequency weighting {frequency_weighting!r}")
    by_id = {r.job_id: r for r in trace}
    missing = [j.job_id for j in jobs if j.job_id not in by_id]
    if missing or len(by_id) != len(trace):
        raise ValueError(f"incomplete trace: {len(missing)} jobs without a record"
                         if missing else "duplicate job ids in trace")
    if not trace:
        raise ValueError("empty trace")

    records = [by_id[j.job_id] for j in jobs]
    runtimes = [r.end - r.start for r in records]

    def weights(rs):
        return None if frequency_weighting == "job" else [r.nodes * (r.end - r.start) for r in rs]

    avg_freq_by, pct_by = {}, {}
    for pid in sorted({r.partition for r in records} | {r.rank0_partition for r in records}):
        ran = [r for r in records if r.partition == pid]
        if ran:
            avg_freq_by[pid] = _mean([r.frequency_ghz for r in ran], weights(ran))
        favoring = [r for r in records if r.rank0_partition == pid]
        if favoring:
            pct_by[pid] = 100.0 * sum(r.partition == pid for r in favoring) / len(favoring)

    return MetricsReport(
        makespan=max(r.end for r in records) - min(r.arrival for r in records),
        avg_response_time=_mean([r.end - r.arrival for r in records]),
        total_energy=math.fsum(r.energy_j for r in records),
        total_runtime=math.fsum(runtimes),
        avg_frequency=_mean([r.frequency_ghz for r in records], weights(records)),
        pct_optimal_partition=100.0 * sum(r.partition == r.rank0_partition
                                          for r in records) / len(records),
        avg_frequency_by_partition=avg_freq_by,
        pct_optimal_by_partition=pct_by,
    )


PassFn = Callable[[Sequence[JobPartitionEntry], ClusterState, float],
                  "tuple[list, Reservation | None]"]


def run_simulation(jobs: Sequence[Job], partitions: Sequence[Partition], db: AppDatabase,
                   config: PolicyConfig, *, pass_fn: PassFn = plan_pass,
                   frequency_weighting: str = "job",
                   record_reservations: bool = False) -> SimulationResult:
    """Simulate the workload to completion under one policy.

    Events at equal timestamps are handled as: job ends, then submissions,
    then one scheduling pass.
    """
    for p in partitions:
        if p.model_id not in db.models:
            raise SimulationError(f"partition {p.partition_id}: unknown model {p.model_id!r}")
    pending = sorted(jobs, key=lambda j: (j.arrival_time, j.job_id))
    if len({j.job_id for j in pending}) != len(pending):
        raise SimulationError("duplicate job ids in workload")

    state = ClusterState(partitions)
    queue: list[JobPartitionEntry] = []
    queue_keys: list[tuple] = []
    ends: list[tuple[float, int]] = []
    rank0: dict[int, str] = {}
    started: dict[int, tuple[JobPartitionEntry, float, float]] = {}
    by_id = {j.job_id: j for j in pending}
    trace: list[TraceRecord] = []
    reservations: list[tuple[float, Reservation]] = []
    next_arrival = 0

    while next_arrival < len(pending) or ends or queue:
        candidates = []
        if next_arrival < len(pending):
            candidates.append(pending[next_arrival].arrival_time)
        if ends:
            candidates.append(ends[0][0])
        if not candidates:
            stuck = sorted({e.job_id for e in queue})
            raise SimulationError(f"jobs {stuck[:10]} can never start", stuck[0])
        now = min(candidates)

        while ends and ends[0][0] == now:
            _, job_id = heapq.heappop(ends)
            state.release(job_id)
            entry, start, end = started.pop(job_id)
            job = by_id[job_id]
            runtime = end - start
            energy = entry.predicted_energy * runtime / entry.predicted_runtime
            trace.append(TraceRecord(job_id, job.app_id, job.arrival_time, start, end,
                                     entry.partition_id, entry.chosen_frequency, entry.nodes,
                                     energy, rank0[job_id]))

        while next_arrival < len(pending) and pending[next_arrival].arrival_time == now:
            job = pending[next_arrival]
            eligible = eligible_partitions(job, partitions)
            if not eligible:
                raise SimulationError(
                    f"job {job.job_id} requests {job.requested_nodes} nodes, more than any "
                    f"partition owns", job.job_id)
            entries = assign_priorities(job, eligible, config, db, arrival_index=next_arrival)
            rank0[job.job_id] = next(e.partition_id for e in entries if e.rank == 0)
            for e in entries:
                key = e.sort_key()
                i = bisect.bisect(queue_keys, key)
                queue_keys.insert(i, key)
                queue.insert(i, e)
            next_arrival += 1

        if not queue:
            continue
        try:
            decisions, reservation = pass_fn(queue, state, now)
        except UnschedulableError as exc:
            raise SimulationError(str(exc), exc.job_id) from exc
        except SchedulingError as exc:
            raise SimulationError(str(exc)) from exc
        if record_reservations and reservation is not None:
            reservations.append((now, reservation))
        if decisions:
            for entry, start in decisions:
                state.start(entry, now)
                runtime = min(entry.predicted_runtime, entry.requested_time)
                started[entry.job_id] = (entry, now, now + runtime)
                heapq.heappush(ends, (now + runtime, entry.job_id))
            done = {entry.job_id for entry, _ in decisions}
            keep = [i for i, e in enumerate(queue) if e.job_id not in done]
            queue = [queue[i] for i in keep]
            queue_keys = [queue_keys[i] for i in keep]

    trace.sort(key=lambda r: r.job_id)
    metrics = compute_metrics(trace, pending, frequency_weighting)
    return SimulationResult(metrics, trace, reservations)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ""
    return str(value)


def trace_csv(trace: Sequence[TraceRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in trace:
        w.writerow([_fmt(getattr(r, c)) for c in TRACE_COLUMNS])
    return buf.getvalue()


def write_trace_csv(trace: Sequence[TraceRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(trace_csv(trace))
