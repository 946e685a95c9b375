"""Cluster bookkeeping and EASY backfilling over job-partition entries.

The queue holds one entry per (job, partition) candidate. A pass walks it in
priority order and starts whatever fits, except that the first entry that
cannot start gets a reservation (the earliest time its partition frees
enough nodes, judged by requested times). Later entries may only start in
that partition if they end by the reservation start, or if they only use
nodes the reserved entry will not need. Once an entry of a job starts, the
job's other entries are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import groupby
from typing import Iterable, NamedTuple, Sequence

from .epm import JobPartitionEntry
from .jobs import Partition


class SchedulingError(RuntimeError):
    pass


class UnschedulableError(SchedulingError):
    def __init__(self, job_id, message):
        self.job_id = job_id
        super().__init__(f"job {job_id}: {message}")


@dataclass(frozen=True)
class Allocation:
    job_id: int
    partition_id: str
    nodes: int
    start: float
    expected_end: float


@dataclass(frozen=True)
class Reservation:
    job_id: int
    partition_id: str
    nodes: int
    start: float
    end: float
    spare_nodes: int  # nodes free at `start` beyond what the reserved entry needs


class StartDecision(NamedTuple):
    entry: JobPartitionEntry
    start: float


def reservation_count_policy() -> int:
    """Number of queued entries that hold a reservation during a pass."""
    return 1


class ClusterState:
    def __init__(self, partitions: Iterable[Partition]):
        self.partitions = {p.partition_id: p for p in partitions}
        self.running: dict[int, Allocation] = {}
        self._used = {pid: 0 for pid in self.partitions}

    def node_count(self, pid: str) -> int:
        return self.partitions[pid].node_count

    def free_nodes(self, pid: str) -> int:
        return self.partitions[pid].node_count - self._used[pid]

    def allocations(self, pid: str) -> list[Allocation]:
        return [a for a in self.running.values() if a.partition_id == pid]

    def start(self, entry: JobPartitionEntry, now: float) -> Allocation:
        pid = entry.partition_id
        if entry.job_id in self.running:
            raise SchedulingError(f"job {entry.job_id} is already running")
        if entry.nodes > self.free_nodes(pid):
            raise SchedulingError(
                f"job {entry.job_id} needs {entry.nodes} nodes, {pid} has "
                f"{self.free_nodes(pid)} free")
        alloc = Allocation(entry.job_id, pid, entry.nodes, now, now + entry.requested_time)
        self.running[entry.job_id] = alloc
        self._used[pid] += entry.nodes
        return alloc

    def release(self, job_id: int) -> Allocation:
        try:
            alloc = self.running.pop(job_id)
        except KeyError:
            raise SchedulingError(f"job {job_id} is not running") from None
        self._used[alloc.partition_id] -= alloc.nodes
        return alloc

    def is_idle(self) -> bool:
        return not self.running


def on_job_end(state: ClusterState, job_id: int, now: float) -> Allocation:
    """Free the job's nodes. Reservations are rebuilt by the next pass."""
    return state.release(job_id)


def earliest_start(free_now: int, releases: Iterable[tuple[float, int]], nodes: int,
                   now: float) -> tuple[float, int]:
    """Earliest time ``nodes`` are free, and the spare node count at that time.

    ``releases`` are (time, nodes) pairs of running work, by expected end.
    """
    if free_now >= nodes:
        return now, free_now - nodes
    avail = free_now
    for t, group in groupby(sorted(releases), key=lambda r: r[0]):
        avail += sum(n for _, n in group)
        if avail >= nodes:
            return t, avail - nodes
    raise SchedulingError(f"{nodes} nodes never become available")


def plan_pass(queue: Sequence[JobPartitionEntry], state: ClusterState,
              now: float) -> tuple[list[StartDecision], Reservation | None]:
    """One EASY pass. Does not modify ``state``; returns starts and the reservation."""
    free = {pid: state.free_nodes(pid) for pid in state.partitions}
    releases = {pid: [] for pid in state.partitions}
    for a in state.running.values():
        releases[a.partition_id].append((a.expected_end, a.nodes))

    starts: list[StartDecision] = []
    started: set[int] = set()
    reservation: Reservation | None = None
    spare = 0

    for e in queue:
        if reservation is not None and not any(free.values()):
            break
        if e.job_id in started:
            continue
        pid = e.partition_id
        if pid not in free:
            raise SchedulingError(f"job {e.job_id}: unknown partition {pid!r}")
        if e.nodes > state.node_count(pid):
            raise UnschedulableError(
                e.job_id, f"requests {e.nodes} nodes but {pid} has {state.node_count(pid)}")

        if free[pid] < e.nodes:
            if reservation is None:
                t, spare = earliest_start(free[pid], releases[pid], e.nodes, now)
                reservation = Reservation(e.job_id, pid, e.nodes, t, t + e.requested_time,
                                          spare)
            continue

        if reservation is not None and pid == reservation.partition_id:
            end = now + e.requested_time
            if end > reservation.start:
                if e.nodes > spare:
                    continue
                spare -= e.nodes

        free[pid] -= e.nodes
        releases[pid].append((now + e.requested_time, e.nodes))
        started.add(e.job_id)
        starts.append(StartDecision(e, now))

    return starts, reservation


def schedule_pass(queue: Sequence[JobPartitionEntry], state: ClusterState,
                  now: float) -> list[StartDecision]:
    return plan_pass(queue, state, now)[0]
