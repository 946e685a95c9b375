"""Energy prediction priority module.

For each submitted job this module

1. sweeps every frequency of every eligible partition and picks the one
   minimising the normalised time/energy distance
   ``sqrt((E/E_min)**2 + t_weight * (t/t_min)**2)``;
2. ranks the partitions with the same distance, normalised this time across
   partitions at each partition's chosen frequency (``part_eff``);
3. turns the ranking into queue priorities according to the strategy.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

from .appdb import AppDatabase
from .jobs import Job, Partition
from .model import Prediction

TIER = 2 ** 30
ARRIVAL_BASE = 2 ** 20


class Strategy(str, enum.Enum):
    BASE_SLURM = "BaseSlurm"
    MIN_RUNTIME = "MinRuntime"
    MIN_ENERGY = "MinEnergy"
    EAMC_REORDER = "EamcReorder"
    EAMC_PRIORITY_INC = "EamcPriorityInc"
    EAMC_PRIORITY_INC_V = "EamcPriorityIncV"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        key = name.strip().replace("-", "").replace("_", "").lower()
        for s in cls:
            if s.value.lower() == key:
                return s
        raise ValueError(f"unknown strategy {name!r}; expected one of "
                         f"{', '.join(s.value for s in cls)}")


@dataclass(frozen=True)
class PolicyConfig:
    strategy: Strategy = Strategy.EAMC_PRIORITY_INC
    t_weight: float = 1.0
    v_threshold: float = 0.35

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if not self.t_weight > 0:
            raise ValueError(f"t_weight must be positive, got {self.t_weight}")
        if not 0 < self.v_threshold < 10:
            raise ValueError(f"v_threshold must be in (0, 10), got {self.v_threshold}")

    @property
    def label(self) -> str:
        return f"{self.strategy.value}:{self.t_weight:g}"


@dataclass(frozen=True)
class JobPartitionEntry:
    job_id: int
    partition_id: str
    chosen_frequency: float
    predicted_runtime: float
    predicted_energy: float
    part_eff: float
    priority: int
    rank: int
    nodes: int
    requested_time: float  # the job's requested time scaled to this partition/frequency
    arrival_time: float
    position: int  # index in the job's emitted entry list

    def sort_key(self):
        return (-self.priority, self.arrival_time, self.job_id, self.position)


class FrequencyChoice(NamedTuple):
    frequency: float
    energy: float
    runtime: float
    distance: float


def arrival_priority(arrival_index: int) -> int:
    """Base priority of the n-th submitted job: earlier jobs rank higher."""
    return ARRIVAL_BASE - arrival_index


def distance(energy: float, runtime: float, e_min: float, t_min: float,
             t_weight: float) -> float:
    return math.sqrt((energy / e_min) ** 2 + t_weight * (runtime / t_min) ** 2)


def _argmin_high(values: Sequence[float]) -> int:
    # ascending frequency order; ties go to the later (higher) frequency
    best = 0
    for i, v in enumerate(values):
        if v <= values[best]:
            best = i
    return best


def optimal_frequency(sweep: Sequence[Prediction], t_weight: float) -> FrequencyChoice:
    """Pick the frequency minimising the normalised time/energy distance."""
    if not sweep:
        raise ValueError("empty frequency sweep")
    e_min = min(p.energy for p in sweep)
    t_min = min(p.runtime for p in sweep)
    dists = [distance(p.energy, p.runtime, e_min, t_min, t_weight) for p in sweep]
    i = _argmin_high(dists)
    return FrequencyChoice(sweep[i].frequency, sweep[i].energy, sweep[i].runtime, dists[i])


def min_runtime_choice(sweep: Sequence[Prediction]) -> Prediction:
    return sweep[_argmin_high([p.runtime for p in sweep])]


def min_energy_choice(sweep: Sequence[Prediction]) -> Prediction:
    return sweep[_argmin_high([p.energy for p in sweep])]


def compute_part_eff(points: Sequence[tuple[float, float]], t_weight: float) -> list[float]:
    """part_eff per partition from (energy, runtime) at each partition's chosen frequency."""
    if not points:
        raise ValueError("no partitions to compare")
    e_min = min(e for e, _ in points)
    t_min = min(t for _, t in points)
    return [distance(e, t, e_min, t_min, t_weight) for e, t in points]


def rank_order(part_eff: Sequence[float]) -> list[int]:
    """Indices sorted by part_eff; ties keep declaration order."""
    return sorted(range(len(part_eff)), key=lambda i: part_eff[i])


@lru_cache(maxsize=4096)
def _sweep(db: AppDatabase, app_id: str, model_id: str) -> tuple[Prediction, ...]:
    model = db.models[model_id]
    return tuple(db.predict(app_id, model_id, f) for f in model.freq_range)


def frequency_sweep(db: AppDatabase, app_id: str, model_id: str,
                    nodes: int = 1) -> list[Prediction]:
    sweep = _sweep(db, app_id, model_id)
    if nodes == 1:
        return list(sweep)
    return [Prediction(p.frequency, p.runtime, p.node_power, p.energy * nodes) for p in sweep]


def select_optimal_frequency(job: Job, partition: Partition, t_weight: float,
                             db: AppDatabase) -> FrequencyChoice:
    return optimal_frequency(
        frequency_sweep(db, job.app_id, partition.model_id, job.requested_nodes), t_weight)


def min_runtime_frequency(job: Job, partition: Partition, db: AppDatabase) -> float:
    return min_runtime_choice(frequency_sweep(db, job.app_id, partition.model_id)).frequency


def min_energy_frequency(job: Job, partition: Partition, db: AppDatabase) -> float:
    return min_energy_choice(frequency_sweep(db, job.app_id, partition.model_id)).frequency


def eligible_partitions(job: Job, partitions: Sequence[Partition]) -> list[Partition]:
    return [p for p in partitions if p.node_count >= job.requested_nodes]


def assign_priorities(job: Job, partitions: Sequence[Partition], config: PolicyConfig,
                      db: AppDatabase, arrival_index: int = 0) -> list[JobPartitionEntry]:
    """Build the job's partition entries with frequencies and queue priorities.

    ``partitions`` must already be restricted to those able to host the job.
    """
    if not partitions:
        raise ValueError(f"job {job.job_id}: no partition to submit to")
    strategy = config.strategy
    tw = config.t_weight
    nodes = job.requested_nodes
    base = arrival_priority(arrival_index)
    ref_runtime = db.reference_runtime(job.app_id)

    sweeps = [frequency_sweep(db, job.app_id, p.model_id, nodes) for p in partitions]
    if strategy is Strategy.BASE_SLURM:
        ranked_at = [s[-1] for s in sweeps]
        part_eff = compute_part_eff([(p.energy, p.runtime) for p in ranked_at], tw)
    else:
        optimal = [optimal_frequency(s, tw) for s in sweeps]
        part_eff = compute_part_eff([(c.energy, c.runtime) for c in optimal], tw)
    order = rank_order(part_eff)
    rank = {idx: r for r, idx in enumerate(order)}

    def entry(idx: int, choice, priority: int, position: int) -> JobPartitionEntry:
        return JobPartitionEntry(
            job_id=job.job_id,
            partition_id=partitions[idx].partition_id,
            chosen_frequency=choice.frequency,
            predicted_runtime=choice.runtime,
            predicted_energy=choice.energy,
            part_eff=part_eff[idx],
            priority=priority,
            rank=rank[idx],
            nodes=nodes,
            requested_time=job.requested_time * choice.runtime / ref_runtime,
            arrival_time=job.arrival_time,
            position=position,
        )

    if strategy is Strategy.BASE_SLURM:
        best = order[0]
        return [entry(best, sweeps[best][-1], base, 0)]

    if strategy in (Strategy.MIN_RUNTIME, Strategy.MIN_ENERGY):
        pick = min_runtime_choice if strategy is Strategy.MIN_RUNTIME else min_energy_choice
        return [entry(i, pick(sweeps[i]), base, i) for i in range(len(partitions))]

    best_eff = part_eff[order[0]]
    entries = []
    for pos, idx in enumerate(order):
        r = rank[idx]
        if strategy is Strategy.EAMC_REORDER:
            priority = base
        else:
            priority = base + TIER if r == 0 else base
            if (strategy is Strategy.EAMC_PRIORITY_INC_V
                    and part_eff[idx] > best_eff * (1 + config.v_threshold)):
                priority = base - TIER
        entries.append(entry(idx, optimal[idx], priority, pos))
    return entries
