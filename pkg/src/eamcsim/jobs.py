"""Job submissions and partitions: the inputs shared by the policy and the scheduler."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Job:
    job_id: int
    app_id: str
    arrival_time: float
    requested_nodes: int
    requested_time: float

    def __post_init__(self):
        if self.arrival_time < 0:
            raise ValueError(f"job {self.job_id}: arrival_time must be >= 0")
        if self.requested_nodes <= 0:
            raise ValueError(f"job {self.job_id}: requested_nodes must be positive")
        if not self.requested_time > 0:
            raise ValueError(f"job {self.job_id}: requested_time must be positive")


@dataclass(frozen=True)
class Partition:
    partition_id: str
    node_count: int
    model_id: str

    def __post_init__(self):
        if self.node_count <= 0:
            raise ValueError(f"partition {self.partition_id}: node_count must be positive")
