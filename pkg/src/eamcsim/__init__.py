"""Energy-aware multi-partition batch scheduling simulator."""

from .appdb import AppDatabase, load, load_bundled, save
from .epm import JobPartitionEntry, PolicyConfig, Strategy, assign_priorities
from .jobs import Job, Partition
from .model import (AppSignature, CoefficientSet, FrequencyRange, HardwareCoefficients,
                    HardwareModel, Prediction, SignatureEntry, predict)
from .sched import ClusterState, schedule_pass
from .sim import (MetricsReport, WorkloadSpec, compute_metrics, generate_workload,
                  run_simulation, scenario_mix)

__version__ = "0.1.0"

__all__ = [
    "AppDatabase", "AppSignature", "ClusterState", "CoefficientSet", "FrequencyRange",
    "HardwareCoefficients", "HardwareModel", "Job", "JobPartitionEntry", "MetricsReport",
    "Partition", "PolicyConfig", "Prediction", "SignatureEntry", "Strategy", "WorkloadSpec",
    "assign_priorities", "compute_metrics", "generate_workload", "load", "load_bundled",
    "predict", "run_simulation", "save", "scenario_mix", "schedule_pass",
]
