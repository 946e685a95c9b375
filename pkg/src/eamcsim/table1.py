"""Measured application data for partitions p1/p2/p3 and a synthetic coefficient set.

The per-application metrics below are the measured values (CPI, memory
bandwidth, runtime and node power at the maximum frequency, and runtime
sensitivity to frequency). Hardware coefficients for the three node types
were never published, so :func:`build_database` produces them by fitting
the linear power/CPI model to samples drawn from a simple physical
ground truth:

* memory stall cycles per instruction grow linearly with frequency,
  ``CPI(f) = CPI_ref + L * TPI * (f - f_ref)`` with ``L`` an effective memory
  latency in ns, calibrated per node type against the runtime-sensitivity
  column;
* node power has a static part, a dynamic part scaling as
  ``(f / f_ref) ** alpha``, and a memory part that does not scale with the
  core clock.

Both laws are exactly linear in ``(P_ref, TPI, 1)`` and ``(CPI_ref, TPI, 1)``
for a fixed target frequency, so the fit is lossless.

Run ``python tools/gen_table1_appdb.py`` to regenerate ``data/table1.appdb``.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

import numpy as np

from .appdb import AppDatabase
from .model import (AppSignature, FitSample, FrequencyRange, HardwareModel, SignatureEntry,
                    estimate_time_coefficient, fit_coefficients)

PARTITIONS = ("p1", "p2", "p3")

APP_IDS = ("lu.C", "ep.D", "bt-mz.C", "sp-mz.C", "lu-mz.C", "ua.C", "dgemm", "stream")

# per app: values on p1 / p2 / p3
CPI = {
    "lu.C": (0.67, 0.66, 0.57),
    "ep.D": (0.60, 0.60, 0.60),
    "bt-mz.C": (0.38, 0.39, 0.38),
    "sp-mz.C": (0.44, 0.50, 0.42),
    "lu-mz.C": (0.62, 0.62, 0.63),
    "ua.C": (0.99, 0.95, 0.87),
    "dgemm": (0.40, 0.40, 0.38),
    "stream": (4.46, 3.67, 3.55),
}
BANDWIDTH_GBS = {
    "lu.C": (70.95, 63.73, 59.7),
    "ep.D": (0.03, 0.04, 0.03),
    "bt-mz.C": (23.33, 19.96, 17.7),
    "sp-mz.C": (66.09, 52.24, 51.17),
    "lu-mz.C": (19.87, 21.14, 18.89),
    "ua.C": (51.29, 49.05, 45.5),
    "dgemm": (66.43, 62.76, 50.87),
    "stream": (138.87, 137.47, 136.86),
}
RUNTIME_S = {
    "lu.C": (52.49, 57.45, 62.78),
    "ep.D": (64.20, 74.20, 86.59),
    "bt-mz.C": (43.95, 51.32, 57.70),
    "sp-mz.C": (46.05, 59.76, 58.58),
    "lu-mz.C": (59.21, 61.41, 65.98),
    "ua.C": (46.96, 53.11, 54.51),
    "dgemm": (47.40, 52.60, 61.97),
    "stream": (107.55, 81.43, 110.34),
}
POWER_W = {
    "lu.C": (386, 367, 331.25),
    "ep.D": (349, 337, 290.32),
    "bt-mz.C": (417, 411, 342.73),
    "sp-mz.C": (460, 427, 375.47),
    "lu-mz.C": (355, 360, 308.81),
    "ua.C": (368, 360, 324.6),
    "dgemm": (491, 497, 366.25),
    "stream": (381, 365, 330.52),
}
# runtime change per 100 MHz step between f_min and f_max (s)
RUNTIME_PER_STEP = {
    "lu.C": (2.38, 2.87, 4.18),
    "ep.D": (5.67, 6.37, 8.97),
    "bt-mz.C": (3.52, 4.05, 5.65),
    "sp-mz.C": (3.07, 3.34, 4.64),
    "lu-mz.C": (4.75, 4.70, 6.33),
    "ua.C": (1.74, 1.84, 2.64),
    "dgemm": (3.29, 3.08, 4.09),
    "stream": (0.16, 0.06, 0.13),
}

CACHE_LINE_BYTES = 64


@dataclass(frozen=True)
class NodeType:
    model_id: str
    cores_per_node: int
    f_min: float
    f_max: float
    static_power: float  # W, does not scale with frequency
    alpha: float  # exponent of the dynamic power law
    memory_power_per_tpi: float  # W per unit TPI, frequency independent


NODE_TYPES = (
    # 2x Platinum 8168, 24C, 2.7-1.2 GHz
    NodeType("p1", 48, 1.2, 2.7, static_power=140.0, alpha=2.2, memory_power_per_tpi=600.0),
    # 2x Gold 6254, 18C, 3.1-1.2 GHz; larger DIMMs, higher DRAM power
    NodeType("p2", 36, 1.2, 3.1, static_power=150.0, alpha=2.2, memory_power_per_tpi=900.0),
    # 2x Gold 6148, 20C, 2.4-1.0 GHz
    NodeType("p3", 40, 1.0, 2.4, static_power=110.0, alpha=2.2, memory_power_per_tpi=600.0),
)


def tpi_from_bandwidth(gbs: float, cpi: float, cores: int, f_ghz: float) -> float:
    """Memory transactions per instruction from node bandwidth at full load."""
    transactions_per_s = gbs * 1e9 / CACHE_LINE_BYTES
    instructions_per_s = cores * f_ghz * 1e9 / cpi
    return transactions_per_s / instructions_per_s


def signature_entry(app_id: str, idx: int, node: NodeType) -> SignatureEntry:
    cpi = CPI[app_id][idx]
    tpi = tpi_from_bandwidth(BANDWIDTH_GBS[app_id][idx], cpi, node.cores_per_node, node.f_max)
    return SignatureEntry(RUNTIME_S[app_id][idx], float(POWER_W[app_id][idx]), tpi, cpi)


def memory_latency(node: NodeType, idx: int) -> float:
    """Effective latency L (ns) that best explains the runtime-sensitivity column.

    Under the ground truth, the runtime change from f_max to f_min is
    ``T_ref * (1 - m) * (f_max / f_min - 1)`` with memory-bound share
    ``m = L * TPI * f_max / CPI_ref``. Solved for L by least squares on m.
    """
    steps = round((node.f_max - node.f_min) * 10)
    x, y = [], []
    for app in APP_IDS:
        e = signature_entry(app, idx, node)
        pure = e.t_ref * (node.f_max / node.f_min - 1) / steps
        share = 1 - RUNTIME_PER_STEP[app][idx] / pure
        x.append(e.tpi_ref * node.f_max / e.cpi_ref)
        y.append(share)
    x, y = np.asarray(x), np.asarray(y)
    return float(x @ y / (x @ x))


def ground_truth(entry: SignatureEntry, node: NodeType, latency: float, f: float):
    """(power, cpi) at frequency f under the synthetic physical model."""
    scale = (f / node.f_max) ** node.alpha
    retained = node.static_power + node.memory_power_per_tpi * entry.tpi_ref
    power = scale * entry.p_ref + (1 - scale) * retained
    cpi = entry.cpi_ref + latency * entry.tpi_ref * (f - node.f_max)
    return power, cpi


def build_database(reference: str = "p1") -> AppDatabase:
    ref_idx = PARTITIONS.index(reference)
    models = {}
    entries: dict[str, dict[str, SignatureEntry]] = {app: {} for app in APP_IDS}
    for idx, node in enumerate(NODE_TYPES):
        fr = FrequencyRange.stepped(node.f_min, node.f_max, 0.1)
        latency = memory_latency(node, idx)
        samples = []
        for app in APP_IDS:
            e = signature_entry(app, idx, node)
            entries[app][node.model_id] = e
            for f in fr:
                power, cpi = ground_truth(e, node, latency, f)
                samples.append(FitSample(f, e.p_ref, e.tpi_ref, e.cpi_ref, power, cpi))
        coeffs = fit_coefficients(samples)
        # identity at f_ref is exact by construction; drop fitting round-off there
        sets = dict(coeffs.sets)
        sets.pop(round(fr.f_ref, 6))
        tc = 1.0
        if idx != ref_idx:
            tc = statistics.median(
                estimate_time_coefficient(RUNTIME_S[a][ref_idx], RUNTIME_S[a][idx])
                for a in APP_IDS)
        models[node.model_id] = HardwareModel(
            node.model_id, node.cores_per_node, fr, type(coeffs)(sets), tc)
    apps = {a: AppSignature(a, entries[a]) for a in APP_IDS}
    return AppDatabase(apps, models, reference)
