"""Regenerate src/eamcsim/data/table1.appdb from the measured table and the synthetic fit."""

from pathlib import Path

from eamcsim import appdb
from eamcsim.table1 import NODE_TYPES, build_database, memory_latency

HEADER = """\
# Measured metrics of eight applications on partitions p1/p2/p3 (runtime,
# node power and CPI at the maximum frequency; TPI derived from memory
# bandwidth assuming 64-byte transactions).
# Coefficients A..F are a synthetic least-squares fit, not measured values.
# Effective memory latency used by the fit (ns): {latencies}
# Generated by tools/gen_table1_appdb.py -- do not edit by hand.
"""


def main():
    db = build_database()
    lat = ", ".join(f"{n.model_id}={memory_latency(n, i):.3f}" for i, n in enumerate(NODE_TYPES))
    out = Path(__file__).resolve().parents[1] / "src" / "eamcsim" / "data" / "table1.appdb"
    out.write_text(HEADER.format(latencies=lat) + "\n" + appdb.dumps(db), encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
