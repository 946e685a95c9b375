"""
Frequency sweeps with the bundled application database
======================================================

Predict runtime, node power and energy over every frequency of each node
type, and compare the predicted runtime change per 100 MHz step with the
measured one.
"""

import numpy as np

from eamcsim import load_bundled, table1
from eamcsim.model import predict_sweep

db = load_bundled()

# a compute-bound and a memory-bound application on p1
for app in ("ep.D", "stream"):
    sig = db.apps[app]
    print(f"\n{app} on p1")
    print(f"{'GHz':>5} {'runtime s':>10} {'power W':>8} {'energy kJ':>10}")
    for p in predict_sweep(sig, db.models["p1"], reference=db.reference_model):
        print(f"{p.frequency:>5.1f} {p.runtime:>10.2f} {p.node_power:>8.1f} "
              f"{p.energy / 1e3:>10.2f}")

# average slope between f_min and f_max, predicted vs measured
print(f"\n{'app':<9}" + "".join(f"{pid + ' pred/meas':>20}" for pid in table1.PARTITIONS))
for app in table1.APP_IDS:
    cells = []
    for k, pid in enumerate(table1.PARTITIONS):
        sweep = predict_sweep(db.apps[app], db.models[pid], reference=db.reference_model)
        runtimes = np.array([p.runtime for p in sweep])
        slope = (runtimes[0] - runtimes[-1]) / (len(runtimes) - 1)
        cells.append(f"{slope:>9.2f} /{table1.RUNTIME_PER_STEP[app][k]:>6.2f}")
    print(f"{app:<9}" + "".join(f"{c:>20}" for c in cells))
