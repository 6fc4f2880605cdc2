"""
Efficiency and idle metrics of a run
====================================

Relative efficiency compares each load level with full load.  The extrapolated
idle power continues the line through the 10% and 20% measurements down to
zero load; EIQ divides it by the measured idle power.
"""

from pathlib import Path

import numpy as np

from specpower_trends import compute_metrics, load_directory, parse_run

SAMPLES = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "samples"
runs = [parse_run(d) for d in load_directory(SAMPLES)]
runs = [r for r in runs if hasattr(r, "levels")]

for run in runs:
    m = compute_metrics(run)
    print(f"{run.result_id}  overall {m.overall_efficiency:8.1f} (printed {run.reported_overall_efficiency:6.0f})"
          f"  idle/full {m.idle_fraction:.3f}  EIQ {m.eiq:.3f}")

# the extrapolation is an ordinary least-squares line
run = runs[-1]
loads = np.array([10.0, 20.0])
watts = np.array([run.level(0.1).avg_power_w, run.level(0.2).avg_power_w])
slope, intercept = np.polyfit(loads, watts, 1)
print(f"line through 10%/20%: {slope:.2f} W per load point, {intercept:.1f} W at zero load")
print("same as 2*P10 - P20:", 2 * watts[0] - watts[1])

# relative efficiency below 1 means partial load is less efficient than full load
m = compute_metrics(run)
print({f"{lvl:.0%}": round(v, 3) for lvl, v in m.relative_efficiency.items()})
