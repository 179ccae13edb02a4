"""
How similar should the logged rankers be?
=========================================

Very different rankers create many interventions, but mostly between
ranks far apart, which are rarely clicked. Nearly identical rankers swap
only neighbouring documents, and identical rankers create no interventions
at all. The best estimates come from something in between.
"""

import math

from posbias import SimulationConfig, run_overlap_experiment

config = SimulationConfig(num_queries=300, sweeps=5, seed=0)
overlaps = [0.0, 0.4, 0.8, 0.95, 1.0]
rows = run_overlap_experiment(config, overlaps, runs=3)

print("overlap   mean MSE  unidentified runs")
for row in rows:
    mean = "   n/a   " if math.isnan(row.mse_mean) else f"{row.mse_mean:9.2e}"
    print(f"{row.x_value:7.2f} {mean} {row.unidentifiable_runs:18d}")

# at overlap 1 both rankers produce the same lists, so no position pair is
# ever intervened on and every run is reported as unidentifiable
