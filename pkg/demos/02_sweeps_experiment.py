"""
More data, smaller error
========================

Repeating the logging pass over the query set ("sweeps") adds clicks but no
new interventions. The estimation error should nevertheless shrink, since
the click rates inside each interventional set become more precise.
"""

from posbias import SimulationConfig, run_sweep_experiment

# smaller than the full-size experiment so that the demo runs in seconds
config = SimulationConfig(num_queries=300, overlap=0.8, seed=0)
rows = run_sweep_experiment(config, [1, 2, 5, 10], runs=4)

print("sweeps   mean MSE    variance  failed")
for row in rows:
    print(f"{row.x_value:6d} {row.mse_mean:10.2e} {row.mse_variance:11.2e} {row.unidentifiable_runs:7d}")

# every run re-uses the same corpus and rankers across sweep counts, and the
# larger logs extend the smaller ones, so the comparison is paired
