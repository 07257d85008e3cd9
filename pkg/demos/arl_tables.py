"""Average run lengths for intercept shifts across three correlations.

Uses 1000 replications per cell so it runs in under a minute; the
table reported in reports/ uses 5000.
"""
from profile_ewma import ChartConfig, SimulationConfig
from profile_ewma.tables import RHOS, find_cell, run_table

chart = ChartConfig(theta=0.2, l_b=3.6233)
sim = SimulationConfig(replications=1000)

rows = run_table(1, chart, sim)
print(f"{'rho':>4} {'lambda':>6} {'ARL':>8} {'se':>6} {'published':>9}")
for cell, est in rows:
    print(f"{cell.rho:4.1f} {cell.lambda1:6.1f} {est.mean_rl:8.2f} {est.std_err:6.2f} {cell.published:9.2f}")

# Single cell lookup
cell = find_cell(1, RHOS[0], 1.0)
print(cell.scenario)
