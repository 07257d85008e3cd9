"""Find the EWMA limit multiplier and the Shewhart multiplier that give an
in-control ARL of 200, and show that theta=1 collapses one onto the other."""
import numpy as np

from profile_ewma import ChartConfig, ShiftScenario, SimulationConfig, calibrate_limit, calibrate_shewhart, reference_model
from profile_ewma.simulate import simulate_run_lengths

model = reference_model(0.5)
sim = SimulationConfig(replications=2000)

ewma = calibrate_limit(model, theta=0.2, target_arl=200, config=sim)
print(f"L_B = {ewma.value:.4f}  (ARL {ewma.estimate.mean_rl:.1f} +- {ewma.estimate.std_err:.1f})")

shew = calibrate_shewhart(model, 200, sim)
print(f"m_alpha = {shew.value:.4f}")

# Paired seeds: identical run lengths.
ic = ShiftScenario.in_control(2)
a, _ = simulate_run_lengths(model, ic, sim, ChartConfig(1.0, shew.value))
b, _ = simulate_run_lengths(model, ic, sim, ChartConfig(1.0, 1.0, m_alpha=shew.value), kind="shewhart")
print("identical run lengths:", np.array_equal(a, b), " mean", a.mean())
