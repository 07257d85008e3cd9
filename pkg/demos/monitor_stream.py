"""Feed a stream of samples through the EWMA chart one at a time.

The first 30 samples are in control; after that the first response's
intercept moves up by one standard deviation.
"""
import numpy as np

from profile_ewma import ChartConfig, EwmaChart, ShiftScenario, apply_scenario, generate_sample, reference_model

model = reference_model(0.5)
chart = EwmaChart(model, ChartConfig(theta=0.2, l_b=3.0215))
shifted = apply_scenario(model, ShiftScenario((1.0, 0.0), (0, 0), (1, 1)))
rng = np.random.default_rng(11)

for j in range(1, 61):
    source = model if j <= 30 else shifted
    verdict = chart.update(generate_sample(source, rng))
    flag = "SIGNAL" if verdict.signal else ""
    print(f"{j:3d}  V={verdict.v:6.3f}  limit={verdict.limit:6.3f}  point={verdict.worst_point}  {flag}")

# The chart does not reset itself after a signal; do it explicitly.
chart.reset()
print("after reset, z =", chart.state.z)
