"""Build the reference two-response profile model and look at the summed
coefficient covariance, then confirm it by brute-force simulation."""
import numpy as np

from profile_ewma import CoefMatrix, NotPositiveDefinite, build_model, cov_intercepts, cov_slopes, fit_profiles, reference_model, sigma_b
from profile_ewma.covcheck import check_covariances

# Four design points, two correlated responses.
model = reference_model(rho=0.5)
print("x =", model.design.x)
print("B =\n", model.b0.matrix)
print("Sigma =\n", model.sigma.sigma)

# %% Analytic covariance of the summed intercepts and slopes.
sb = sigma_b(model.sigma, model.design)
print("Sigma_B =\n", sb.matrix)
print("per-response intercept cov:\n", cov_intercepts(model.sigma.sigma, model.design))
print("per-response slope cov:\n", cov_slopes(model.sigma.sigma, model.design))

# Using xbar where xbar**2 belongs shrinks the intercept variance so far
# that Sigma_B stops being a covariance matrix at all.
try:
    sigma_b(model.sigma, model.design, printed=True)
except NotPositiveDefinite as exc:
    print("xbar variant:", exc)

# %% Fit a single noisy sample by least squares.
rng = np.random.default_rng(3)
y = model.design.x[:, None] * model.b0.slopes + model.b0.intercepts
y = y + rng.multivariate_normal([0, 0], model.sigma.sigma, size=model.design.n)
print(fit_profiles(y, model.design))

# %% Monte Carlo check, 20k fitted samples (the CLI default is 100k).
for row in check_covariances(model, reps=20_000, seed=1):
    mark = "ok " if row.passed else "BAD"
    print(f"{mark} {row.quantity:24s} ({row.u},{row.v})  {row.analytic:9.4f}  {row.monte_carlo:9.4f}  z={row.z:7.2f}")

# A custom model: five points, three responses.
custom = build_model([1, 2, 3, 4, 5], CoefMatrix([1, 0, 3], [2, 1, -1]), np.eye(3) + 0.2)
print("custom Sigma_B =\n", sigma_b(custom.sigma, custom.design).matrix)
