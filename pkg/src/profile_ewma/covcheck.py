"""Monte Carlo check of the analytical estimator covariances.

Fits many simulated in-control samples and compares the sample covariance of
each estimator pair with its closed form, using a 4-standard-error band. The
variant with ``xbar`` in place of ``xbar**2`` in the intercept variance is
reported alongside so its disagreement is visible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimate import (
    cov_intercept_slope,
    cov_intercepts,
    cov_slopes,
    fit_arrays,
    model_sigma_b,
)
from .model import ProcessModel, mean_response
from .simulate import replication_rng

N_SE = 4.0


@dataclass(frozen=True)
class CovCheck:
    quantity: str
    u: int | None
    v: int | None
    analytic: float
    monte_carlo: float
    std_err: float

    @property
    def z(self) -> float:
        if self.std_err == 0:
            return 0.0 if self.analytic == self.monte_carlo else float("inf")
        return (self.monte_carlo - self.analytic) / self.std_err

    @property
    def passed(self) -> bool:
        return abs(self.z) <= N_SE


def _cov(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Unbiased sample covariance and its standard error."""
    prod = (a - a.mean()) * (b - b.mean())
    n = a.size
    return float(prod.sum() / (n - 1)), float(prod.std(ddof=1) / np.sqrt(n))


def simulate_fits(model: ProcessModel, reps: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Fitted intercepts and slopes, each (reps, p), from in-control samples."""
    rng = replication_rng(seed, 0, (0xC0F,))
    g = rng.standard_normal((reps, model.n, model.p))
    return fit_arrays(mean_response(model) + g @ model.sigma.chol.T, model.design)


def check_covariances(model: ProcessModel, reps: int = 100_000, seed: int = 1) -> list[CovCheck]:
    b0, b1 = simulate_fits(model, reps, seed)
    design, sig, p = model.design, model.sigma.sigma, model.p
    rows = []
    for u in range(p):
        for v in range(u, p):
            mc, se = _cov(b0[:, u], b0[:, v])
            rows.append(CovCheck("cov_intercepts", u, v, cov_intercepts(sig[u, v], design), mc, se))
            rows.append(CovCheck("cov_intercepts[xbar]", u, v,
                                 cov_intercepts(sig[u, v], design, printed=True), mc, se))
            mc, se = _cov(b1[:, u], b1[:, v])
            rows.append(CovCheck("cov_slopes", u, v, cov_slopes(sig[u, v], design), mc, se))
    for u in range(p):
        for v in range(p):
            mc, se = _cov(b0[:, u], b1[:, v])
            rows.append(CovCheck("cov_intercept_slope", u, v, cov_intercept_slope(sig[u, v], design), mc, se))

    s0, s1 = b0.sum(axis=1), b1.sum(axis=1)
    sb = model_sigma_b(model)
    total = model.sigma.total
    for name, a, b, value in (
        ("sigma_b.s11", s0, s0, sb.s11),
        ("sigma_b.s22", s1, s1, sb.s22),
        ("sigma_b.s12", s0, s1, sb.s12),
        ("sigma_b.s11[xbar]", s0, s0, cov_intercepts(total, design, printed=True)),
    ):
        mc, se = _cov(a, b)
        rows.append(CovCheck(name, None, None, value, mc, se))

    for name, a, value in (
        ("mean.b0_sum", s0, model.b0.intercepts.sum()),
        ("mean.b1_sum", s1, model.b0.slopes.sum()),
    ):
        rows.append(CovCheck(name, None, None, float(value), float(a.mean()),
                             float(a.std(ddof=1) / np.sqrt(a.size))))
    return rows
