"""Least-squares profile fits and the covariance of the summed coefficients.

The chart tracks the 2-vector (sum of intercepts, sum of slopes). Its
covariance ``SigmaB`` follows from the per-pair estimator covariances

    cov(b0u, b0v) = s_uv * (1/n + xbar**2 / s_xx)
    cov(b1u, b1v) = s_uv / s_xx
    cov(b0u, b1v) = -s_uv * xbar / s_xx

summed over all (u, v) pairs, which collapses to (1' Sigma 1) times the
classical simple-regression covariance matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, NotPositiveDefinite
from .model import CoefMatrix, DesignPoints, ErrorCovariance, ProcessModel


@dataclass(frozen=True)
class CoefSumVector:
    b0_sum: float
    b1_sum: float

    def as_array(self) -> np.ndarray:
        return np.array([self.b0_sum, self.b1_sum])

    @classmethod
    def from_array(cls, a) -> "CoefSumVector":
        return cls(float(a[0]), float(a[1]))


@dataclass(frozen=True)
class SigmaB:
    s11: float
    s22: float
    s12: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [self.s12, self.s22]])


def fit_arrays(y: np.ndarray, design: DesignPoints) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised fit over samples of shape (..., n, p).

    Returns ``(intercepts, slopes)``, each of shape (..., p).
    """
    y = np.asarray(y, dtype=float)
    if y.ndim < 2 or y.shape[-2] != design.n:
        raise DimensionMismatch(f"sample has shape {y.shape}, expected (..., {design.n}, p)")
    dx = design.x - design.x_bar
    slopes = np.einsum("i,...ij->...j", dx, y) / design.s_xx
    intercepts = y.mean(axis=-2) - slopes * design.x_bar
    return intercepts, slopes


def fit_profiles(sample, design: DesignPoints) -> CoefMatrix:
    """Ordinary least-squares intercept and slope for each response column."""
    sample = np.asarray(sample, dtype=float)
    if sample.ndim != 2:
        raise DimensionMismatch(f"sample must be an n x p matrix, got shape {sample.shape}")
    b0, b1 = fit_arrays(sample, design)
    return CoefMatrix(b0, b1)


def coef_sum(b_hat: CoefMatrix) -> CoefSumVector:
    return CoefSumVector(float(b_hat.intercepts.sum()), float(b_hat.slopes.sum()))


def cov_intercepts(sigma_uv: float, design: DesignPoints, printed: bool = False) -> float:
    """Covariance of two fitted intercepts whose errors covary by ``sigma_uv``.

    ``printed=True`` returns the variant with ``xbar`` in place of ``xbar**2``;
    it disagrees with simulation and exists only for comparison.
    """
    xb = design.x_bar if printed else design.x_bar ** 2
    return sigma_uv * (1.0 / design.n + xb / design.s_xx)


def cov_slopes(sigma_uv: float, design: DesignPoints) -> float:
    return sigma_uv / design.s_xx


def cov_intercept_slope(sigma_uv: float, design: DesignPoints) -> float:
    return -sigma_uv * design.x_bar / design.s_xx


def sigma_b(sigma: ErrorCovariance, design: DesignPoints, printed: bool = False) -> SigmaB:
    """Covariance of the summed-coefficient vector.

    Raises NotPositiveDefinite when the result is not a valid 2x2 covariance,
    which is what happens with ``printed=True`` on most designs.
    """
    total = sigma.total
    sb = SigmaB(
        cov_intercepts(total, design, printed=printed),
        cov_slopes(total, design),
        cov_intercept_slope(total, design),
    )
    if not (sb.s11 > 0 and sb.s22 > 0 and sb.s11 * sb.s22 - sb.s12 ** 2 > 0):
        raise NotPositiveDefinite(f"summed-coefficient covariance is not positive definite: {sb}")
    return sb


def model_sigma_b(model: ProcessModel) -> SigmaB:
    return sigma_b(model.sigma, model.design)


def point_variances(design: DesignPoints, sb: SigmaB) -> np.ndarray:
    """Variance of [1, x_i] @ (B_hat 1) for every design point."""
    x = design.x
    return sb.s11 + 2.0 * x * sb.s12 + x * x * sb.s22


def point_variance(design: DesignPoints, i: int, sb: SigmaB) -> float:
    """Variance of the fitted mean-sum at design point ``i`` (0-based)."""
    if not 0 <= i < design.n:
        raise IndexOutOfRange(f"design point index {i} outside 0..{design.n - 1}")
    x = design.x[i]
    return float(sb.s11 + 2.0 * x * sb.s12 + x * x * sb.s22)
