"""Profile model: fixed design points, in-control coefficients and error covariance.

All containers are frozen dataclasses holding read-only numpy arrays, so a
:class:`ProcessModel` can be shared freely between worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateDesign, DimensionMismatch, NotPositiveDefinite

# relative pivot tolerance for the Cholesky positive-definiteness check
PIVOT_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DesignPoints:
    x: np.ndarray
    x_bar: float
    s_xx: float

    @classmethod
    def from_values(cls, x: Sequence[float]) -> "DesignPoints":
        x = _frozen(x)
        if x.ndim != 1:
            raise DimensionMismatch(f"x must be one-dimensional, got shape {x.shape}")
        if x.size < 2:
            raise DegenerateDesign(f"need at least 2 design points, got {x.size}")
        if not np.all(np.isfinite(x)):
            raise DegenerateDesign("design points must be finite")
        x_bar = float(x.mean())
        s_xx = float(((x - x_bar) ** 2).sum())
        if not s_xx > 0:
            raise DegenerateDesign("all design points are equal (s_xx = 0)")
        return cls(x, x_bar, s_xx)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def matrix(self) -> np.ndarray:
        """The n x 2 regressor matrix with rows [1, x_i]."""
        return np.column_stack([np.ones(self.n), self.x])


@dataclass(frozen=True)
class CoefMatrix:
    """The 2 x p coefficient matrix, stored row-wise."""

    intercepts: np.ndarray
    slopes: np.ndarray

    def __init__(self, intercepts, slopes):
        b0 = _frozen(intercepts)
        b1 = _frozen(slopes)
        if b0.ndim != 1 or b1.ndim != 1 or b0.size != b1.size or b0.size < 1:
            raise DimensionMismatch(
                f"intercepts and slopes must be equal-length vectors, got {b0.shape} and {b1.shape}"
            )
        object.__setattr__(self, "intercepts", b0)
        object.__setattr__(self, "slopes", b1)

    @property
    def p(self) -> int:
        return self.intercepts.size

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([self.intercepts, self.slopes])


@dataclass(frozen=True)
class ErrorCovariance:
    sigma: np.ndarray
    chol: np.ndarray

    @classmethod
    def from_matrix(cls, sigma) -> "ErrorCovariance":
        s = np.atleast_2d(np.array(sigma, dtype=float))
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise DimensionMismatch(f"sigma must be square, got shape {s.shape}")
        if not np.array_equal(s, s.T):
            raise NotPositiveDefinite("sigma is not symmetric")
        return cls(_frozen(s), _frozen(cholesky_factor(s)))

    @classmethod
    def bivariate(cls, sd1: float, sd2: float, rho: float) -> "ErrorCovariance":
        c = rho * sd1 * sd2
        return cls.from_matrix([[sd1 * sd1, c], [c, sd2 * sd2]])

    @property
    def p(self) -> int:
        return self.sigma.shape[0]

    @property
    def total(self) -> float:
        """Sum of every entry of sigma, i.e. 1' Sigma 1."""
        return float(self.sigma.sum())


def cholesky_factor(sigma: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T == sigma, or raise NotPositiveDefinite."""
    diag = np.diag(sigma)
    if np.any(diag <= 0):
        raise NotPositiveDefinite("sigma has a non-positive diagonal entry")
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    pivots = np.diag(L) ** 2
    if np.any(pivots <= PIVOT_TOL * diag.max()):
        raise NotPositiveDefinite("sigma is numerically singular")
    return L


@dataclass(frozen=True)
class ProcessModel:
    design: DesignPoints
    b0: CoefMatrix
    sigma: ErrorCovariance

    def __post_init__(self):
        if self.b0.p != self.sigma.p:
            raise DimensionMismatch(
                f"coefficients have p={self.b0.p} profiles but sigma is {self.sigma.p}x{self.sigma.p}"
            )

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def p(self) -> int:
        return self.b0.p

    def to_dict(self) -> dict:
        return {
            "x": self.design.x.tolist(),
            "intercepts": self.b0.intercepts.tolist(),
            "slopes": self.b0.slopes.tolist(),
            "sigma": self.sigma.sigma.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProcessModel":
        missing = {"x", "intercepts", "slopes", "sigma"} - set(d)
        if missing:
            raise DimensionMismatch(f"model is missing keys: {sorted(missing)}")
        return build_model(d["x"], CoefMatrix(d["intercepts"], d["slopes"]), d["sigma"])


def build_model(x, b0: CoefMatrix, sigma) -> ProcessModel:
    """Validate and assemble a :class:`ProcessModel`.

    ``sigma`` may be an :class:`ErrorCovariance` or anything array-like.
    """
    if not isinstance(sigma, ErrorCovariance):
        sigma = ErrorCovariance.from_matrix(sigma)
    return ProcessModel(DesignPoints.from_values(x), b0, sigma)


def reference_model(rho: float = 0.5, sd1: float = 1.0, sd2: float = 1.0) -> ProcessModel:
    """Two-response reference setup: y1 = 3 + 2x, y2 = 2 + x at x = 2, 4, 6, 8."""
    return build_model(
        [2.0, 4.0, 6.0, 8.0],
        CoefMatrix([3.0, 2.0], [2.0, 1.0]),
        ErrorCovariance.bivariate(sd1, sd2, rho),
    )


def mean_response(model: ProcessModel) -> np.ndarray:
    """n x p matrix of expected responses, entry (i, j) = b0_j + b1_j * x_i."""
    return model.b0.intercepts[None, :] + model.design.x[:, None] * model.b0.slopes[None, :]
