"""EWMA chart on the summed-coefficient vector, plus its Shewhart counterpart.

At step j the smoothed vector z_j = theta * w_j + (1 - theta) * z_{j-1} is
compared with the in-control sum B 1 at every design point,

    V(j) = max_i |X_i (z_j - B 1)| / sqrt(X_i SigmaB X_i'),

and the chart signals when V(j) exceeds
``l_b * sqrt(theta / (2 - theta) * (1 - (1 - theta)**(2 j)))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch
from .estimate import (
    CoefSumVector,
    SigmaB,
    coef_sum,
    fit_profiles,
    model_sigma_b,
    point_variances,
)
from .model import CoefMatrix, DesignPoints, ProcessModel


@dataclass(frozen=True)
class ChartConfig:
    theta: float = 0.2
    l_b: float = 3.6233
    m_alpha: Optional[float] = None
    steady_state: bool = False  # use the asymptotic limit at every step

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if not self.l_b >= 0:
            raise ValueError(f"l_b must be non-negative, got {self.l_b}")
        if self.m_alpha is not None and not self.m_alpha > 0:
            raise ValueError(f"m_alpha must be positive, got {self.m_alpha}")


@dataclass(frozen=True)
class EwmaChartState:
    z: CoefSumVector
    j: int = 0


@dataclass(frozen=True)
class ChartVerdict:
    v: float
    limit: float
    signal: bool
    worst_point: int


def in_control_sum(model: ProcessModel) -> np.ndarray:
    return np.array([model.b0.intercepts.sum(), model.b0.slopes.sum()])


def standardized_deviations(dev: np.ndarray, design: DesignPoints, sd: np.ndarray) -> np.ndarray:
    """|X_i dev| / sd_i for every design point; ``dev`` has shape (..., 2)."""
    dev = np.asarray(dev, dtype=float)
    return np.abs(dev[..., :1] + dev[..., 1:2] * design.x) / sd


def _max_statistic(z: np.ndarray, model: ProcessModel, sb: SigmaB) -> tuple[float, int]:
    sd = np.sqrt(point_variances(model.design, sb))
    t = standardized_deviations(z - in_control_sum(model), model.design, sd)
    i = int(np.argmax(t))  # first index on ties
    return float(t[i]), i


def ewma_init(model: ProcessModel) -> EwmaChartState:
    return EwmaChartState(CoefSumVector.from_array(in_control_sum(model)), 0)


def ewma_update(state: EwmaChartState, w: CoefSumVector, theta: float) -> EwmaChartState:
    if not 0 < theta <= 1:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    z = theta * w.as_array() + (1.0 - theta) * state.z.as_array()
    return EwmaChartState(CoefSumVector.from_array(z), state.j + 1)


def v_statistic(state: EwmaChartState, model: ProcessModel, sb: SigmaB) -> tuple[float, int]:
    """Return ``(V(j), index of the design point attaining the max)``."""
    return _max_statistic(state.z.as_array(), model, sb)


def limit_factor(j, theta: float, steady_state: bool = False):
    """sqrt(theta/(2-theta) * (1-(1-theta)**(2j))); accepts scalar or array j."""
    if steady_state:
        return np.sqrt(theta / (2.0 - theta)) + 0.0 * np.asarray(j, dtype=float)
    j = np.asarray(j, dtype=float)
    return np.sqrt(theta / (2.0 - theta) * (1.0 - (1.0 - theta) ** (2.0 * j)))


def control_limit(j: int, config: ChartConfig) -> float:
    if j < 1:
        raise ValueError(f"the control limit is defined for j >= 1, got {j}")
    return float(config.l_b * limit_factor(j, config.theta, config.steady_state))


def process_sample(
    state: EwmaChartState,
    sample,
    model: ProcessModel,
    sb: SigmaB,
    config: ChartConfig,
) -> tuple[EwmaChartState, ChartVerdict]:
    """Fit one sample, advance the EWMA and judge it against the limit."""
    sample = np.asarray(sample, dtype=float)
    if sample.shape != (model.n, model.p):
        raise DimensionMismatch(f"sample has shape {sample.shape}, expected {(model.n, model.p)}")
    return _advance(state, fit_profiles(sample, model.design), model, sb, config)


def _advance(state, b_hat: CoefMatrix, model, sb, config) -> tuple[EwmaChartState, ChartVerdict]:
    new = ewma_update(state, coef_sum(b_hat), config.theta)
    v, worst = v_statistic(new, model, sb)
    limit = control_limit(new.j, config)
    return new, ChartVerdict(v, limit, v > limit, worst)


def shewhart_verdict(
    b_hat_sum: CoefSumVector, model: ProcessModel, sb: SigmaB, m_alpha: float
) -> ChartVerdict:
    """Memoryless confidence-band check of a single fitted sample."""
    if not m_alpha > 0:
        raise ValueError(f"m_alpha must be positive, got {m_alpha}")
    v, worst = _max_statistic(b_hat_sum.as_array(), model, sb)
    return ChartVerdict(v, float(m_alpha), v > m_alpha, worst)


class EwmaChart:
    """Stateful wrapper for monitoring one stream of samples.

    The chart is never reset automatically after a signal; call :meth:`reset`.
    """

    def __init__(self, model: ProcessModel, config: ChartConfig = ChartConfig(), sb: SigmaB | None = None):
        self.model = model
        self.config = config
        self.sb = sb if sb is not None else model_sigma_b(model)
        self.reset()

    def reset(self) -> None:
        self.state = ewma_init(self.model)

    def update(self, sample) -> ChartVerdict:
        sample = np.asarray(sample, dtype=float)
        if sample.shape != (self.model.n, self.model.p):
            raise DimensionMismatch(
                f"sample has shape {sample.shape}, expected {(self.model.n, self.model.p)}"
            )
        self.last_fit = fit_profiles(sample, self.model.design)
        self.state, verdict = _advance(self.state, self.last_fit, self.model, self.sb, self.config)
        return verdict
