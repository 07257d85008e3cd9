"""Monte Carlo run lengths, ARL estimation and control-limit calibration.

Random numbers
--------------
Every replication owns an independent stream::

    SeedSequence(entropy=seed, spawn_key=(*stream, replication)) -> Philox -> Generator

(numpy's Philox4x64-10 counter-based bit generator, normals from
``Generator.standard_normal``). A replication's draws therefore do not depend
on how replications are split across worker processes, and run lengths are
aggregated with exact integer sums, so results are bit-identical for any
worker count. Streams are stable for a fixed numpy major version; see
``RNG_ALGORITHM``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import lfilter

from .chart import ChartConfig, in_control_sum, limit_factor, standardized_deviations
from .errors import DimensionMismatch, NoBracket
from .estimate import fit_arrays, model_sigma_b, point_variances
from .model import ErrorCovariance, ProcessModel, mean_response

log = logging.getLogger(__name__)

RNG_ALGORITHM = f"numpy-{np.__version__.split('.')[0]}.x Philox4x64-10 / SeedSequence spawn_key=(*stream, rep)"
DEFAULT_SEED = 20170401

# draws per replication per round; replications that survive keep using the last size
_CHUNKS = (16, 32, 64, 128, 256)
_BATCH = 1024
L_B_MAX = 20.0


@dataclass(frozen=True)
class ShiftScenario:
    intercept_shifts: tuple = ()
    slope_shifts: tuple = ()
    stddev_factors: tuple = ()

    def __post_init__(self):
        for name in ("intercept_shifts", "slope_shifts", "stddev_factors"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        lens = {len(self.intercept_shifts), len(self.slope_shifts), len(self.stddev_factors)}
        if len(lens) != 1:
            raise DimensionMismatch("scenario lists must all have length p")
        if any(not f > 0 for f in self.stddev_factors):
            raise ValueError("stddev_factors must be strictly positive")

    @classmethod
    def in_control(cls, p: int) -> "ShiftScenario":
        return cls((0.0,) * p, (0.0,) * p, (1.0,) * p)

    @classmethod
    def from_dict(cls, d: dict, p: int | None = None) -> "ShiftScenario":
        if p is None:
            p = len(next(iter(d.values()), ()))
        return cls(
            d.get("intercept_shifts", (0.0,) * p),
            d.get("slope_shifts", (0.0,) * p),
            d.get("stddev_factors", (1.0,) * p),
        )

    def to_dict(self) -> dict:
        return {
            "intercept_shifts": list(self.intercept_shifts),
            "slope_shifts": list(self.slope_shifts),
            "stddev_factors": list(self.stddev_factors),
        }

    @property
    def p(self) -> int:
        return len(self.intercept_shifts)


@dataclass(frozen=True)
class SimulationConfig:
    replications: int = 5000
    max_steps: int = 20000
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.replications < 1 or self.max_steps < 1:
            raise ValueError("replications and max_steps must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class ArlEstimate:
    mean_rl: float
    std_err: float
    replications: int
    censored: int

    @classmethod
    def from_run_lengths(cls, lengths: np.ndarray, signaled: np.ndarray) -> "ArlEstimate":
        # exact integer moments keep the estimate independent of summation order
        ints = [int(v) for v in lengths]
        n = len(ints)
        s = sum(ints)
        ss = sum(v * v for v in ints)
        std_err = math.sqrt((n * ss - s * s) / (n * (n - 1)) / n) if n > 1 else float("nan")
        return cls(s / n, std_err, n, int(n - np.count_nonzero(signaled)))


def replication_rng(seed: int, rep: int, stream: Sequence[int] = ()) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(*stream, rep))
    return np.random.Generator(np.random.Philox(ss))


def _as_stream(stream) -> tuple:
    if isinstance(stream, (int, np.integer)):
        return (int(stream),)
    return tuple(int(s) for s in stream)


def sample_errors(sigma: ErrorCovariance, n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent rows from N(0, sigma), each L @ g for standard normal g."""
    g = rng.standard_normal((n, sigma.p))
    return g @ sigma.chol.T


def apply_scenario(model: ProcessModel, scenario: ShiftScenario) -> ProcessModel:
    """The out-of-control model used to generate data.

    Coefficient shifts are in units of the first response's in-control standard
    deviation; standard-deviation factors rescale sigma_uv by f_u * f_v, which
    keeps the correlations fixed.
    """
    if scenario.p != model.p:
        raise DimensionMismatch(f"scenario has p={scenario.p}, model has p={model.p}")
    sd1 = math.sqrt(model.sigma.sigma[0, 0])
    b0 = model.b0.intercepts + sd1 * np.array(scenario.intercept_shifts)
    b1 = model.b0.slopes + sd1 * np.array(scenario.slope_shifts)
    f = np.array(scenario.stddev_factors)
    sigma = np.outer(f, f) * model.sigma.sigma
    return ProcessModel(model.design, type(model.b0)(b0, b1), ErrorCovariance.from_matrix(sigma))


def generate_sample(shifted: ProcessModel, rng: np.random.Generator) -> np.ndarray:
    return mean_response(shifted) + sample_errors(shifted.sigma, shifted.n, rng)


def _chunk(k: int) -> int:
    return _CHUNKS[min(k, len(_CHUNKS) - 1)]


def _run_block(model, shifted, chart_config, seed, stream, start, stop, max_steps, kind, rng=None):
    """Run lengths for replications ``start..stop-1``; returns (lengths, signaled).

    A caller-supplied ``rng`` replaces the derived stream of a single replication.
    """
    if kind == "ewma":
        theta = chart_config.theta
        threshold = chart_config.l_b
    elif kind == "shewhart":
        if chart_config.m_alpha is None:
            raise ValueError("the Shewhart chart needs m_alpha")
        threshold = chart_config.m_alpha
    else:
        raise ValueError(f"unknown chart kind {kind!r}")

    design = model.design
    n, p = model.n, model.p
    sd = np.sqrt(point_variances(design, model_sigma_b(model)))
    center = in_control_sum(model)
    mean = mean_response(shifted)
    lt = shifted.sigma.chol.T

    total = stop - start
    lengths = np.full(total, max_steps, dtype=np.int64)
    signaled = np.zeros(total, dtype=bool)
    for b in range(0, total, _BATCH):
        m = min(_BATCH, total - b)
        if rng is not None:
            rngs = [rng]
        else:
            rngs = [replication_rng(seed, start + b + i, stream) for i in range(m)]
        z = np.tile(center, (m, 1))
        active = np.arange(m)
        done = k = 0
        while active.size and done < max_steps:
            c = min(_chunk(k), max_steps - done)
            g = np.stack([rngs[a].standard_normal((c, n, p)) for a in active])
            b0, b1 = fit_arrays(mean + g @ lt, design)
            w = np.stack([b0.sum(axis=-1), b1.sum(axis=-1)], axis=-1)
            if kind == "ewma":
                zi = ((1.0 - theta) * z[active])[:, None, :]
                zz, _ = lfilter([theta], [1.0, theta - 1.0], w, axis=1, zi=zi)
                steps = np.arange(done + 1, done + c + 1)
                limits = threshold * limit_factor(steps, theta, chart_config.steady_state)
                z[active] = zz[:, -1, :]
            else:
                zz = w
                limits = np.full(c, threshold)
            v = standardized_deviations(zz - center, design, sd).max(axis=-1)
            hit = v > limits
            any_hit = hit.any(axis=1)
            pos = b + active[any_hit]
            lengths[pos] = done + hit[any_hit].argmax(axis=1) + 1
            signaled[pos] = True
            active = active[~any_hit]
            done += c
            k += 1
    return lengths, signaled


def _execute(tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [_run_block(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_block, *zip(*tasks)))


def _split(replications: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, replications))
    edges = np.linspace(0, replications, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _tasks(model, scenario, config, chart_config, stream, workers, kind):
    shifted = apply_scenario(model, scenario)
    return [
        (model, shifted, chart_config, config.seed, stream, a, b, config.max_steps, kind)
        for a, b in _split(config.replications, workers)
    ]


def simulate_run_lengths(
    model: ProcessModel,
    scenario: ShiftScenario,
    config: SimulationConfig,
    chart_config: ChartConfig,
    *,
    stream=0,
    workers: int = 1,
    kind: str = "ewma",
) -> tuple[np.ndarray, np.ndarray]:
    """Zero-state run lengths of every replication and whether each one signaled.

    Unsignaled (censored) replications report ``config.max_steps``.
    ``kind`` is ``"ewma"`` or ``"shewhart"`` (the latter uses ``chart_config.m_alpha``).
    """
    stream = _as_stream(stream)
    results = _execute(_tasks(model, scenario, config, chart_config, stream, workers, kind), workers)
    return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])


def run_length(model, scenario, config, chart_config, rng: np.random.Generator, kind: str = "ewma") -> int:
    """One zero-state run length driven by ``rng``; ``config.max_steps`` if censored."""
    shifted = apply_scenario(model, scenario)
    lengths, _ = _run_block(model, shifted, chart_config, 0, (), 0, 1, config.max_steps, kind, rng=rng)
    return int(lengths[0])


def estimate_arl(
    model: ProcessModel,
    scenario: ShiftScenario,
    config: SimulationConfig,
    chart_config: ChartConfig,
    *,
    stream=0,
    workers: int = 1,
    kind: str = "ewma",
    warn_censored: bool = True,
) -> ArlEstimate:
    lengths, signaled = simulate_run_lengths(
        model, scenario, config, chart_config, stream=stream, workers=workers, kind=kind
    )
    est = ArlEstimate.from_run_lengths(lengths, signaled)
    if est.censored and warn_censored:
        log.warning(
            "%d of %d runs censored at max_steps=%d; mean_rl is biased low",
            est.censored, est.replications, config.max_steps,
        )
    return est


def arl_table(
    model: ProcessModel,
    chart_config: ChartConfig,
    config: SimulationConfig,
    grid: Sequence[ShiftScenario],
    *,
    stream_prefix: Iterable[int] = (),
    workers: int = 1,
) -> list[ArlEstimate]:
    """One ARL estimate per scenario, in grid order, each on its own derived stream."""
    if not grid:
        raise ValueError("grid is empty")
    return arl_cells([(model, s) for s in grid], chart_config, config, stream_prefix=stream_prefix, workers=workers)


def arl_cells(cells, chart_config, config, *, stream_prefix=(), workers: int = 1) -> list[ArlEstimate]:
    """Like :func:`arl_table` for ``(model, scenario)`` pairs that may use different models.

    All cells share one worker pool; cell ``i`` uses stream ``(*stream_prefix, i)``.
    """
    prefix = _as_stream(stream_prefix)
    tasks, owner = [], []
    for i, (model, scenario) in enumerate(cells):
        t = _tasks(model, scenario, config, chart_config, (*prefix, i), workers, "ewma")
        tasks += t
        owner += [i] * len(t)
    results = _execute(tasks, workers)
    out = []
    for i in range(len(cells)):
        parts = [r for r, o in zip(results, owner) if o == i]
        out.append(
            ArlEstimate.from_run_lengths(
                np.concatenate([r[0] for r in parts]), np.concatenate([r[1] for r in parts])
            )
        )
    return out


@dataclass(frozen=True)
class Calibration:
    """A calibrated chart constant and the in-control ARL estimate behind it."""

    value: float
    estimate: ArlEstimate

    def __float__(self) -> float:
        return self.value


def _stages(config: SimulationConfig) -> tuple[int, ...]:
    r = config.replications
    return (r, 4 * r, 20 * r)


def calibrate_limit(
    model: ProcessModel,
    theta: float,
    target_arl: float,
    config: SimulationConfig = SimulationConfig(),
    *,
    stages: Sequence[int] | None = None,
    tolerance: float = 2.0,
    steady_state: bool = False,
    workers: int = 1,
) -> Calibration:
    """Find ``l_b`` whose in-control ARL matches ``target_arl``.

    Stochastic bisection with common random numbers: the bracket is grown by
    doubling, then narrowed while the replication count escalates through
    ``stages`` (default 1x, 4x and 20x ``config.replications``). The search
    stops once the final-stage estimate is within ``tolerance`` of the target.
    """
    if not target_arl > 1:
        raise ValueError("target_arl must exceed 1")
    stages = tuple(stages or _stages(config))
    widths = (0.02, 0.005) + (0.0,) * max(0, len(stages) - 2)
    ic = ShiftScenario.in_control(model.p)

    def arl(l_b, reps):
        cfg = replace(config, replications=reps)
        cc = ChartConfig(theta=theta, l_b=l_b, steady_state=steady_state)
        return estimate_arl(model, ic, cfg, cc, stream=(0xCA11B,), workers=workers, warn_censored=False)

    reps = stages[0]
    lo, hi = 0.0, 1.0
    while arl(hi, reps).mean_rl < target_arl:
        if hi >= L_B_MAX:
            raise NoBracket(f"in-control ARL stays below {target_arl} for l_b up to {L_B_MAX}")
        lo, hi = hi, min(2.0 * hi, L_B_MAX)

    for s, reps in enumerate(stages):
        final = s == len(stages) - 1
        # the bracket found with fewer replications may not hold at this precision
        step = max(hi - lo, 1e-3)
        while lo > 0 and arl(lo, reps).mean_rl >= target_arl:
            lo, hi = max(0.0, lo - step), lo
        while arl(hi, reps).mean_rl < target_arl:
            if hi >= L_B_MAX:
                raise NoBracket(f"in-control ARL stays below {target_arl} for l_b up to {L_B_MAX}")
            lo, hi = hi, min(hi + step, L_B_MAX)
        while True:
            mid = 0.5 * (lo + hi)
            est = arl(mid, reps)
            if final and abs(est.mean_rl - target_arl) <= tolerance:
                return Calibration(mid, est)
            if not final and hi - lo < widths[s]:
                break
            if hi - lo < 1e-9:
                if final:
                    return Calibration(mid, est)
                break
            if est.mean_rl < target_arl:
                lo = mid
            else:
                hi = mid
    raise AssertionError("unreachable")


def shewhart_statistics(model: ProcessModel, count: int, seed: int, stream=(0x5EE,)) -> np.ndarray:
    """In-control Shewhart statistics for ``count`` independent samples."""
    design = model.design
    sd = np.sqrt(point_variances(design, model_sigma_b(model)))
    center = in_control_sum(model)
    mean = mean_response(model)
    lt = model.sigma.chol.T
    block = 100_000
    out = []
    for i, start in enumerate(range(0, count, block)):
        c = min(block, count - start)
        g = replication_rng(seed, i, _as_stream(stream)).standard_normal((c, model.n, model.p))
        b0, b1 = fit_arrays(mean + g @ lt, design)
        w = np.stack([b0.sum(axis=-1), b1.sum(axis=-1)], axis=-1)
        out.append(standardized_deviations(w - center, design, sd).max(axis=-1))
    return np.concatenate(out)


def calibrate_shewhart(
    model: ProcessModel,
    target_arl: float,
    config: SimulationConfig = SimulationConfig(),
    *,
    samples: int | None = None,
) -> Calibration:
    """``m_alpha`` with per-sample in-control signal probability 1/target_arl.

    The chart is memoryless, so its in-control run length is geometric and
    calibration reduces to an upper quantile of the per-sample statistic,
    estimated from ``samples`` draws (default 200 x ``config.replications``).
    """
    if not target_arl > 1:
        raise ValueError("target_arl must exceed 1")
    samples = samples or 200 * config.replications
    stats = shewhart_statistics(model, samples, config.seed)
    m_alpha = float(np.quantile(stats, 1.0 - 1.0 / target_arl))
    if not 0 < m_alpha <= L_B_MAX:
        raise NoBracket(f"m_alpha={m_alpha:g} falls outside (0, {L_B_MAX}]")
    p_hat = np.count_nonzero(stats > m_alpha) / samples
    # delta method on ARL = 1/p
    se = math.sqrt(p_hat * (1 - p_hat) / samples) / p_hat**2 if p_hat > 0 else float("inf")
    arl_hat = 1.0 / p_hat if p_hat > 0 else float("inf")
    return Calibration(m_alpha, ArlEstimate(arl_hat, se, samples, 0))
