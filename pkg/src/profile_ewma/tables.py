"""Shift grids for the eight published run-length tables and their reference values.

Every table uses two responses and the correlations 0.1, 0.5 and 0.9. Cells
carry the published ARL (``published``) and, where the publication prints one in
parentheses, the ARL of the earlier comparison scheme (``comparison``). Both
are static reference data; the comparison scheme is never simulated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

from .chart import ChartConfig
from .model import ErrorCovariance, ProcessModel, reference_model
from .simulate import ArlEstimate, ShiftScenario, SimulationConfig, arl_cells

RHOS = (0.1, 0.5, 0.9)

TABLE_TITLES = {
    1: "beta01 -> beta01 + lambda*sd1",
    2: "beta02 -> beta02 + lambda*sd1",
    3: "beta11 -> beta11 + lambda*sd1",
    4: "beta01 + lambda1*sd1, beta02 + lambda2*sd1",
    5: "beta11 + lambda1*sd1, beta12 + lambda2*sd1",
    6: "beta01 + lambda1*sd1, beta11 + lambda2*sd1",
    7: "sd1 -> lambda*sd1",
    8: "sd1 -> lambda1*sd1, sd2 -> lambda2*sd2",
}


def _scenario(table: int, l1: float, l2: Optional[float]) -> ShiftScenario:
    zero, one = (0.0, 0.0), (1.0, 1.0)
    build = {
        1: lambda: ShiftScenario((l1, 0.0), zero, one),
        2: lambda: ShiftScenario((0.0, l1), zero, one),
        3: lambda: ShiftScenario(zero, (l1, 0.0), one),
        4: lambda: ShiftScenario((l1, l2), zero, one),
        5: lambda: ShiftScenario(zero, (l1, l2), one),
        6: lambda: ShiftScenario((l1, 0.0), (l2, 0.0), one),
        7: lambda: ShiftScenario(zero, zero, (l1, 1.0)),
        8: lambda: ShiftScenario(zero, zero, (l1, l2)),
    }
    return build[table]()


@dataclass(frozen=True)
class TableCell:
    table: int
    rho: float
    lambda1: float
    lambda2: Optional[float]
    scenario: ShiftScenario
    published: float
    comparison: Optional[float]


@lru_cache(maxsize=None)
def _reference() -> dict:
    text = resources.files("profile_ewma").joinpath("data/reference_arl.json").read_text()
    return json.loads(text)


def table_cells(table: int) -> list[TableCell]:
    """Cells of a published table in its printed order (rho-major for tables 1-3 and 7)."""
    if table not in TABLE_TITLES:
        raise KeyError(f"unknown table {table}; expected 1..8")
    return [
        TableCell(table, c["rho"], c["lambda1"], c["lambda2"],
                  _scenario(table, c["lambda1"], c["lambda2"]), c["published"], c["comparison"])
        for c in _reference()[str(table)]
    ]


def find_cell(table: int, rho: float, lambda1: float, lambda2: float | None = None) -> TableCell:
    for c in table_cells(table):
        if c.rho == rho and c.lambda1 == lambda1 and c.lambda2 == lambda2:
            return c
    raise KeyError((table, rho, lambda1, lambda2))


def with_correlation(base: ProcessModel, rho: float) -> ProcessModel:
    """``base`` with its two-response covariance re-built at correlation ``rho``."""
    if base.p != 2:
        raise ValueError("the published tables are defined for two responses")
    sd1, sd2 = (float(v) ** 0.5 for v in base.sigma.sigma.diagonal())
    return ProcessModel(base.design, base.b0, ErrorCovariance.bivariate(sd1, sd2, rho))


def run_table(
    table: int,
    chart_config: ChartConfig = ChartConfig(),
    config: SimulationConfig = SimulationConfig(),
    base: ProcessModel | None = None,
    *,
    workers: int = 1,
) -> list[tuple[TableCell, ArlEstimate]]:
    """Simulate every cell of a table; cell i uses stream ``(table, i)``."""
    base = base if base is not None else reference_model()
    cells = table_cells(table)
    models = {rho: with_correlation(base, rho) for rho in RHOS}
    estimates = arl_cells(
        [(models[c.rho], c.scenario) for c in cells], chart_config, config,
        stream_prefix=(table,), workers=workers,
    )
    return list(zip(cells, estimates))


def within_tolerance(est: ArlEstimate, reference: float, rel: float = 0.10, n_se: float = 3.0) -> bool:
    """|estimate - reference| <= max(rel * reference, n_se * std_err)."""
    return abs(est.mean_rl - reference) <= max(rel * reference, n_se * est.std_err)
