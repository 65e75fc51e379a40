"""Parameter studies over the threshold strategy."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field, fields
from itertools import product

import numpy as np

from .baseline import BaselineParams, run_baseline_backtest
from .battery import BatteryConfig


def _steps(lo, hi, step):
    return [float(v) for v in np.arange(lo, hi + step / 2, step)]


@dataclass(frozen=True)
class SweepGrid:
    buy_range: tuple = tuple(_steps(-50, 50, 10))
    sell_range: tuple = tuple(_steps(50, 150, 10))
    extended_points: tuple = ()
    actions_range: tuple = tuple(range(1, 11))

    def __post_init__(self):
        if not (self.buy_range and self.sell_range and self.actions_range):
            raise ValueError("sweep ranges must be non-empty")
        for name in ("buy_range", "sell_range", "actions_range"):
            values = list(getattr(self, name))
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ValueError(f"{name} must be strictly increasing")


@dataclass(frozen=True)
class SweepCell:
    buy: float
    sell: float
    max_actions: int
    total_revenue: float
    actions_per_day_mean: float


def _run_cell(args):
    settlements, config, buy, sell, cap = args
    result = run_baseline_backtest(settlements, config, BaselineParams(buy, sell, cap))
    return SweepCell(buy, sell, cap, result.total_revenue, result.actions_per_day_mean)


def _run_all(settlements, config, combos, jobs):
    tasks = [(settlements, config, b, s, c) for b, s, c in combos]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell, tasks, chunksize=8))
    else:
        cells = [_run_cell(t) for t in tasks]
    return sorted(cells, key=lambda c: (c.buy, c.sell, c.max_actions))


def _settlements(data):
    return getattr(data, "settlements", data)


@dataclass
class HeatmapResult:
    cells: list
    best: SweepCell
    extended: list = field(default_factory=list)


def threshold_sweep(data, config: BatteryConfig = BatteryConfig(), grid: SweepGrid = SweepGrid(), max_actions: int = 3, jobs: int = 1) -> HeatmapResult:
    """Baseline revenue for each (buy, sell) pair at a fixed daily cap.

    ``best`` is the highest-revenue in-range cell (ties go to the first in
    (buy, sell) order). Extended points are reported separately.
    """
    settlements = _settlements(data)
    cells = _run_all(settlements, config, product(grid.buy_range, grid.sell_range, [max_actions]), jobs)
    extended = _run_all(settlements, config, [(b, s, max_actions) for b, s in grid.extended_points], jobs)
    best = max(cells, key=lambda c: c.total_revenue)
    return HeatmapResult(cells, best, extended)


@dataclass
class ActionsCurve:
    cells: list
    plateau_at: int | None

    @property
    def revenues(self):
        return [c.total_revenue for c in self.cells]


def max_actions_sweep(data, config: BatteryConfig = BatteryConfig(), params: BaselineParams = BaselineParams(), actions_range=range(1, 11), jobs: int = 1, plateau_tol: float = 0.01) -> ActionsCurve:
    """Revenue as a function of the daily action cap.

    ``plateau_at`` is the smallest cap from which revenue stays within
    ``plateau_tol`` (relative) of the final value.
    """
    settlements = _settlements(data)
    caps = list(actions_range)
    cells = _run_all(settlements, config, [(params.charge_bid, params.discharge_offer, c) for c in caps], jobs)
    revenues = [c.total_revenue for c in cells]
    plateau = None
    if revenues:
        final = revenues[-1]
        band = plateau_tol * max(abs(final), 1.0)
        for k in range(len(revenues)):
            if all(abs(r - final) <= band for r in revenues[k:]):
                plateau = cells[k].max_actions
                break
    return ActionsCurve(cells, plateau)


def full_sweep(data, config: BatteryConfig = BatteryConfig(), grid: SweepGrid = SweepGrid(), jobs: int = 1) -> list[SweepCell]:
    """Every (buy, sell, cap) combination, for the parallel-coordinates view."""
    combos = list(product(grid.buy_range, grid.sell_range, grid.actions_range))
    combos += [(b, s, c) for (b, s) in grid.extended_points for c in grid.actions_range]
    return _run_all(_settlements(data), config, combos, jobs)


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_heatmap(result: HeatmapResult, path) -> None:
    _write(path, [f.name for f in fields(SweepCell)], (astuple(c) for c in result.cells + result.extended))


def write_actions_curve(curve: ActionsCurve, path) -> None:
    _write(path, ["max_actions", "total_revenue", "actions_per_day_mean"],
           ((c.max_actions, c.total_revenue, c.actions_per_day_mean) for c in curve.cells))


def parallel_coords_export(cells, path) -> None:
    if not cells:
        raise ValueError("no sweep cells to export")
    _write(path, ["buy", "sell", "max_actions", "actions_per_day_mean", "total_revenue"],
           ((c.buy, c.sell, c.max_actions, c.actions_per_day_mean, c.total_revenue) for c in cells))
