import csv

import numpy as np
import pytest

from bessarb.baseline import BaselineParams
from bessarb.battery import BatteryConfig
from bessarb.sweeps import (
    SweepCell,
    SweepGrid,
    full_sweep,
    max_actions_sweep,
    parallel_coords_export,
    threshold_sweep,
    write_actions_curve,
    write_heatmap,
)
from bessarb.synthetic import synthetic_prices

from helpers import settlements, two_price_days

QUARTER = BatteryConfig(soc_init_fraction=0.25)


def alternating(days=2):
    return settlements(np.tile([40.0, 160.0], 24 * days))


def spike_fixture():
    # the battery drains on ordinary evening peaks long before the spike arrives
    day = np.full(48, 100.0)
    day[6:12] = 60.0
    day[35] = 200.0
    prices = np.tile(day, 3)
    prices[96 + 37] = 17480.0
    return settlements(prices)


def test_grid_defaults_and_validation():
    g = SweepGrid()
    assert g.buy_range[0] == -50.0 and g.buy_range[-1] == 50.0 and len(g.buy_range) == 11
    assert g.sell_range[0] == 50.0 and g.sell_range[-1] == 150.0 and len(g.sell_range) == 11
    assert list(g.actions_range) == list(range(1, 11))
    with pytest.raises(ValueError):
        SweepGrid(buy_range=())
    with pytest.raises(ValueError):
        SweepGrid(sell_range=(100.0, 90.0))


def test_dead_band_cells_earn_nothing():
    result = threshold_sweep(settlements(np.full(96, 100.0)))
    assert len(result.cells) == 121
    for c in result.cells:
        if c.buy < 100 < c.sell:
            assert c.total_revenue == 0.0


def test_alternating_fixture_argmax_region():
    result = threshold_sweep(alternating())
    top = max(c.total_revenue for c in result.cells)
    region = [c for c in result.cells if c.buy >= 40]
    assert {c.total_revenue for c in region} == {top}
    assert all(c.total_revenue < top for c in result.cells if c.buy < 40)
    assert result.best.buy == 40.0 and result.best.sell == 50.0  # first in (buy, sell) order
    for c in result.cells:
        assert c.actions_per_day_mean <= c.max_actions


def test_extended_point_captures_the_spike():
    grid = SweepGrid(extended_points=((1500.0, 1500.0),))
    result = threshold_sweep(spike_fixture(), grid=grid)
    (ext,) = result.extended
    assert (ext.buy, ext.sell) == (1500.0, 1500.0)
    assert ext.total_revenue > 80_000
    assert ext.total_revenue > max(c.total_revenue for c in result.cells)
    assert result.best not in result.extended


def test_50_150_cell_in_top_decile_on_synthetic_year():
    result = threshold_sweep(synthetic_prices(days=366, seed=0))
    ranked = sorted(result.cells, key=lambda c: -c.total_revenue)
    rank = next(i for i, c in enumerate(ranked) if (c.buy, c.sell) == (50.0, 150.0))
    assert rank < len(ranked) / 10


def test_cap_one_to_two_doubles_revenue():
    curve = max_actions_sweep(settlements(two_price_days(6)), QUARTER, actions_range=range(0, 6))
    rev = curve.revenues
    assert rev[0] == 0.0
    assert rev[2] == pytest.approx(2 * rev[1], rel=1e-12)
    assert rev[2] == rev[3] == rev[4] == rev[5]  # two profitable trades a day saturate the cap
    assert curve.plateau_at == 2


def test_plateau_none_on_empty_range():
    curve = max_actions_sweep(alternating(), actions_range=[])
    assert curve.cells == [] and curve.plateau_at is None


def test_cells_are_deterministic_and_parallel_matches_serial():
    prices = synthetic_prices(days=20, seed=4)
    grid = SweepGrid(buy_range=(0.0, 30.0, 50.0), sell_range=(100.0, 150.0), actions_range=(1, 3))
    serial = full_sweep(prices, grid=grid)
    assert serial == full_sweep(prices, grid=grid)
    assert serial == full_sweep(prices, grid=grid, jobs=2)


def test_heatmap_and_curve_files(tmp_path):
    result = threshold_sweep(alternating(), grid=SweepGrid(extended_points=((1500.0, 1500.0),)))
    write_heatmap(result, tmp_path / "heatmap.csv")
    rows = list(csv.reader(open(tmp_path / "heatmap.csv")))
    assert rows[0] == ["buy", "sell", "max_actions", "total_revenue", "actions_per_day_mean"]
    assert len(rows) == 1 + 121 + 1
    curve = max_actions_sweep(alternating(), params=BaselineParams(40, 160, 3), actions_range=range(1, 4))
    write_actions_curve(curve, tmp_path / "curve.csv")
    assert len((tmp_path / "curve.csv").read_text().splitlines()) == 4


def test_parallel_coords_rows(tmp_path):
    cells = [SweepCell(0.0, 100.0, 1, 12.5, 0.5), SweepCell(10.0, 100.0, 2, 20.0, 1.0), SweepCell(20.0, 110.0, 3, -3.0, 2.0)]
    path = tmp_path / "pc.csv"
    parallel_coords_export(cells, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["buy", "sell", "max_actions", "actions_per_day_mean", "total_revenue"]
    assert len(rows) == 4
    assert [float(v) for v in rows[3]] == [20.0, 110.0, 3.0, 2.0, -3.0]
    with pytest.raises(ValueError):
        parallel_coords_export([], path)


def test_full_default_grid_row_count(tmp_path):
    cells = full_sweep(alternating(days=1))
    assert len(cells) == 11 * 11 * 10
    parallel_coords_export(cells, tmp_path / "pc.csv")
    assert len((tmp_path / "pc.csv").read_text().splitlines()) == 1 + 1210
