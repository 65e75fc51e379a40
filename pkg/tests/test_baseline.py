import numpy as np
import pytest

from bessarb.baseline import BaselineParams, decide_bid, run_baseline_backtest
from bessarb.battery import CHARGE, DISCHARGE, BatteryConfig, new_state
from bessarb.synthetic import synthetic_prices

from helpers import settlements, two_price_days


def test_decide_bid_cases():
    s = new_state(BatteryConfig())
    s.soc = 8.0
    assert decide_bid(s, BaselineParams()) == (CHARGE, 50.0)
    s.soc = 10.0
    assert decide_bid(s, BaselineParams()) == (DISCHARGE, 150.0)
    s.soc, s.capacity_max = 9.99, 19.9
    assert decide_bid(s, BaselineParams())[0] == DISCHARGE


def test_dead_band_earns_nothing():
    r = run_baseline_backtest(settlements(np.full(96, 100.0)))
    assert r.total_revenue == 0.0 and r.actions_total == 0


def test_two_price_days():
    days = 6
    config = BatteryConfig(soc_init_fraction=0.25)
    r = run_baseline_backtest(settlements(two_price_days(days)), config)
    assert r.total_revenue == pytest.approx(600.0 * days, rel=1e-12)
    assert r.actions_total == 2 * days
    assert r.n_days == days + 1  # last period ends at midnight of the next date
    hist = r.hourly_histogram()
    assert hist[2, 0] == days and hist[18, 1] == days and hist.sum() == 2 * days


def test_spike_capture():
    prices = np.full(48, 100.0)
    prices[36] = 17480.0
    r = run_baseline_backtest(settlements(prices))
    (entry,) = r.ledger.entries
    assert entry.cash_delta == 87400.0


def test_daily_cap_and_price_predicate():
    prices = synthetic_prices(days=30, seed=7)
    params = BaselineParams(50.0, 150.0, 3)
    r = run_baseline_backtest(prices, params=params)
    per_day = {}
    for e in r.ledger.entries:
        per_day[e.settlement_time.date()] = per_day.get(e.settlement_time.date(), 0) + 1
        if e.action == CHARGE:
            assert e.price <= 50.0
        else:
            assert e.price >= 150.0
    assert max(per_day.values()) <= 3
    assert r.ledger.resummed() == pytest.approx(r.total_revenue, rel=1e-9)


def test_zero_cap_never_trades():
    r = run_baseline_backtest(settlements(two_price_days(3)), params=BaselineParams(daily_action_max=0))
    assert r.actions_total == 0


def test_incoherent_thresholds_still_run():
    r = run_baseline_backtest(synthetic_prices(days=5, seed=1), params=BaselineParams(200.0, 20.0, 10))
    assert np.isfinite(r.total_revenue) and r.actions_total > 0


def test_determinism():
    prices = synthetic_prices(days=20, seed=3)
    a, b = run_baseline_backtest(prices), run_baseline_backtest(prices)
    assert a.ledger.entries == b.ledger.entries


def test_cumulative_series_and_files(tmp_path):
    r = run_baseline_backtest(settlements(two_price_days(2)), BatteryConfig(soc_init_fraction=0.25))
    assert r.cumulative_revenue[-1] == r.total_revenue
    assert np.all(np.diff(r.cumulative_revenue)[np.diff(r.cumulative_revenue) != 0] != 0)
    paths = r.write(tmp_path)
    assert [p.name for p in paths] == ["result.json", "ledger.csv", "cumulative_revenue.csv", "hourly_histogram.csv"]
    summary = r.summary()
    assert summary["hourly_histogram"]["charge"][2] == 2
    assert len((tmp_path / "cumulative_revenue.csv").read_text().splitlines()) == len(r.times) + 1


def test_monotone_in_cap_on_two_price_fixture():
    prices = settlements(two_price_days(8))
    revenues = [run_baseline_backtest(prices, BatteryConfig(soc_init_fraction=0.25), BaselineParams(50, 150, c)).total_revenue for c in range(0, 6)]
    assert all(b >= a for a, b in zip(revenues, revenues[1:]))
