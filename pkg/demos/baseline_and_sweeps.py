"""Threshold strategy on a synthetic year, then the parameter studies.

Run with ``python demos/baseline_and_sweeps.py``.
"""

from bessarb.baseline import BaselineParams, run_baseline_backtest
from bessarb.sweeps import SweepGrid, max_actions_sweep, threshold_sweep
from bessarb.synthetic import synthetic_prices

prices = synthetic_prices(days=366, seed=0)

result = run_baseline_backtest(prices, params=BaselineParams(charge_bid=50, discharge_offer=150, daily_action_max=3))
print(f"buy <= 50, sell >= 150, 3 actions a day: {result.total_revenue:,.0f} from {result.actions_total} actions")
print(f"  {result.actions_per_day_mean:.2f} actions per day")
hist = result.hourly_histogram()
print(f"  busiest charge hour {hist[:, 0].argmax()}, busiest discharge hour {hist[:, 1].argmax()}")

heatmap = threshold_sweep(prices, grid=SweepGrid(extended_points=((1500.0, 1500.0),)))
best = heatmap.best
print(f"\nbest in-range cell: buy {best.buy:g}, sell {best.sell:g} -> {best.total_revenue:,.0f}")
ranked = sorted(heatmap.cells, key=lambda c: -c.total_revenue)
rank = next(i for i, c in enumerate(ranked) if (c.buy, c.sell) == (50.0, 150.0)) + 1
print(f"(50, 150) ranks {rank} of {len(ranked)}")
for cell in heatmap.extended:
    print(f"extended point ({cell.buy:g}, {cell.sell:g}): {cell.total_revenue:,.0f}, mostly spike captures")

curve = max_actions_sweep(prices, actions_range=range(0, 11))
print("\nrevenue by daily action cap:")
for c in curve.cells:
    print(f"  {c.max_actions:2d}: {c.total_revenue:10,.0f}")
print(f"plateau from cap {curve.plateau_at}")
