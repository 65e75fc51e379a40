"""Forecast-aware dispatch: one horizon solve, then a rolling backtest.

Run with ``python demos/rolling_milp.py``.
"""

import datetime as dt

from bessarb.baseline import run_baseline_backtest
from bessarb.optimizer import HorizonInstance, OptimizerParams, run_milp_backtest, solve_horizon
from bessarb.oracle import oracle_dp, validate_plan
from bessarb.synthetic import synthetic_dataset

# A single look-ahead: cheap, middling, dear.
t0 = dt.datetime(2024, 1, 1, 0, 30)
times = [t0 + dt.timedelta(minutes=30 * i) for i in range(3)]
inst = HorizonInstance(times, [40.0, 60.0, 160.0], soc0=0.0, capacity_max=20.0)
plan = solve_horizon(inst)
print("plan:", [(s.decision, s.charge_energy or s.discharge_energy) for s in plan.steps])
print(f"objective {plan.objective_value:.0f}, oracle {oracle_dp(inst, OptimizerParams(), 0.5):.0f}, "
      f"validator problems {validate_plan(inst, OptimizerParams(), plan)}")

# A month of rolling decisions on synthetic forecasts.
ds = synthetic_dataset(days=31, seed=2)
milp = run_milp_backtest(ds, params=OptimizerParams(lookahead_hours=24, daily_action_max=6, override_revenue=1000))
base = run_baseline_backtest(ds)
print(f"\nbaseline {base.total_revenue:,.0f} ({base.actions_total} actions)")
print(f"milp-raw {milp.total_revenue:,.0f} ({milp.actions_total} actions, {milp.info['overrides']} overrides, "
      f"{milp.info['rejected_bids']} rejected bids)")
print(f"forecasts used after their decision time: {milp.info['lookahead_violations']}")
