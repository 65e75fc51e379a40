"""Correct biased operator forecasts with the forest, then trade on them.

Trains on autumn data and evaluates on a disjoint January. Takes about twenty
seconds with the default 100 trees.

Run with ``python demos/ml_forecasts.py``.
"""

import numpy as np

from bessarb import accuracy
from bessarb.forecast_ml import accuracy_report, enhanced_source, train
from bessarb.optimizer import run_milp_backtest
from bessarb.synthetic import hourly_bias, synthetic_dataset
from bessarb.trees import ForestParams

bias = hourly_bias()
train_ds = synthetic_dataset(start="2023-09-01", days=90, seed=10, bias=bias)
test_ds = synthetic_dataset(start="2024-01-01", days=31, seed=11, bias=bias)

model = train(train_ds, ForestParams(), seed=0)
print(f"trained {len(model.trees)} trees on {model.meta['train_rows']} rows, rmse {model.meta['train_rmse']:.1f}")

report = accuracy_report(model, test_ds)
raw = accuracy.compute_errors(test_ds)
print(f"test MAE: operator {np.mean(np.abs(raw.abs_error)):.1f}, model {np.mean(np.abs(report['errors'].abs_error)):.1f}")
print("mean error at midday (operator vs model):",
      f"{accuracy.temporal_profile(raw, 'hour')[12].mean:.1f} vs {report['hour'][12].mean:.1f}")

r_raw = run_milp_backtest(test_ds)
r_ml = run_milp_backtest(test_ds, source=enhanced_source(model, test_ds))
print(f"\nJanuary revenue: milp-raw {r_raw.total_revenue:,.0f}, milp-ml {r_ml.total_revenue:,.0f}")
