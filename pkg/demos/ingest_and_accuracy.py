"""Ingest a small market, cache it, and profile the forecast errors.

Run with ``python demos/ingest_and_accuracy.py [OUT_DIR]``.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from bessarb import accuracy
from bessarb.market_data import align, cache_read, cache_write, parse_dispatch, parse_predispatch
from bessarb.synthetic import hourly_bias, synthetic_forecasts, synthetic_prices

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="bessarb-demo-"))
out.mkdir(parents=True, exist_ok=True)

# Fake a pair of operator files: dispatch prices and pre-dispatch forecasts.
prices = synthetic_prices(days=14, seed=3)
forecasts = synthetic_forecasts(prices, seed=4, bias=hourly_bias())
with open(out / "dispatch.csv", "w") as fh:
    fh.write("region,settlement_time,price\n")
    for t, p in zip(prices.times, prices.prices):
        fh.write(f"NSW1,{t},{p}\n")
with open(out / "predispatch.csv", "w") as fh:
    fh.write("region,settlement_time,made_time,predicted_price\n")
    for s, m, p in zip(forecasts.settlement_times, forecasts.made_times, forecasts.prices):
        fh.write(f"NSW1,{s},{m},{p}\n")

dataset = align(parse_dispatch(out / "dispatch.csv", "NSW1"), parse_predispatch(out / "predispatch.csv", "NSW1"))
cache_write(dataset, out / "dataset.cache")
dataset = cache_read(out / "dataset.cache")
print(f"{len(dataset.settlements)} settlements, {int(dataset.matched.sum())} matched forecasts")

errors = accuracy.compute_errors(dataset)
print("\nmean error by lead time (first six buckets):")
for g in accuracy.horizon_profile(errors)[:6]:
    print(f"  {g.group_key:4.1f} h  mean {g.mean:7.2f}  ci95 [{g.ci95_lo:6.2f}, {g.ci95_hi:6.2f}]")

by_hour = accuracy.temporal_profile(errors, "hour")
worst = max(by_hour, key=lambda g: abs(g.mean))
print(f"\nforecasts run furthest from actuals at hour {worst.group_key}: mean error {worst.mean:.1f}")

vol = accuracy.volatility(dataset.settlements)
print(f"mean daily price stddev: {vol.mean:.1f} over {len(vol.records)} days")

paths = accuracy.export_all(dataset, out / "accuracy")
print(f"\nwrote {len(paths)} CSVs to {out / 'accuracy'}")
print(f"largest absolute error: {np.max(np.abs(errors.abs_error)):.1f}")
