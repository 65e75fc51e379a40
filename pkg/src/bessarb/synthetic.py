"""Synthetic half-hourly markets for tests and demonstrations.

Prices follow a daily shape with a morning shoulder, a midday solar trough
and an evening peak, plus seasonal drift, Gaussian noise and rare spikes.
Forecasts are the actual price plus a configurable hour-of-day bias and
noise that grows with lead time.
"""

from __future__ import annotations

import numpy as np

from .market_data import TIME_UNIT, AlignedDataset, ForecastTable, SettlementTable, align

# $/MWh by hour of day
DAILY_SHAPE = np.array(
    [85, 80, 75, 72, 70, 78, 110, 150, 130, 90, 55, 35,
     30, 32, 40, 70, 140, 210, 240, 200, 150, 120, 100, 90], dtype=float
)


def half_hours(start: str, days: int) -> np.ndarray:
    t0 = np.datetime64(start, "m")
    return t0 + np.arange(days * 48) * np.timedelta64(30, "m")


def synthetic_prices(start="2024-01-01", days=366, seed=0, noise=15.0, spikes=3, spike_price=17480.0, region="NSW1") -> SettlementTable:
    rng = np.random.default_rng(seed)
    times = half_hours(start, days)
    minutes = times.astype(np.int64)
    hour = (minutes // 60) % 24
    frac = (minutes % 60) / 60.0
    shape = DAILY_SHAPE[hour] * (1 - frac) + DAILY_SHAPE[(hour + 1) % 24] * frac
    day = np.arange(len(times)) // 48
    season = 1.0 + 0.15 * np.sin(2 * np.pi * day / 365.0)
    prices = shape * season + rng.normal(0.0, noise, len(times))
    if spikes:
        evening = np.flatnonzero((hour >= 17) & (hour <= 19))
        for k in rng.choice(evening, size=spikes, replace=False):
            prices[k] = spike_price
    return SettlementTable(region, times, np.round(prices, 2))


def hourly_bias(amplitude=30.0, offset=20.0):
    """Bias curve: forecasts run high overall, most strongly at midday."""
    def bias(hour):
        return offset + amplitude * np.exp(-((np.asarray(hour) - 12.5) ** 2) / 8.0)
    return bias


def synthetic_forecasts(settlements: SettlementTable, seed=1, issue_every_hours=3.0, max_horizon_hours=27.0,
                        bias=None, noise=10.0, noise_growth=0.05) -> ForecastTable:
    """Forecast runs published every ``issue_every_hours`` for the horizon ahead.

    Each run covers half hours ``0.5 .. max_horizon_hours`` ahead; targets
    outside the settlement span are still published (left unmatched).
    """
    rng = np.random.default_rng(seed)
    times = settlements.times
    step = int(round(issue_every_hours * 2))
    steps_ahead = np.arange(1, int(round(max_horizon_hours * 2)) + 1)
    index = np.arange(len(times))
    issues = index[::step]
    made_idx = np.repeat(issues, len(steps_ahead))
    target_idx = made_idx + np.tile(steps_ahead, len(issues))
    inside = target_idx < len(times)
    made_idx, target_idx = made_idx[inside], target_idx[inside]
    ahead_h = (target_idx - made_idx) / 2.0
    made = times[made_idx] - np.timedelta64(0, "m")
    target = times[target_idx]
    actual = settlements.prices[target_idx]
    hour = (target.astype(np.int64) // 60) % 24
    b = 0.0 if bias is None else bias(hour)
    sd = noise * (1.0 + noise_growth * ahead_h)
    predicted = actual + b + rng.normal(0.0, 1.0, len(actual)) * sd
    return ForecastTable(settlements.region, target.astype(TIME_UNIT), made.astype(TIME_UNIT), np.round(predicted, 2))


def synthetic_dataset(start="2024-01-01", days=366, seed=0, region="NSW1", spikes=3, **forecast_kw) -> AlignedDataset:
    settlements = synthetic_prices(start, days, seed, spikes=spikes, region=region)
    forecasts = synthetic_forecasts(settlements, seed=seed + 1, **forecast_kw)
    return align(settlements, forecasts, region)
